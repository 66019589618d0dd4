#ifndef EMREC_NLM_ADMM_HPP
#define EMREC_NLM_ADMM_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "emrec/recon.hpp"

namespace emrec {

/// Fair potential on squared patch distances:
/// p(t) = sigma_f^2 (sqrt(t / (sigma_f^2 N_f)) - log(1 + sqrt(t / (sigma_f^2 N_f)))),
/// so p(0) = 0 and p'(t) = 1 / (2 N_f (1 + sqrt(t / (sigma_f^2 N_f)))) is
/// finite and positive everywhere.
inline double fair_potential(double t, double sigma_f, int n_f) {
    const double u = std::sqrt(t / (sigma_f * sigma_f * n_f));
    return sigma_f * sigma_f * (u - std::log1p(u));
}

inline double fair_potential_deriv(double t, double sigma_f, int n_f) {
    const double u = std::sqrt(t / (sigma_f * sigma_f * n_f));
    return 1.0 / (2.0 * n_f * (1.0 + u));
}

namespace detail {

struct Offset {
    int dx, dy;
};

inline std::vector<Offset> search_offsets(int search_side) {
    const int h = search_side / 2;
    std::vector<Offset> offs;
    for (int dy = -h; dy <= h; ++dy)
        for (int dx = -h; dx <= h; ++dx)
            if (dx != 0 || dy != 0) offs.push_back({dx, dy});
    return offs;
}

// Squared patch distance t_i = ||N_i x - N_{i+off} x||^2 for every i whose
// patch and shifted patch stay inside the image.
inline Image patch_distances(const Image& x, Offset off, int patch_side) {
    const int h = patch_side / 2;
    Image t(x.n_x, x.n_y);
    for (int y = 0; y < x.n_y; ++y) {
        for (int ix = 0; ix < x.n_x; ++ix) {
            double acc = 0.0;
            bool valid = true;
            for (int py = -h; py <= h && valid; ++py) {
                for (int px = -h; px <= h; ++px) {
                    const int ax = ix + px, ay = y + py;
                    const int bx = ax + off.dx, by = ay + off.dy;
                    if (ax < 0 || ax >= x.n_x || ay < 0 || ay >= x.n_y ||
                        bx < 0 || bx >= x.n_x || by < 0 || by >= x.n_y) {
                        valid = false;
                        break;
                    }
                    const double d = x(ax, ay) - x(bx, by);
                    acc += d * d;
                }
            }
            t(ix, y) = valid ? acc : -1.0; // -1 marks pairs crossing the boundary
        }
    }
    return t;
}

} // namespace detail

/// R(x) = sum_i sum_{j in S_i} p(||N_i x - N_j x||^2).
inline double nlm_regularizer(const Image& x, const NlmConfig& cfg) {
    if (cfg.sigma_f <= 0.0) throw std::invalid_argument("nlm: sigma_f must be > 0");
    if (cfg.patch_side > x.n_x || cfg.patch_side > x.n_y ||
        cfg.search_side > x.n_x || cfg.search_side > x.n_y)
        throw std::invalid_argument("nlm: patch/search exceeds image bounds");
    const int n_f = cfg.patch_side * cfg.patch_side;
    double acc = 0.0;
    for (auto off : detail::search_offsets(cfg.search_side)) {
        Image t = detail::patch_distances(x, off, cfg.patch_side);
        for (double v : t.values)
            if (v >= 0.0) acc += fair_potential(v, cfg.sigma_f, n_f);
    }
    return acc;
}

/// grad R(x) = sum_{i, off} p'(t_i) * 2 (N_i - N_{i+off})' (N_i x - N_{i+off} x).
inline Image nlm_regularizer_gradient(const Image& x, const NlmConfig& cfg) {
    const int n_f = cfg.patch_side * cfg.patch_side;
    const int h = cfg.patch_side / 2;
    Image grad(x.n_x, x.n_y);
    for (auto off : detail::search_offsets(cfg.search_side)) {
        Image t = detail::patch_distances(x, off, cfg.patch_side);
        for (int y = 0; y < x.n_y; ++y) {
            for (int ix = 0; ix < x.n_x; ++ix) {
                const double ti = t(ix, y);
                if (ti < 0.0) continue;
                const double w = 2.0 * fair_potential_deriv(ti, cfg.sigma_f, n_f);
                for (int py = -h; py <= h; ++py) {
                    for (int px = -h; px <= h; ++px) {
                        const int ax = ix + px, ay = y + py;
                        const int bx = ax + off.dx, by = ay + off.dy;
                        const double d = w * (x(ax, ay) - x(bx, by));
                        grad(ax, ay) += d;
                        grad(bx, by) -= d;
                    }
                }
            }
        }
    }
    return grad;
}

/// ADMM splitting v = x. The x-step reuses the penalized EM root against
/// (v - dual); the v-step is gradient descent on the smooth Fair-potential
/// regularizer plus the quadratic coupling; the penalty follows the standard
/// residual-balancing rule.
inline std::pair<Image, ReconTrace> nlm_admm_reconstruct(const Measurement& m, const Geometry& g,
                                                         const ReconConfig& cfg) {
    cfg.validate();
    require_measurement_conforms(m, g);
    const NlmConfig& nlm = cfg.nlm;
    if (nlm.sigma_f <= 0.0) throw std::invalid_argument("nlm_admm: sigma_f must be > 0");
    if (nlm.beta < 0.0) throw std::invalid_argument("nlm_admm: beta must be >= 0");
    if (nlm.patch_side > g.n_x || nlm.patch_side > g.n_y ||
        nlm.search_side > g.n_x || nlm.search_side > g.n_y)
        throw std::invalid_argument("nlm_admm: patch/search exceeds image bounds");

    Image sens = sensitivity(g);
    Image x = uniform_fov_start(g, sens);
    for (int n = 0; n < cfg.n_em_init; ++n) x = em_step(x, m, g, sens);
    Image v = x;
    Image mu(g); // scaled dual
    double rho = nlm.rho0;

    const int n_offsets = static_cast<int>(detail::search_offsets(nlm.search_side).size());

    auto objective = [&](const Image& z) {
        return poisson_nll(z, m, g) + nlm.beta * nlm_regularizer(z, nlm);
    };

    ReconTrace trace;
    trace.iterations.push_back({x, poisson_nll(x, m, g), nlm.beta, 0.0, 0.0, objective(x)});

    for (int n = 0; n < cfg.outer_iterations; ++n) {
        // x-step: min f(x) + rho/2 ||x - (v - mu)||^2
        Image target(g);
        for (std::size_t j = 0; j < target.size(); ++j)
            target.values[j] = v.values[j] - mu.values[j];
        for (int inner = 0; inner < cfg.inner_iterations; ++inner)
            x = map_em_step(x, target, rho, m, g, sens);

        // v-step: min beta R(v) + rho/2 ||x - v + mu||^2, descent with a
        // step bounded by the regularizer's curvature (p' <= 1/(2 N_f)).
        Image anchor(g);
        for (std::size_t j = 0; j < anchor.size(); ++j)
            anchor.values[j] = x.values[j] + mu.values[j];
        const double lip = rho + 4.0 * nlm.beta * n_offsets;
        const double step = 1.0 / lip;
        Image v_prev = v;
        for (int s = 0; s < nlm.v_steps; ++s) {
            Image gr = nlm.beta > 0.0 ? nlm_regularizer_gradient(v, nlm) : Image(g);
            for (std::size_t j = 0; j < v.size(); ++j) {
                const double gj = nlm.beta * gr.values[j] + rho * (v.values[j] - anchor.values[j]);
                v.values[j] -= step * gj;
            }
        }

        // residuals and penalty balancing (scaled-dual form)
        double r_primal = 0.0, r_dual = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double rp = x.values[j] - v.values[j];
            r_primal += rp * rp;
            const double rd = rho * (v.values[j] - v_prev.values[j]);
            r_dual += rd * rd;
            mu.values[j] += rp;
        }
        r_primal = std::sqrt(r_primal);
        r_dual = std::sqrt(r_dual);
        if (r_primal > 10.0 * r_dual) {
            rho *= 2.0;
            for (double& d : mu.values) d *= 0.5;
        } else if (r_dual > 10.0 * r_primal) {
            rho *= 0.5;
            for (double& d : mu.values) d *= 2.0;
        }

        trace.iterations.push_back(
            {x, poisson_nll(x, m, g), nlm.beta, r_primal, r_dual, objective(x)});
    }
    return {x, trace};
}

} // namespace emrec

#endif
