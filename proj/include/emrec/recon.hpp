#ifndef EMREC_RECON_HPP
#define EMREC_RECON_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emrec/denoiser.hpp"
#include "emrec/geometry.hpp"
#include "emrec/projector.hpp"
#include "emrec/simulate.hpp"

namespace emrec {

inline void require_measurement_conforms(const Measurement& m, const Geometry& g) {
    if (!m.conforms(g)) throw std::invalid_argument("measurement does not match geometry");
}

/// f(x) = 1'(Ax + r) - y' log(Ax + r). Rays with y_i = 0 contribute only
/// the mean; a zero mean with positive counts signals an inconsistent model.
inline double poisson_nll(const Image& x, const Measurement& m, const Geometry& g) {
    require_image_conforms(x, g);
    require_measurement_conforms(m, g);
    Sinogram ax = forward_project(x, g);
    double f = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) {
        const double mean = ax.values[i] + m.r_bar[i];
        f += mean;
        if (m.y[i] > 0) {
            if (mean <= 0.0)
                throw std::domain_error("poisson_nll: zero mean with positive counts");
            f -= static_cast<double>(m.y[i]) * std::log(mean);
        }
    }
    return f;
}

/// grad f = A'(1 - y / ybar) = a - e(x).
inline Image poisson_nll_gradient(const Image& x, const Measurement& m, const Geometry& g,
                                  const Image& sens) {
    Sinogram ax = forward_project(x, g);
    Sinogram ratio(g);
    for (std::size_t i = 0; i < ax.size(); ++i) {
        const double mean = ax.values[i] + m.r_bar[i];
        if (m.y[i] > 0) {
            if (mean <= 0.0)
                throw std::domain_error("poisson_nll_gradient: zero mean with positive counts");
            ratio.values[i] = static_cast<double>(m.y[i]) / mean;
        }
    }
    Image e = back_project(ratio, g);
    Image grad = sens;
    for (std::size_t j = 0; j < grad.size(); ++j) grad.values[j] -= e.values[j];
    return grad;
}

/// e_j(x) = sum_i a_ij y_i / ybar_i(x), with 0/0 rays contributing 0.
inline Image em_ratio_backprojection(const Image& x, const Measurement& m, const Geometry& g) {
    Sinogram ax = forward_project(x, g);
    Sinogram ratio(g);
    for (std::size_t i = 0; i < ax.size(); ++i) {
        const double mean = ax.values[i] + m.r_bar[i];
        if (m.y[i] > 0) {
            if (mean <= 0.0)
                throw std::domain_error("em_step: zero mean with positive counts");
            ratio.values[i] = static_cast<double>(m.y[i]) / mean;
        }
    }
    return back_project(ratio, g);
}

/// Classic MLEM update: x_j <- (x_j / a_j) e_j(x). Zero voxels stay zero.
inline Image em_step(const Image& x, const Measurement& m, const Geometry& g, const Image& sens) {
    require_image_conforms(x, g);
    require_measurement_conforms(m, g);
    Image e = em_ratio_backprojection(x, m, g);
    Image out(x.n_x, x.n_y);
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x.values[j] == 0.0) continue;
        if (sens.values[j] <= 0.0)
            throw std::domain_error("em_step: positive voxel with zero sensitivity");
        out.values[j] = x.values[j] / sens.values[j] * e.values[j];
    }
    return out;
}

/// Per-voxel closed-form minimizer of the penalized EM surrogate
/// Q_j(t) = -nu log t + a_j t + (beta/2)(t - u_j)^2 over t >= 0, written as
/// the numerically stable root of beta t^2 + (a_j - beta u_j) t - nu = 0.
inline double map_em_root(double a_j, double beta, double u_j, double nu) {
    const double lambda = 0.5 * (a_j - beta * u_j);
    const double disc = std::sqrt(lambda * lambda + beta * nu);
    if (lambda < 0.0) return (disc - lambda) / beta;
    if (disc + lambda == 0.0) return 0.0; // nu = 0 at the boundary
    return nu / (disc + lambda);
}

/// One inner MAP-EM iteration toward target u with weight beta.
inline Image map_em_step(const Image& x, const Image& u, double beta, const Measurement& m,
                         const Geometry& g, const Image& sens) {
    if (beta <= 0.0) throw std::invalid_argument("map_em_step: beta must be > 0");
    require_image_conforms(x, g);
    require_measurement_conforms(m, g);
    Image e = em_ratio_backprojection(x, m, g);
    Image out(x.n_x, x.n_y);
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double nu = e.values[j] * x.values[j];
        out.values[j] = map_em_root(sens.values[j], beta, u.values[j], nu);
    }
    return out;
}

/// g1(v) = v / sum(v); output sums to 1.
inline Image normalize_g1(const Image& v) {
    double total = 0.0;
    for (double t : v.values) total += t;
    if (total <= 0.0) throw std::domain_error("normalize_g1: nonpositive image sum");
    Image out = v;
    const double inv = 1.0 / total;
    for (double& t : out.values) t *= inv;
    return out;
}

struct ScaleResult {
    Image scaled;
    double s = 1.0;
};

/// g2(v) = s* v with s* the 1-D maximum-likelihood intensity scale, found by
/// Newton's iteration on f(s v) with closed-form derivatives. Falls back to
/// bisection on a non-finite step; s clamped to [1e-6, 1e6].
inline ScaleResult scale_g2(const Image& v, const Measurement& m, const Geometry& g) {
    require_image_conforms(v, g);
    require_measurement_conforms(m, g);
    double vsum = 0.0;
    for (double t : v.values) vsum += t;
    if (vsum <= 0.0) throw std::domain_error("scale_g2: nonpositive image sum");

    Sinogram av = forward_project(v, g);
    const double s_lo = 1e-6, s_hi = 1e6;

    auto dfd = [&](double s) {
        // first and second derivative of f(s v) in s
        double d1 = 0.0, d2 = 0.0;
        for (std::size_t i = 0; i < av.size(); ++i) {
            const double p = av.values[i];
            if (p == 0.0) continue;
            const double mean = s * p + m.r_bar[i];
            d1 += p;
            if (m.y[i] > 0) {
                if (mean <= 0.0) return std::pair<double, double>{
                    -std::numeric_limits<double>::infinity(), 0.0};
                const double q = p / mean;
                d1 -= static_cast<double>(m.y[i]) * q;
                d2 += static_cast<double>(m.y[i]) * q * q;
            }
        }
        return std::pair<double, double>{d1, d2};
    };

    double s = 1.0;
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
        auto [d1, d2] = dfd(s);
        if (!std::isfinite(d1) || !std::isfinite(d2) || d2 <= 0.0) break;
        const double step = d1 / d2;
        if (!std::isfinite(step)) break;
        double s_next = s - step;
        if (s_next < s_lo) s_next = s_lo;
        if (s_next > s_hi) s_next = s_hi;
        const bool done = std::abs(s_next - s) < 1e-9 * std::abs(s);
        s = s_next;
        if (done) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        // bisection on the monotone derivative
        double lo = s_lo, hi = s_hi;
        auto sign_at = [&](double t) { return dfd(t).first; };
        if (sign_at(lo) < 0.0 && sign_at(hi) > 0.0) {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (sign_at(mid) < 0.0) lo = mid;
                else hi = mid;
            }
            s = 0.5 * (lo + hi);
        }
    }
    if (!std::isfinite(s)) throw std::domain_error("scale_g2: degenerate scaling");

    ScaleResult out;
    out.s = s;
    out.scaled = v;
    for (double& t : out.scaled.values) t *= s;
    return out;
}

/// beta = c * ||a - e(x)||_2 / ||x - u_scaled||_2, norms restricted to voxels
/// with positive sensitivity. Throws on a (near) zero denominator; callers
/// fall back to the previous beta.
inline double adaptive_beta(const Image& x, const Image& u_scaled, const Measurement& m,
                            const Geometry& g, const Image& sens, double c) {
    if (c <= 0.0) throw std::invalid_argument("adaptive_beta: c must be > 0");
    Image e = em_ratio_backprojection(x, m, g);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (sens.values[j] <= 0.0) continue;
        const double gn = sens.values[j] - e.values[j];
        num += gn * gn;
        const double dd = x.values[j] - u_scaled.values[j];
        den += dd * dd;
    }
    den = std::sqrt(den);
    if (den < 1e-12) throw std::domain_error("adaptive_beta: zero denominator");
    return c * std::sqrt(num) / den;
}

enum class Algorithm { em, bcdnet, tv_pdhg, nlm_admm };

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "em") return Algorithm::em;
    if (s == "bcdnet") return Algorithm::bcdnet;
    if (s == "tv_pdhg") return Algorithm::tv_pdhg;
    if (s == "nlm_admm") return Algorithm::nlm_admm;
    throw std::invalid_argument("unknown algorithm: " + s);
}

struct TvConfig {
    double beta = 1.0;
    std::optional<double> sigma; // dual step; defaults to 0.99 / ||[A; C]||
    std::optional<double> tau;   // primal step
    int power_iterations = 50;
};

struct NlmConfig {
    double beta = 1.0;
    double sigma_f = 1.0;
    int patch_side = 3;  // N_f = patch_side^2
    int search_side = 7; // S_i window
    int v_steps = 10;    // gradient steps per v-subproblem
    double rho0 = 1.0;   // initial ADMM penalty
};

struct ReconConfig {
    int outer_iterations = 30;    // T
    int inner_iterations = 1;     // T'
    double balance_c = 0.01;      // c
    int n_em_init = 10;           // EM iterations for x^(0)
    std::optional<double> beta_fixed;
    Algorithm algorithm = Algorithm::em;
    TvConfig tv;
    NlmConfig nlm;

    void validate() const {
        if (outer_iterations < 1 || inner_iterations < 1 || n_em_init < 1)
            throw std::invalid_argument("ReconConfig: iteration counts must be >= 1");
        if (balance_c <= 0.0) throw std::invalid_argument("ReconConfig: c must be > 0");
    }
};

struct IterationRecord {
    Image x;
    double nll = 0.0;
    double beta = 0.0; // 0 when the algorithm has no beta at this snapshot
    double aux_primal = 0.0;
    double aux_dual = 0.0;
    double objective = 0.0; // full composite objective when available, else nll
};

struct ReconTrace {
    std::vector<IterationRecord> iterations; // T + 1 entries including x^(0)
    Image one_shot_denoised;                 // g2(u^(1)) for bcdnet runs
    bool has_one_shot = false;
};

/// Uniform positive start inside the field of view (positive sensitivity).
inline Image uniform_fov_start(const Geometry& g, const Image& sens) {
    Image x(g);
    for (std::size_t j = 0; j < x.size(); ++j)
        x.values[j] = sens.values[j] > 0.0 ? 1.0 : 0.0;
    return x;
}

inline std::pair<Image, ReconTrace> em_reconstruct(const Measurement& m, const Geometry& g,
                                                   int iterations, int trace_stride = 1) {
    if (iterations < 1) throw std::invalid_argument("em_reconstruct: iterations must be >= 1");
    Image sens = sensitivity(g);
    Image x = uniform_fov_start(g, sens);
    ReconTrace trace;
    trace.iterations.push_back({x, poisson_nll(x, m, g), 0.0, 0.0, 0.0, poisson_nll(x, m, g)});
    for (int n = 0; n < iterations; ++n) {
        x = em_step(x, m, g, sens);
        if ((n + 1) % trace_stride == 0 || n + 1 == iterations) {
            const double f = poisson_nll(x, m, g);
            trace.iterations.push_back({x, f, 0.0, 0.0, 0.0, f});
        }
    }
    return {x, trace};
}

/// Unrolled reconstruction alternating the trained stage denoiser with T'
/// penalized EM updates; x^(0) from n_em_init plain EM iterations.
inline std::pair<Image, ReconTrace> bcd_net_reconstruct(const Measurement& m, const Geometry& g,
                                                        const CidModel& model,
                                                        const ReconConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(model.stages.size()) < cfg.outer_iterations)
        throw std::invalid_argument("bcd_net_reconstruct: model has fewer stages than T");
    require_measurement_conforms(m, g);

    Image sens = sensitivity(g);
    Image x = uniform_fov_start(g, sens);
    for (int n = 0; n < cfg.n_em_init; ++n) x = em_step(x, m, g, sens);

    ReconTrace trace;
    trace.iterations.push_back({x, poisson_nll(x, m, g), 0.0, 0.0, 0.0, poisson_nll(x, m, g)});

    double beta_prev = cfg.beta_fixed.value_or(0.0);
    for (int n = 0; n < cfg.outer_iterations; ++n) {
        Image u = cid_forward(normalize_g1(x), model.stages[n]);
        for (double& v : u.values) v = std::max(v, 0.0); // x-update needs a feasible target
        ScaleResult scaled = scale_g2(u, m, g);
        if (n == 0) {
            trace.one_shot_denoised = scaled.scaled;
            trace.has_one_shot = true;
        }

        double beta;
        if (cfg.beta_fixed) {
            beta = *cfg.beta_fixed;
        } else {
            try {
                beta = adaptive_beta(x, scaled.scaled, m, g, sens, cfg.balance_c);
            } catch (const std::domain_error&) {
                beta = beta_prev;
            }
            if (beta <= 0.0) beta = beta_prev > 0.0 ? beta_prev : 1e-12;
        }
        beta_prev = beta;

        for (int inner = 0; inner < cfg.inner_iterations; ++inner)
            x = map_em_step(x, scaled.scaled, beta, m, g, sens);

        const double f = poisson_nll(x, m, g);
        trace.iterations.push_back({x, f, beta, 0.0, 0.0, f});
    }
    return {x, trace};
}

} // namespace emrec

#endif
