#ifndef EMREC_TV_PDHG_HPP
#define EMREC_TV_PDHG_HPP

#include <cmath>
#include <iostream>
#include <utility>
#include <vector>

#include "emrec/recon.hpp"

namespace emrec {

// 2-D first-order finite differences, horizontal then vertical stacked.
// Forward differences with zero beyond the last row/column.

struct GradientField {
    Image dx;
    Image dy;
};

inline GradientField finite_diff(const Image& x) {
    GradientField g{Image(x.n_x, x.n_y), Image(x.n_x, x.n_y)};
    for (int y = 0; y < x.n_y; ++y)
        for (int ix = 0; ix < x.n_x; ++ix) {
            if (ix + 1 < x.n_x) g.dx(ix, y) = x(ix + 1, y) - x(ix, y);
            if (y + 1 < x.n_y) g.dy(ix, y) = x(ix, y + 1) - x(ix, y);
        }
    return g;
}

inline Image finite_diff_adjoint(const GradientField& g) {
    Image out(g.dx.n_x, g.dx.n_y);
    for (int y = 0; y < out.n_y; ++y)
        for (int ix = 0; ix < out.n_x; ++ix) {
            double acc = 0.0;
            if (ix + 1 < out.n_x) acc -= g.dx(ix, y);
            if (ix > 0) acc += g.dx(ix - 1, y);
            if (y + 1 < out.n_y) acc -= g.dy(ix, y);
            if (y > 0) acc += g.dy(ix, y - 1);
            out(ix, y) = acc;
        }
    return out;
}

inline double tv_l1(const Image& x) {
    GradientField g = finite_diff(x);
    double acc = 0.0;
    for (double v : g.dx.values) acc += std::abs(v);
    for (double v : g.dy.values) acc += std::abs(v);
    return acc;
}

/// Power-iteration estimate of ||[A; C]|| (largest singular value).
inline double stacked_operator_norm(const Geometry& g, int iterations) {
    Image v(g, 1.0);
    double norm = 1.0;
    for (int it = 0; it < iterations; ++it) {
        Sinogram av = forward_project(v, g);
        GradientField cv = finite_diff(v);
        Image w = back_project(av, g);
        Image cw = finite_diff_adjoint(cv);
        double n2 = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            w.values[j] += cw.values[j];
            n2 += w.values[j] * w.values[j];
        }
        norm = std::sqrt(n2);
        const double inv = 1.0 / norm;
        for (std::size_t j = 0; j < w.size(); ++j) v.values[j] = w.values[j] * inv;
    }
    return std::sqrt(norm); // ||K'K v|| -> lambda_max, singular value is its sqrt
}

/// PDHG on f(x) + beta ||Cx||_1 with x >= 0. The Poisson dual update uses the
/// closed-form prox of the data term's conjugate; the TV dual is clamped to
/// the l-inf ball of radius beta. Warns when sigma * tau * ||K||^2 >= 1.
inline std::pair<Image, ReconTrace> tv_pdhg_reconstruct(const Measurement& m, const Geometry& g,
                                                        const ReconConfig& cfg) {
    cfg.validate();
    require_measurement_conforms(m, g);
    const TvConfig& tv = cfg.tv;
    if (tv.beta < 0.0) throw std::invalid_argument("tv_pdhg: beta must be >= 0");

    const double opnorm = stacked_operator_norm(g, tv.power_iterations);
    const double sigma = tv.sigma.value_or(0.99 / opnorm);
    const double tau = tv.tau.value_or(0.99 / opnorm);
    if (sigma * tau * opnorm * opnorm >= 1.0)
        std::cerr << "tv_pdhg: warning: step sizes violate sigma*tau*||K||^2 < 1, "
                     "iterates may diverge\n";

    Image sens = sensitivity(g);
    Image x = uniform_fov_start(g, sens);
    for (int n = 0; n < cfg.n_em_init; ++n) x = em_step(x, m, g, sens);
    Image x_bar = x;

    Sinogram w1(g);             // dual of the Poisson data term
    GradientField w2{Image(g), Image(g)}; // dual of the TV term

    auto objective = [&](const Image& z) { return poisson_nll(z, m, g) + tv.beta * tv_l1(z); };

    ReconTrace trace;
    trace.iterations.push_back({x, poisson_nll(x, m, g), tv.beta, 0.0, 0.0, objective(x)});

    for (int n = 0; n < cfg.outer_iterations; ++n) {
        // dual update for F1(p) = sum (p + r) - y log(p + r) at q = w1 + sigma A x_bar,
        // via Moreau: prox_{sigma F1*}(q) = q - sigma p*, p* the positive quadratic root.
        Sinogram ax = forward_project(x_bar, g);
        for (std::size_t i = 0; i < ax.size(); ++i) {
            const double q = w1.values[i] + sigma * ax.values[i];
            const double y = static_cast<double>(m.y[i]);
            if (y == 0.0) {
                // the data term is linear in this ray; its conjugate pins w = 1
                w1.values[i] = 1.0;
                continue;
            }
            const double v = q / sigma;
            const double r = m.r_bar[i];
            // sigma p^2 + (1 + sigma r - sigma v) p + (r - y - sigma v r) = 0;
            // the root with p + r > 0 is the larger one.
            const double b = 1.0 + sigma * r - sigma * v;
            const double c = r - y - sigma * v * r;
            const double disc = std::sqrt(std::max(b * b - 4.0 * sigma * c, 0.0));
            const double p = b <= 0.0 ? (-b + disc) / (2.0 * sigma)
                                      : (2.0 * c) / (-b - disc);
            w1.values[i] = q - sigma * p;
        }
        GradientField cx = finite_diff(x_bar);
        auto clamp_ball = [&](Image& w, const Image& c_img) {
            for (std::size_t j = 0; j < w.size(); ++j) {
                double v = w.values[j] + sigma * c_img.values[j];
                if (v > tv.beta) v = tv.beta;
                if (v < -tv.beta) v = -tv.beta;
                w.values[j] = v;
            }
        };
        clamp_ball(w2.dx, cx.dx);
        clamp_ball(w2.dy, cx.dy);

        Image atw = back_project(w1, g);
        Image ctw = finite_diff_adjoint(w2);
        Image x_new(g);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double v = x.values[j] - tau * (atw.values[j] + ctw.values[j]);
            x_new.values[j] = v > 0.0 ? v : 0.0;
        }
        for (std::size_t j = 0; j < x.size(); ++j)
            x_bar.values[j] = 2.0 * x_new.values[j] - x.values[j];
        x = std::move(x_new);

        trace.iterations.push_back({x, poisson_nll(x, m, g), tv.beta, 0.0, 0.0, objective(x)});
    }
    return {x, trace};
}

} // namespace emrec

#endif
