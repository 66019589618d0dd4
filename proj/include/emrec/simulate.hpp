#ifndef EMREC_SIMULATE_HPP
#define EMREC_SIMULATE_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "emrec/geometry.hpp"
#include "emrec/phantom.hpp"
#include "emrec/projector.hpp"
#include "emrec/rng.hpp"

namespace emrec {

struct ScenarioSpec {
    PhantomSpec phantom;
    double total_net_trues = 1.0;
    double random_fraction = 0.0; // randoms / (randoms + trues), in [0, 1)
    int n_realizations = 1;
    std::uint64_t seed = 0;
};

/// Counts y with known mean background r_bar, both of length n_rays.
struct Measurement {
    int n_angles = 0;
    int n_bins = 0;
    std::vector<std::int64_t> y;
    std::vector<double> r_bar;

    bool conforms(const Geometry& g) const {
        return n_angles == g.n_angles && n_bins == g.n_bins &&
               y.size() == g.n_rays() && r_bar.size() == g.n_rays();
    }
};

struct SimulationResult {
    Image scaled_truth;   // rescaled so sum(A x_true) = total_net_trues
    Sinogram trues;       // A x_true after rescaling
    std::vector<Measurement> realizations;
    double scale = 1.0;   // factor applied to the phantom activity
};

/// Rescales the truth so the expected trues hit the requested total, sets a
/// spatially uniform background with sum = trues * RF/(1-RF), then draws M
/// independent Poisson realizations with per-realization derived seeds.
inline SimulationResult simulate_measurement(const Image& x_true, const Geometry& g,
                                             const ScenarioSpec& s) {
    require_image_conforms(x_true, g);
    if (s.total_net_trues <= 0.0)
        throw std::invalid_argument("simulate_measurement: total_net_trues must be > 0");
    if (s.random_fraction < 0.0 || s.random_fraction >= 1.0)
        throw std::invalid_argument("simulate_measurement: random_fraction must be in [0,1)");
    if (s.n_realizations < 1)
        throw std::invalid_argument("simulate_measurement: n_realizations must be >= 1");

    Sinogram t = forward_project(x_true, g);
    double total = 0.0;
    for (double v : t.values) total += v;
    if (total <= 0.0)
        throw std::invalid_argument("simulate_measurement: phantom projects to zero counts");

    SimulationResult out;
    out.scale = s.total_net_trues / total;
    out.scaled_truth = x_true;
    for (double& v : out.scaled_truth.values) v *= out.scale;
    out.trues = t;
    for (double& v : out.trues.values) v *= out.scale;

    const double total_randoms = s.total_net_trues * s.random_fraction / (1.0 - s.random_fraction);
    const double r_per_ray = total_randoms / static_cast<double>(g.n_rays());

    out.realizations.reserve(s.n_realizations);
    for (int m = 0; m < s.n_realizations; ++m) {
        Measurement meas;
        meas.n_angles = g.n_angles;
        meas.n_bins = g.n_bins;
        meas.r_bar.assign(g.n_rays(), r_per_ray);
        meas.y.resize(g.n_rays());
        auto rng = make_rng(s.seed, "poisson-realization", static_cast<std::uint64_t>(m));
        for (std::size_t i = 0; i < g.n_rays(); ++i) {
            const double mean = out.trues.values[i] + r_per_ray;
            if (mean <= 0.0) {
                meas.y[i] = 0;
            } else {
                std::poisson_distribution<std::int64_t> dist(mean);
                meas.y[i] = dist(rng);
            }
        }
        out.realizations.push_back(std::move(meas));
    }
    return out;
}

} // namespace emrec

#endif
