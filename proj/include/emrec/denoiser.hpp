#ifndef EMREC_DENOISER_HPP
#define EMREC_DENOISER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "emrec/conv.hpp"
#include "emrec/geometry.hpp"
#include "emrec/rng.hpp"

namespace emrec {

/// T(t, q)_j = sign(t_j) * max(|t_j| - q, 0), elementwise.
inline double soft_threshold(double t, double q) {
    if (q < 0.0) throw std::invalid_argument("soft_threshold: threshold must be >= 0");
    const double m = std::abs(t) - q;
    return m > 0.0 ? (t > 0.0 ? m : -m) : 0.0;
}

inline std::vector<double> soft_threshold(const std::vector<double>& t, double q) {
    if (q < 0.0) throw std::invalid_argument("soft_threshold: threshold must be >= 0");
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = soft_threshold(t[i], q);
    return out;
}

/// One denoising stage: encode filters c_k, decode filters d_k, thresholds alpha_k.
struct CidStageParams {
    int filter_count = 0; // K
    int filter_side = 3;  // square support side, odd
    std::vector<Filter> encode;
    std::vector<Filter> decode;
    std::vector<double> alpha;

    CidStageParams() = default;
    CidStageParams(int k, int side)
        : filter_count(k), filter_side(side),
          encode(k, Filter(side)), decode(k, Filter(side)), alpha(k, 0.0) {}

    void validate() const {
        if (filter_count < 1) throw std::invalid_argument("CidStageParams: K must be >= 1");
        if (static_cast<int>(encode.size()) != filter_count ||
            static_cast<int>(decode.size()) != filter_count ||
            static_cast<int>(alpha.size()) != filter_count)
            throw std::invalid_argument("CidStageParams: inconsistent K");
        for (int k = 0; k < filter_count; ++k) {
            if (encode[k].side != filter_side || decode[k].side != filter_side)
                throw std::invalid_argument("CidStageParams: inconsistent filter support");
            if (alpha[k] < 0.0)
                throw std::invalid_argument("CidStageParams: thresholds must be >= 0");
        }
    }
};

struct LossCurve {
    std::vector<double> per_epoch;
};

/// Stage n (0-based) is the denoiser applied at outer iteration n+1.
struct CidModel {
    std::vector<CidStageParams> stages;
    std::vector<LossCurve> training_loss; // one curve per trained stage
    std::uint64_t training_seed = 0;
};

/// u = sum_k d_k * T(c_k * x, alpha_k); output may contain negatives.
inline Image cid_forward(const Image& x, const CidStageParams& p) {
    p.validate();
    Image u(x.n_x, x.n_y);
    for (int k = 0; k < p.filter_count; ++k) {
        Image code = conv2_same(x, p.encode[k]);
        for (double& v : code.values) v = soft_threshold(v, p.alpha[k]);
        Image dec = conv2_same(code, p.decode[k]);
        for (std::size_t j = 0; j < u.size(); ++j) u.values[j] += dec.values[j];
    }
    return u;
}

struct CidGradients {
    std::vector<Filter> encode;
    std::vector<Filter> decode;
    std::vector<double> alpha;
};

struct TrainingPair {
    Image input;     // reconstruction-module output, already g1-normalized
    Image reference; // truth, already g1-normalized
};

/// Squared-error loss over pairs with analytic gradients via the chain rule.
/// The threshold subgradient at |code| == alpha is taken as 0.
inline double cid_loss_and_grad(const CidStageParams& p, const std::vector<TrainingPair>& pairs,
                                CidGradients& grad) {
    p.validate();
    if (pairs.empty()) throw std::invalid_argument("cid_loss_and_grad: no training pairs");

    grad.encode.assign(p.filter_count, Filter(p.filter_side));
    grad.decode.assign(p.filter_count, Filter(p.filter_side));
    grad.alpha.assign(p.filter_count, 0.0);

    double loss = 0.0;
    for (const auto& pair : pairs) {
        if (pair.input.n_x != pair.reference.n_x || pair.input.n_y != pair.reference.n_y)
            throw std::invalid_argument("cid_loss_and_grad: mismatched pair sizes");

        std::vector<Image> codes(p.filter_count);
        std::vector<Image> sparse(p.filter_count);
        Image u(pair.input.n_x, pair.input.n_y);
        for (int k = 0; k < p.filter_count; ++k) {
            codes[k] = conv2_same(pair.input, p.encode[k]);
            sparse[k] = codes[k];
            for (double& v : sparse[k].values) v = soft_threshold(v, p.alpha[k]);
            Image dec = conv2_same(sparse[k], p.decode[k]);
            for (std::size_t j = 0; j < u.size(); ++j) u.values[j] += dec.values[j];
        }

        // residual r = 2 (u - ref) is dLoss/du for loss = ||ref - u||^2
        Image r(u.n_x, u.n_y);
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double e = u.values[j] - pair.reference.values[j];
            loss += e * e;
            r.values[j] = 2.0 * e;
        }

        for (int k = 0; k < p.filter_count; ++k) {
            Filter gd = conv2_tap_gradient(r, sparse[k], p.filter_side);
            for (std::size_t t = 0; t < gd.taps.size(); ++t) grad.decode[k].taps[t] += gd.taps[t];

            // back through decode, then the active-set mask of the threshold
            Image gk = conv2_same_adjoint(r, p.decode[k]);
            Image hk(gk.n_x, gk.n_y);
            double ga = 0.0;
            for (std::size_t j = 0; j < gk.size(); ++j) {
                const double z = codes[k].values[j];
                if (std::abs(z) > p.alpha[k]) {
                    hk.values[j] = gk.values[j];
                    ga -= gk.values[j] * (z > 0.0 ? 1.0 : -1.0);
                }
            }
            grad.alpha[k] += ga;

            Filter gc = conv2_tap_gradient(hk, pair.input, p.filter_side);
            for (std::size_t t = 0; t < gc.taps.size(); ++t) grad.encode[k].taps[t] += gc.taps[t];
        }
    }
    return loss;
}

inline double cid_loss(const CidStageParams& p, const std::vector<TrainingPair>& pairs) {
    double loss = 0.0;
    for (const auto& pair : pairs) {
        Image u = cid_forward(pair.input, p);
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double e = u.values[j] - pair.reference.values[j];
            loss += e * e;
        }
    }
    return loss;
}

enum class TrainLoss { l2, l1 };

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 5e-3;
    double lr_decay = 0.99; // multiplicative per epoch
    int batch_size = 1;
    std::uint64_t seed = 0;
    TrainLoss loss = TrainLoss::l2;
};

namespace detail {

// l1 variant of the loss/grad; diagnostic only.
inline double cid_loss_and_grad_l1(const CidStageParams& p, const std::vector<TrainingPair>& pairs,
                                   CidGradients& grad) {
    grad.encode.assign(p.filter_count, Filter(p.filter_side));
    grad.decode.assign(p.filter_count, Filter(p.filter_side));
    grad.alpha.assign(p.filter_count, 0.0);
    double loss = 0.0;
    for (const auto& pair : pairs) {
        std::vector<Image> codes(p.filter_count);
        std::vector<Image> sparse(p.filter_count);
        Image u(pair.input.n_x, pair.input.n_y);
        for (int k = 0; k < p.filter_count; ++k) {
            codes[k] = conv2_same(pair.input, p.encode[k]);
            sparse[k] = codes[k];
            for (double& v : sparse[k].values) v = soft_threshold(v, p.alpha[k]);
            Image dec = conv2_same(sparse[k], p.decode[k]);
            for (std::size_t j = 0; j < u.size(); ++j) u.values[j] += dec.values[j];
        }
        Image r(u.n_x, u.n_y);
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double e = u.values[j] - pair.reference.values[j];
            loss += std::abs(e);
            r.values[j] = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
        }
        for (int k = 0; k < p.filter_count; ++k) {
            Filter gd = conv2_tap_gradient(r, sparse[k], p.filter_side);
            for (std::size_t t = 0; t < gd.taps.size(); ++t) grad.decode[k].taps[t] += gd.taps[t];
            Image gk = conv2_same_adjoint(r, p.decode[k]);
            Image hk(gk.n_x, gk.n_y);
            double ga = 0.0;
            for (std::size_t j = 0; j < gk.size(); ++j) {
                const double z = codes[k].values[j];
                if (std::abs(z) > p.alpha[k]) {
                    hk.values[j] = gk.values[j];
                    ga -= gk.values[j] * (z > 0.0 ? 1.0 : -1.0);
                }
            }
            grad.alpha[k] += ga;
            Filter gc = conv2_tap_gradient(hk, pair.input, p.filter_side);
            for (std::size_t t = 0; t < gc.taps.size(); ++t) grad.encode[k].taps[t] += gc.taps[t];
        }
    }
    return loss;
}

struct AdamState {
    std::vector<double> m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::int64_t t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    // lr_scale lets parameter blocks with very different natural magnitudes
    // (unit-norm taps vs data-scale thresholds) share one base rate.
    void step(std::vector<double>& x, const std::vector<double>& g, double lr,
              const std::vector<double>& lr_scale) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            x[i] -= lr * lr_scale[i] * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

inline std::vector<double> flatten(const CidStageParams& p) {
    std::vector<double> x;
    for (const auto& f : p.encode) x.insert(x.end(), f.taps.begin(), f.taps.end());
    for (const auto& f : p.decode) x.insert(x.end(), f.taps.begin(), f.taps.end());
    x.insert(x.end(), p.alpha.begin(), p.alpha.end());
    return x;
}

inline std::vector<double> flatten(const CidGradients& g, int side) {
    std::vector<double> x;
    for (const auto& f : g.encode) x.insert(x.end(), f.taps.begin(), f.taps.end());
    for (const auto& f : g.decode) x.insert(x.end(), f.taps.begin(), f.taps.end());
    x.insert(x.end(), g.alpha.begin(), g.alpha.end());
    (void)side;
    return x;
}

inline void unflatten(const std::vector<double>& x, CidStageParams& p) {
    std::size_t i = 0;
    const std::size_t taps = static_cast<std::size_t>(p.filter_side) * p.filter_side;
    for (auto& f : p.encode)
        for (std::size_t t = 0; t < taps; ++t) f.taps[t] = x[i++];
    for (auto& f : p.decode)
        for (std::size_t t = 0; t < taps; ++t) f.taps[t] = x[i++];
    for (auto& a : p.alpha) a = std::max(x[i++], 0.0); // keep thresholds nonnegative
}

} // namespace detail

/// Filters drawn zero-mean and scaled to unit norm; each threshold starts at
/// the 10th percentile of that filter's code magnitudes on the initial image.
inline CidStageParams init_stage(const Image& x_init, int filter_count, int filter_side,
                                 std::uint64_t seed) {
    CidStageParams p(filter_count, filter_side);
    auto rng = make_rng(seed, "cid-init");
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Filter& f) {
        double norm2 = 0.0;
        for (double& t : f.taps) {
            t = normal(rng);
            norm2 += t * t;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& t : f.taps) t *= inv;
    };
    for (auto& f : p.encode) draw(f);
    for (auto& f : p.decode) draw(f);

    // Per-filter threshold at the 10th percentile of the initial code
    // magnitudes: only the weakest tenth starts zeroed, so the thresholds are
    // on the scale of the data the stage actually sees and training cannot
    // begin in (or easily fall into) the all-dead regime.
    for (int k = 0; k < filter_count; ++k) {
        Image code = conv2_same(x_init, p.encode[k]);
        std::vector<double> mags(code.values.size());
        for (std::size_t j = 0; j < mags.size(); ++j) mags[j] = std::abs(code.values[j]);
        std::sort(mags.begin(), mags.end());
        const std::size_t rank = static_cast<std::size_t>(
            0.1 * static_cast<double>(mags.size()));
        p.alpha[k] = mags.empty() ? 0.0 : mags[std::min(rank, mags.size() - 1)];
    }
    return p;
}

/// Adam over the stage parameters; thresholds projected to >= 0 each step.
inline CidStageParams train_stage(CidStageParams p, const std::vector<TrainingPair>& pairs,
                                  const TrainConfig& cfg, LossCurve* curve = nullptr) {
    if (pairs.empty()) throw std::invalid_argument("train_stage: no training pairs");
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train_stage: learning_rate must be > 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_stage: batch_size must be >= 1");
    p.validate();

    std::vector<double> x = detail::flatten(p);
    detail::AdamState adam(x.size());

    // Thresholds live on the code scale (tiny for sum-normalized images);
    // take Adam steps for them relative to their initial magnitude so a
    // single step cannot jump past every code and kill the whole stage.
    std::vector<double> lr_scale(x.size(), 1.0);
    {
        double mean_alpha = 0.0;
        for (double a : p.alpha) mean_alpha += a;
        mean_alpha /= static_cast<double>(p.alpha.size());
        if (mean_alpha <= 0.0) mean_alpha = 1.0;
        const std::size_t alpha_off = x.size() - p.alpha.size();
        for (std::size_t k = 0; k < p.alpha.size(); ++k)
            lr_scale[alpha_off + k] = p.alpha[k] > 0.0 ? p.alpha[k] : mean_alpha;
    }
    auto rng = make_rng(cfg.seed, "cid-train-order");
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double lr = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            std::vector<TrainingPair> batch;
            for (std::size_t i = b; i < std::min(b + cfg.batch_size, order.size()); ++i)
                batch.push_back(pairs[order[i]]);
            CidGradients grad;
            const double loss = cfg.loss == TrainLoss::l2
                                    ? cid_loss_and_grad(p, batch, grad)
                                    : detail::cid_loss_and_grad_l1(p, batch, grad);
            epoch_loss += loss;
            adam.step(x, detail::flatten(grad, p.filter_side), lr, lr_scale);
            detail::unflatten(x, p);
            x = detail::flatten(p); // re-sync after the alpha projection
        }
        if (curve) curve->per_epoch.push_back(epoch_loss);
        lr *= cfg.lr_decay;
    }
    return p;
}

} // namespace emrec

#endif
