#ifndef EMREC_METRICS_HPP
#define EMREC_METRICS_HPP

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emrec/geometry.hpp"
#include "emrec/phantom.hpp"

namespace emrec {

enum class CrKind { cold, hot };

inline double mask_mean(const Image& x, const std::vector<std::size_t>& mask) {
    if (mask.empty()) throw std::invalid_argument("metrics: empty mask");
    double acc = 0.0;
    for (std::size_t j : mask) acc += x.values[j];
    return acc / static_cast<double>(mask.size());
}

inline double mask_std(const Image& x, const std::vector<std::size_t>& mask) {
    if (mask.size() < 2) throw std::invalid_argument("metrics: mask needs >= 2 voxels");
    const double mean = mask_mean(x, mask);
    double acc = 0.0;
    for (std::size_t j : mask) {
        const double d = x.values[j] - mean;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(mask.size() - 1));
}

/// Cold: (1 - C_VOI/C_BKG) * 100. Hot: (C_VOI/C_BKG - 1)/(R_True - 1) * 100.
inline double contrast_recovery(const Image& x, const std::vector<std::size_t>& voi,
                                const std::vector<std::size_t>& background, CrKind kind,
                                double true_ratio = 0.0) {
    const double c_voi = mask_mean(x, voi);
    const double c_bkg = mask_mean(x, background);
    if (c_bkg == 0.0) throw std::domain_error("contrast_recovery: zero background mean");
    if (kind == CrKind::cold) return (1.0 - c_voi / c_bkg) * 100.0;
    if (true_ratio == 1.0) throw std::domain_error("contrast_recovery: R_True must differ from 1");
    return (c_voi / c_bkg - 1.0) / (true_ratio - 1.0) * 100.0;
}

/// RMS over liver voxels of the per-voxel (M-1)-normalized std across
/// realizations, divided by the true liver mean, * 100.
inline double noise_across_realizations(const std::vector<Image>& recons, const Image& truth,
                                        const std::vector<std::size_t>& liver) {
    const std::size_t m = recons.size();
    if (m < 2) throw std::invalid_argument("noise: needs M >= 2 realizations");
    if (liver.empty()) throw std::invalid_argument("noise: empty liver mask");
    double var_acc = 0.0;
    for (std::size_t j : liver) {
        double mean = 0.0;
        for (const auto& r : recons) mean += r.values[j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (const auto& r : recons) {
            const double d = r.values[j] - mean;
            var += d * d;
        }
        var_acc += var / static_cast<double>(m - 1);
    }
    const double rms = std::sqrt(var_acc / static_cast<double>(liver.size()));
    const double true_mean = mask_mean(truth, liver);
    if (true_mean == 0.0) throw std::domain_error("noise: zero true liver mean");
    return rms / true_mean * 100.0;
}

/// sqrt(sum over FOV of (x_true - x_hat)^2 / J_FOV) * 100, on raw activity.
inline double rmse(const Image& x_hat, const Image& x_true, const std::vector<std::size_t>& fov) {
    if (fov.empty()) throw std::invalid_argument("rmse: empty FOV mask");
    double acc = 0.0;
    for (std::size_t j : fov) {
        const double d = x_true.values[j] - x_hat.values[j];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(fov.size())) * 100.0;
}

/// (C_Lesion - C_BKG) / STD_BKG on a single image.
inline double cnr(const Image& x, const std::vector<std::size_t>& lesion,
                  const std::vector<std::size_t>& background) {
    const double sd = mask_std(x, background);
    if (sd == 0.0) throw std::domain_error("cnr: zero background std");
    return (mask_mean(x, lesion) - mask_mean(x, background)) / sd;
}

/// (sum x_hat - sum x_true) / sum x_true * 100 over the FOV.
inline double fov_bias(const Image& x_hat, const Image& x_true,
                       const std::vector<std::size_t>& fov) {
    if (fov.empty()) throw std::invalid_argument("fov_bias: empty FOV mask");
    double num = 0.0, den = 0.0;
    for (std::size_t j : fov) {
        num += x_hat.values[j] - x_true.values[j];
        den += x_true.values[j];
    }
    if (den <= 0.0) throw std::domain_error("fov_bias: zero-truth FOV");
    return num / den * 100.0;
}

struct MetricsReport {
    std::optional<double> cr_cold;
    std::optional<double> cr_hot;
    std::optional<double> noise;
    std::optional<double> rmse;
    std::optional<double> cnr;
    std::optional<double> fov_bias;
};

/// Computes whatever the provided masks allow. Expected labels: "fov",
/// "background" (uniform liver), optional "cold", "hot", "lesion".
inline MetricsReport evaluate_image(const Image& x_hat, const Image& truth,
                                    const RegionMasks& masks, double true_ratio) {
    MetricsReport rep;
    auto find = [&](const std::string& k) -> const std::vector<std::size_t>* {
        auto it = masks.find(k);
        return it == masks.end() ? nullptr : &it->second;
    };
    const auto* fov = find("fov");
    const auto* bkg = find("background");
    if (fov) {
        rep.rmse = rmse(x_hat, truth, *fov);
        rep.fov_bias = fov_bias(x_hat, truth, *fov);
    }
    if (bkg) {
        // degenerate inputs (flat background, zero mean) leave the field unset
        auto guarded = [](auto&& compute) -> std::optional<double> {
            try {
                return compute();
            } catch (const std::domain_error&) {
                return std::nullopt;
            }
        };
        if (const auto* cold = find("cold"))
            rep.cr_cold = guarded([&] { return contrast_recovery(x_hat, *cold, *bkg, CrKind::cold); });
        if (const auto* hot = find("hot"))
            rep.cr_hot =
                guarded([&] { return contrast_recovery(x_hat, *hot, *bkg, CrKind::hot, true_ratio); });
        if (const auto* lesion = find("lesion"))
            rep.cnr = guarded([&] { return cnr(x_hat, *lesion, *bkg); });
        else if (const auto* hot = find("hot"))
            rep.cnr = guarded([&] { return cnr(x_hat, *hot, *bkg); });
    }
    return rep;
}

} // namespace emrec

#endif
