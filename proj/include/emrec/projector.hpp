#ifndef EMREC_PROJECTOR_HPP
#define EMREC_PROJECTOR_HPP

#include <cmath>
#include <numbers>
#include <ostream>
#include <vector>

#include "emrec/geometry.hpp"

namespace emrec {

// Pixel-driven parallel-beam projector with bilinear detector-bin
// interpolation. Forward and backward share one weight enumeration, so the
// adjoint identity holds to rounding. No attenuation/normalization/PSF;
// extend by wrapping forward_project/back_project with per-ray factors.

namespace detail {

// Enumerates (ray, voxel, weight) for one angle and calls f(ray_idx, voxel_idx, w).
template <typename F>
inline void for_each_weight(const Geometry& g, int angle, F&& f) {
    const double theta = std::numbers::pi * angle / g.n_angles;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cx = 0.5 * (g.n_x - 1), cy = 0.5 * (g.n_y - 1);
    const double bin_center = 0.5 * (g.n_bins - 1);
    const std::size_t ray0 = static_cast<std::size_t>(angle) * g.n_bins;
    // Ray integral footprint of one pixel along the detector.
    const double footprint = g.voxel_size;
    for (int iy = 0; iy < g.n_y; ++iy) {
        for (int ix = 0; ix < g.n_x; ++ix) {
            const double px = (ix - cx) * g.voxel_size;
            const double py = (iy - cy) * g.voxel_size;
            const double s = px * ct + py * st;
            const double t = s / g.bin_width + bin_center;
            const int b0 = static_cast<int>(std::floor(t));
            const double w1 = t - b0;
            const std::size_t j = static_cast<std::size_t>(iy) * g.n_x + ix;
            if (b0 >= 0 && b0 < g.n_bins)
                f(ray0 + b0, j, (1.0 - w1) * footprint);
            if (b0 + 1 >= 0 && b0 + 1 < g.n_bins)
                f(ray0 + b0 + 1, j, w1 * footprint);
        }
    }
}

} // namespace detail

inline Sinogram forward_project(const Image& x, const Geometry& g) {
    require_image_conforms(x, g);
    Sinogram s(g);
    for (int a = 0; a < g.n_angles; ++a)
        detail::for_each_weight(g, a, [&](std::size_t i, std::size_t j, double w) {
            s.values[i] += w * x.values[j];
        });
    return s;
}

inline Image back_project(const Sinogram& s, const Geometry& g) {
    require_sinogram_conforms(s, g);
    Image x(g);
    for (int a = 0; a < g.n_angles; ++a)
        detail::for_each_weight(g, a, [&](std::size_t i, std::size_t j, double w) {
            x.values[j] += w * s.values[i];
        });
    return x;
}

/// a_j = sum_i a_ij, i.e. the back projection of an all-ones sinogram.
inline Image sensitivity(const Geometry& g) {
    Sinogram ones(g, 1.0);
    return back_project(ones, g);
}

struct SparseEntry {
    std::size_t row; // ray
    std::size_t col; // voxel
    double weight;
};

/// Explicit COO build of the system matrix; intended for small grids as a
/// cross-check against the matrix-free operators.
inline std::vector<SparseEntry> build_sparse_system(const Geometry& g) {
    std::vector<SparseEntry> entries;
    entries.reserve(g.n_rays() * 2);
    for (int a = 0; a < g.n_angles; ++a)
        detail::for_each_weight(g, a, [&](std::size_t i, std::size_t j, double w) {
            if (w != 0.0) entries.push_back({i, j, w});
        });
    return entries;
}

/// Coordinate-list text dump: "row col weight" per line.
inline void dump_sparse_system(const Geometry& g, std::ostream& os) {
    for (const auto& e : build_sparse_system(g))
        os << e.row << ' ' << e.col << ' ' << e.weight << '\n';
}

} // namespace emrec

#endif
