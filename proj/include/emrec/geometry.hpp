#ifndef EMREC_GEOMETRY_HPP
#define EMREC_GEOMETRY_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace emrec {

/// 2-D parallel-beam acquisition geometry. Angles are uniform over [0, pi),
/// the detector is centered on the grid center.
struct Geometry {
    int n_x = 1;
    int n_y = 1;
    double voxel_size = 1.0;
    int n_angles = 1;
    int n_bins = 1;
    double bin_width = 1.0;

    std::size_t n_voxels() const { return static_cast<std::size_t>(n_x) * n_y; }
    std::size_t n_rays() const { return static_cast<std::size_t>(n_angles) * n_bins; }

    void validate() const {
        if (n_x < 1 || n_y < 1 || n_angles < 1 || n_bins < 1)
            throw std::invalid_argument("Geometry: counts must be >= 1");
        if (voxel_size <= 0.0 || bin_width <= 0.0)
            throw std::invalid_argument("Geometry: sizes must be > 0");
    }

    bool operator==(const Geometry&) const = default;
};

/// Voxel grid in activity units. Reconstruction estimates keep values >= 0.
struct Image {
    int n_x = 0;
    int n_y = 0;
    std::vector<double> values;

    Image() = default;
    Image(int nx, int ny, double fill = 0.0)
        : n_x(nx), n_y(ny), values(static_cast<std::size_t>(nx) * ny, fill) {}
    explicit Image(const Geometry& g, double fill = 0.0) : Image(g.n_x, g.n_y, fill) {}

    std::size_t size() const { return values.size(); }
    double& operator()(int ix, int iy) { return values[static_cast<std::size_t>(iy) * n_x + ix]; }
    double operator()(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * n_x + ix]; }

    bool conforms(const Geometry& g) const {
        return n_x == g.n_x && n_y == g.n_y && values.size() == g.n_voxels();
    }
};

/// Per-ray data ordered angle-major: index = angle * n_bins + bin.
struct Sinogram {
    int n_angles = 0;
    int n_bins = 0;
    std::vector<double> values;

    Sinogram() = default;
    Sinogram(int na, int nb, double fill = 0.0)
        : n_angles(na), n_bins(nb), values(static_cast<std::size_t>(na) * nb, fill) {}
    explicit Sinogram(const Geometry& g, double fill = 0.0) : Sinogram(g.n_angles, g.n_bins, fill) {}

    std::size_t size() const { return values.size(); }

    bool conforms(const Geometry& g) const {
        return n_angles == g.n_angles && n_bins == g.n_bins && values.size() == g.n_rays();
    }
};

inline void require_image_conforms(const Image& x, const Geometry& g) {
    if (!x.conforms(g)) throw std::invalid_argument("image does not match geometry");
}

inline void require_sinogram_conforms(const Sinogram& s, const Geometry& g) {
    if (!s.conforms(g)) throw std::invalid_argument("sinogram does not match geometry");
}

} // namespace emrec

#endif
