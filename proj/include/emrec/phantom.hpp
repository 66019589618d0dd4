#ifndef EMREC_PHANTOM_HPP
#define EMREC_PHANTOM_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "emrec/geometry.hpp"

namespace emrec {

/// Axis-aligned ellipse in physical coordinates relative to the grid center.
struct Ellipse {
    double cx = 0.0, cy = 0.0;
    double rx = 1.0, ry = 1.0;

    bool contains(double x, double y) const {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        return u * u + v * v <= 1.0;
    }
};

struct PhantomRegion {
    Ellipse shape;
    double level_ratio = 1.0; // relative to background; <1 cold, >1 hot
    std::string label;
};

struct PhantomSpec {
    Geometry geometry;
    Ellipse background;
    double background_level = 1.0;
    std::vector<PhantomRegion> regions;
    std::uint64_t seed = 0;
};

using RegionMasks = std::map<std::string, std::vector<std::size_t>>;

struct Phantom {
    Image truth;
    RegionMasks masks; // per-region labels plus "background" and "fov"
};

/// Paints the background ellipse at background_level and each region at
/// background_level * level_ratio. "fov" is the background support; the
/// "background" mask excludes all region voxels.
inline Phantom make_phantom(const PhantomSpec& spec) {
    const Geometry& g = spec.geometry;
    g.validate();
    if (spec.background_level < 0.0)
        throw std::invalid_argument("make_phantom: background_level must be >= 0");
    for (const auto& r : spec.regions) {
        if (r.level_ratio < 0.0)
            throw std::invalid_argument("make_phantom: level_ratio must be >= 0");
        const Ellipse& e = r.shape;
        const bool inside = spec.background.contains(e.cx - e.rx, e.cy) &&
                            spec.background.contains(e.cx + e.rx, e.cy) &&
                            spec.background.contains(e.cx, e.cy - e.ry) &&
                            spec.background.contains(e.cx, e.cy + e.ry);
        if (!inside)
            throw std::invalid_argument("make_phantom: region '" + r.label +
                                        "' outside background support");
    }

    Phantom out;
    out.truth = Image(g);
    const double cx = 0.5 * (g.n_x - 1), cy = 0.5 * (g.n_y - 1);
    for (int iy = 0; iy < g.n_y; ++iy) {
        for (int ix = 0; ix < g.n_x; ++ix) {
            const double px = (ix - cx) * g.voxel_size;
            const double py = (iy - cy) * g.voxel_size;
            if (!spec.background.contains(px, py)) continue;
            const std::size_t j = static_cast<std::size_t>(iy) * g.n_x + ix;
            out.masks["fov"].push_back(j);
            double value = spec.background_level;
            bool in_region = false;
            for (const auto& r : spec.regions) {
                if (r.shape.contains(px, py)) {
                    value = spec.background_level * r.level_ratio;
                    out.masks[r.label].push_back(j);
                    in_region = true;
                }
            }
            if (!in_region) out.masks["background"].push_back(j);
            out.truth.values[j] = value;
        }
    }
    return out;
}

} // namespace emrec

#endif
