#ifndef EMREC_CONV_HPP
#define EMREC_CONV_HPP

#include <stdexcept>
#include <vector>

#include "emrec/geometry.hpp"

namespace emrec {

/// Square odd-sized filter stored row-major.
struct Filter {
    int side = 1;
    std::vector<double> taps;

    Filter() : taps(1, 0.0) {}
    explicit Filter(int s, double fill = 0.0)
        : side(s), taps(static_cast<std::size_t>(s) * s, fill) {
        if (s < 1 || s % 2 == 0) throw std::invalid_argument("Filter: side must be odd and >= 1");
    }

    double& operator()(int kx, int ky) { return taps[static_cast<std::size_t>(ky) * side + kx]; }
    double operator()(int kx, int ky) const { return taps[static_cast<std::size_t>(ky) * side + kx]; }
};

/// 180-degree tap flip; turns convolution into its adjoint correlation.
inline Filter rotate180(const Filter& f) {
    Filter r(f.side);
    const std::size_t n = f.taps.size();
    for (std::size_t i = 0; i < n; ++i) r.taps[i] = f.taps[n - 1 - i];
    return r;
}

/// Same-size 2-D convolution with zero padding:
/// out[x,y] = sum_{kx,ky} f[kx,ky] * img[x - (kx-h), y - (ky-h)], h = side/2.
inline Image conv2_same(const Image& img, const Filter& f) {
    if (f.side > img.n_x || f.side > img.n_y)
        throw std::invalid_argument("conv2_same: filter larger than image");
    Image out(img.n_x, img.n_y);
    const int h = f.side / 2;
    for (int y = 0; y < img.n_y; ++y) {
        for (int x = 0; x < img.n_x; ++x) {
            double acc = 0.0;
            for (int ky = 0; ky < f.side; ++ky) {
                const int sy = y - (ky - h);
                if (sy < 0 || sy >= img.n_y) continue;
                for (int kx = 0; kx < f.side; ++kx) {
                    const int sx = x - (kx - h);
                    if (sx < 0 || sx >= img.n_x) continue;
                    acc += f(kx, ky) * img(sx, sy);
                }
            }
            out(x, y) = acc;
        }
    }
    return out;
}

/// Adjoint of conv2_same(., f) under zero padding.
inline Image conv2_same_adjoint(const Image& img, const Filter& f) {
    return conv2_same(img, rotate180(f));
}

/// grad[kx,ky] = sum_{x,y} upstream[x,y] * base[x - (kx-h), y - (ky-h)];
/// the gradient of conv2_same(base, f) taps against an upstream image.
inline Filter conv2_tap_gradient(const Image& upstream, const Image& base, int side) {
    Filter grad(side);
    const int h = side / 2;
    for (int ky = 0; ky < side; ++ky) {
        for (int kx = 0; kx < side; ++kx) {
            double acc = 0.0;
            const int dy = ky - h, dx = kx - h;
            for (int y = 0; y < upstream.n_y; ++y) {
                const int sy = y - dy;
                if (sy < 0 || sy >= base.n_y) continue;
                for (int x = 0; x < upstream.n_x; ++x) {
                    const int sx = x - dx;
                    if (sx < 0 || sx >= base.n_x) continue;
                    acc += upstream(x, y) * base(sx, sy);
                }
            }
            grad(kx, ky) = acc;
        }
    }
    return grad;
}

} // namespace emrec

#endif
