#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "emrec/projector.hpp"
#include "oracles.hpp"

using namespace emrec;

namespace {

Image random_image(const Geometry& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Image x(g);
    for (double& v : x.values) v = dist(rng);
    return x;
}

Sinogram random_sinogram(const Geometry& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Sinogram s(g);
    for (double& v : s.values) v = dist(rng);
    return s;
}

} // namespace

TEST_CASE("forward projection of zeros is zero") {
    Geometry g{5, 5, 1.0, 4, 7, 1.0};
    Sinogram s = forward_project(Image(g), g);
    for (double v : s.values) CHECK(v == 0.0);
}

TEST_CASE("impulse footprint mass matches hand-computed weights on a 5x5 grid") {
    Geometry g{5, 5, 1.0, 1, 7, 1.0};
    Image x(g);
    x(2, 2) = 1.0; // center voxel
    Sinogram s = forward_project(x, g);
    // Center voxel lies at detector coordinate 0, i.e. exactly at the center
    // bin; the bilinear split is (1, 0) and the footprint weight is voxel_size.
    double total = 0.0;
    for (double v : s.values) total += v;
    CHECK(total == Catch::Approx(1.0).margin(1e-14));
    CHECK(s.values[3] == Catch::Approx(1.0).margin(1e-14)); // center bin of 7
    // mass concentrated in center bins
    CHECK(s.values[0] == 0.0);
    CHECK(s.values[6] == 0.0);
}

TEST_CASE("forward projection is linear") {
    Geometry g{9, 9, 0.7, 6, 13, 0.8};
    std::mt19937_64 rng(7);
    Image x = random_image(g, rng);
    Image z = random_image(g, rng);
    Image combo(g);
    for (std::size_t j = 0; j < combo.size(); ++j)
        combo.values[j] = 2.5 * x.values[j] - 0.5 * z.values[j];
    Sinogram sx = forward_project(x, g);
    Sinogram sz = forward_project(z, g);
    Sinogram sc = forward_project(combo, g);
    for (std::size_t i = 0; i < sc.size(); ++i)
        CHECK(sc.values[i] == Catch::Approx(2.5 * sx.values[i] - 0.5 * sz.values[i]).margin(1e-12));
}

TEST_CASE("adjoint identity over random pairs") {
    Geometry g{16, 16, 1.0, 12, 23, 1.0};
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        Image x = random_image(g, rng);
        Sinogram s = random_sinogram(g, rng);
        Sinogram ax = forward_project(x, g);
        Image ats = back_project(s, g);
        const double lhs = oracles::dot(ax.values, s.values);
        const double rhs = oracles::dot(x.values, ats.values);
        const double scale = oracles::norm2(ax.values) * oracles::norm2(s.values);
        REQUIRE(scale > 0.0);
        CHECK(std::abs(lhs - rhs) / scale < 1e-10);
    }
}

TEST_CASE("matrix-free operators match the explicit sparse build") {
    Geometry g{8, 8, 1.0, 5, 11, 1.2};
    oracles::DenseSystem dense(g);
    std::mt19937_64 rng(3);
    Image x = random_image(g, rng);
    Sinogram s = random_sinogram(g, rng);

    Sinogram ax = forward_project(x, g);
    auto ax_dense = dense.forward(x.values);
    for (std::size_t i = 0; i < ax.size(); ++i)
        CHECK(ax.values[i] == Catch::Approx(ax_dense[i]).margin(1e-12));

    Image ats = back_project(s, g);
    auto ats_dense = dense.adjoint(s.values);
    for (std::size_t j = 0; j < ats.size(); ++j)
        CHECK(ats.values[j] == Catch::Approx(ats_dense[j]).margin(1e-12));
}

TEST_CASE("back projection of an impulse projection peaks at the impulse") {
    Geometry g{9, 9, 1.0, 16, 15, 1.0};
    Image x(g);
    x(4, 4) = 1.0;
    Image bp = back_project(forward_project(x, g), g);
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < bp.size(); ++j)
        if (bp.values[j] > bp.values[argmax]) argmax = j;
    CHECK(argmax == 4u * 9u + 4u);
}

TEST_CASE("sensitivity equals back projection of ones and is positive in the FOV") {
    Geometry g{16, 16, 1.0, 24, 23, 1.0};
    Image sens = sensitivity(g);
    Image bp = back_project(Sinogram(g, 1.0), g);
    for (std::size_t j = 0; j < sens.size(); ++j) {
        CHECK(sens.values[j] == bp.values[j]);
        CHECK(sens.values[j] >= 0.0);
    }
    // interior voxels see every angle
    for (int iy = 4; iy < 12; ++iy)
        for (int ix = 4; ix < 12; ++ix) CHECK(sens(ix, iy) > 0.0);
}

TEST_CASE("doubling the angle count roughly doubles interior sensitivity") {
    Geometry g1{16, 16, 1.0, 20, 23, 1.0};
    Geometry g2 = g1;
    g2.n_angles = 40;
    Image s1 = sensitivity(g1);
    Image s2 = sensitivity(g2);
    for (int iy = 6; iy < 10; ++iy)
        for (int ix = 6; ix < 10; ++ix) {
            const double ratio = s2(ix, iy) / s1(ix, iy);
            CHECK(ratio == Catch::Approx(2.0).epsilon(0.05));
        }
}

TEST_CASE("nonnegativity preservation") {
    Geometry g{12, 12, 1.0, 8, 17, 1.0};
    std::mt19937_64 rng(11);
    Image x = random_image(g, rng);
    for (double v : forward_project(x, g).values) CHECK(v >= 0.0);
    Sinogram s = random_sinogram(g, rng);
    for (double v : back_project(s, g).values) CHECK(v >= 0.0);
}

TEST_CASE("projection is deterministic across calls") {
    Geometry g{10, 10, 1.0, 9, 13, 1.0};
    std::mt19937_64 rng(5);
    Image x = random_image(g, rng);
    Sinogram a = forward_project(x, g);
    Sinogram b = forward_project(x, g);
    CHECK(a.values == b.values);
}

TEST_CASE("dimension mismatch is rejected") {
    Geometry g{5, 5, 1.0, 4, 7, 1.0};
    CHECK_THROWS_AS(forward_project(Image(4, 4), g), std::invalid_argument);
    CHECK_THROWS_AS(back_project(Sinogram(4, 4), g), std::invalid_argument);
}
