#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "linstab/grid.hpp"
#include "linstab/spectral.hpp"

using namespace linstab;
using std::numbers::pi;

namespace {

ComplexGridFunction plane_wave(const Grid& g, Vec2 xi) {
    return sample(g, [&](Vec2 x) { return std::exp(std::complex<double>(0.0, dot(x, xi))); });
}

}  // namespace

TEST(Grid, Spacing) {
    EXPECT_DOUBLE_EQ(Grid(4.0, 32).spacing(), 0.125);
    EXPECT_DOUBLE_EQ(Grid(2 * pi, 16).spacing(), 2 * pi / 16);
}

TEST(Grid, RejectsBadSizes) {
    EXPECT_THROW(Grid(4.0, 7), InvalidParameter);
    EXPECT_THROW(Grid(4.0, 6), InvalidParameter);
    EXPECT_THROW(Grid(0.0, 16), InvalidParameter);
    EXPECT_THROW(Grid(-1.0, 16), InvalidParameter);
}

TEST(Grid, NodeLayoutIsRowMajorFromTheCorner) {
    const Grid g(4.0, 8);
    EXPECT_DOUBLE_EQ(g.node(0).x1, -2.0);
    EXPECT_DOUBLE_EQ(g.node(0).x2, -2.0);
    const Vec2 p = g.node(g.index(3, 5));
    EXPECT_DOUBLE_EQ(p.x1, -2.0 + 3 * 0.5);
    EXPECT_DOUBLE_EQ(p.x2, -2.0 + 5 * 0.5);
    EXPECT_EQ(g.index(3, 5), 3u * 8 + 5);
}

TEST(Grid, DiskNodesAreStrictlyInside) {
    const Grid g(4.0, 8);  // h = 0.5, node (0, 1) sits exactly on the unit circle
    for (auto k : disk_nodes(g, 1.0)) EXPECT_LT(norm(g.node(k)), 1.0);
    const auto nodes = disk_nodes(g, 1.0);
    EXPECT_EQ(std::count(nodes.begin(), nodes.end(), g.index(4, 6)), 0);
}

TEST(Spectral, SingleModeNorms) {
    const Grid g(2 * pi, 16);
    const auto f = plane_wave(g, {1.0, 0.0});
    EXPECT_NEAR(sobolev_norm(f, 0.0), 2 * pi, 1e-12);
    EXPECT_NEAR(sobolev_norm(f, 1.0), std::sqrt(2.0) * 2 * pi, 1e-12);
    EXPECT_NEAR(sobolev_norm(f, 1.0), 8.885766, 1e-6);
}

TEST(Spectral, TwoModeH2Norm) {
    const Grid g(2 * pi, 16);
    const auto f = plane_wave(g, {1.0, 0.0}) + plane_wave(g, {0.0, 2.0});
    // (1+1)^2 + (1+4)^2 = 29
    EXPECT_NEAR(sobolev_norm(f, 2.0), 2 * pi * std::sqrt(29.0), 1e-10);
}

TEST(Spectral, ParsevalAgainstGridNorm) {
    const Grid g(4.0, 32);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    GridFunction f(g);
    for (std::size_t k = 0; k < g.size(); ++k) f[k] = n(rng);
    EXPECT_NEAR(sobolev_norm(f, 0.0), l2_norm(f), 1e-12 * l2_norm(f));
}

TEST(Spectral, RoundTrip) {
    const Grid g(4.0, 16);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ComplexGridFunction f(g);
    for (std::size_t k = 0; k < g.size(); ++k) f[k] = {u(rng), u(rng)};
    const auto back = from_spectral(to_spectral(f));
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(std::abs(back[k] - f[k]), 0.0, 1e-13);
}

TEST(Spectral, RejectsNonFinite) {
    const Grid g(4.0, 8);
    GridFunction f(g);
    f[3] = std::nan("");
    EXPECT_THROW(sobolev_norm(f, 1.0), InvalidInput);
    f[3] = INFINITY;
    EXPECT_THROW(ck_norm(f, 0), InvalidInput);
}

TEST(CkNorm, Constants) {
    const Grid g(4.0, 16);
    const GridFunction one = sample(g, [](Vec2) { return 1.0; });
    EXPECT_DOUBLE_EQ(ck_norm(one, 0), 1.0);
    EXPECT_DOUBLE_EQ(ck_norm(one, 2), 1.0);
    EXPECT_THROW(ck_norm(one, 5), UnsupportedOrder);
}

TEST(CkNorm, SineFirstDerivative) {
    for (int n : {32, 64}) {
        const Grid g(2 * pi, n);
        const GridFunction f = sample(g, [](Vec2 x) { return std::sin(x.x1); });
        const double h = g.spacing();
        // Central difference of sin is cos * sin(h)/h, which is below 1 by about h^2/6.
        EXPECT_NEAR(ck_norm(f, 1), 1.0, h * h / 6 + 1e-12);
        EXPECT_LE(ck_norm(f, 1), 1.0 + 1e-12);
    }
}

TEST(Interpolation, SingleModeIsEquality) {
    const Grid g(2 * pi, 16);
    const auto f = plane_wave(g, {2.0, -1.0});
    for (auto [s1, s2, a] : {std::tuple{0.0, 2.0, 0.5}, {1.0, 3.0, 0.25}, {0.0, 4.0, 0.75}}) {
        EXPECT_NEAR(interpolation_check(f, s1, s2, a), 1.0, 1e-12);
    }
}

TEST(Interpolation, ZeroFunctionConvention) {
    const Grid g(4.0, 8);
    EXPECT_DOUBLE_EQ(interpolation_check(GridFunction(g), 0.0, 2.0, 0.5), 1.0);
}

TEST(Interpolation, TwoModeHandSum) {
    const Grid g(2 * pi, 16);
    const auto f = plane_wave(g, {1.0, 0.0}) + plane_wave(g, {0.0, 3.0});
    // Weights 1+|xi|^2 are 2 and 10; both coefficients have modulus 2 pi.
    auto nrm = [](double s) { return 2 * pi * std::sqrt(std::pow(2.0, s) + std::pow(10.0, s)); };
    const double expect = nrm(1.0) / (std::sqrt(nrm(0.0)) * std::sqrt(nrm(2.0)));
    EXPECT_NEAR(interpolation_check(f, 0.0, 2.0, 0.5), expect, 1e-12);
    EXPECT_LT(expect, 1.0);
}

TEST(Interpolation, H4LegForExponentThreeQuarters) {
    // ||u||_{H1} <= ||u||_{L2}^{3/4} ||u||_{H4}^{1/4}
    const Grid g(4.0, 32);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        GridFunction f(g);
        for (std::size_t k = 0; k < g.size(); ++k) f[k] = u(rng);
        const double lhs = sobolev_norm(f, 1.0);
        const double rhs = std::pow(sobolev_norm(f, 0.0), 0.75) * std::pow(sobolev_norm(f, 4.0), 0.25);
        EXPECT_LE(lhs, rhs * (1 + 1e-12));
        EXPECT_LE(interpolation_check(f, 0.0, 4.0, 0.75), 1.0 + 1e-12);
    }
}

TEST(Interpolation, RejectsBadWeights) {
    const Grid g(4.0, 8);
    GridFunction f(g);
    f[5] = 1.0;
    EXPECT_THROW(interpolation_check(f, 0.0, 1.0, 1.5), InvalidParameter);
    EXPECT_THROW(interpolation_check(f, 1.0, 1.0, 0.5), InvalidParameter);
}
