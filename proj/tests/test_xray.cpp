#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "linstab/holder.hpp"
#include "linstab/xray.hpp"

using namespace linstab;
using std::numbers::pi;

namespace {

WeightSpec hard_limited() { return WeightSpec::limited_angle(pi / 2, pi / 6, 0.1); }

std::vector<WeightSpec> all_kinds(const Grid& g) {
    return {WeightSpec::constant(1.0),
            WeightSpec::constant(0.7),
            hard_limited(),
            WeightSpec::bump({0.2, -0.1}, 0.5, 1.0, 0.4, 1.1),
            WeightSpec::tabulate(g, 16, [](Vec2 x, Vec2 t) { return 1.0 + 0.3 * x.x1 * t.x2; }),
            WeightSpec::perturbed(WeightSpec::constant(1.0), WeightSpec::bump({0.3, 0.1}, 0.3, 1.0), 0.1),
            WeightSpec::from_function([](Vec2 x, Vec2 t) { return std::cos(x.x2) + 0.2 * t.x1; }, "fn")};
}

GridFunction random_support(const Grid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GridFunction f(g);
    for (auto k : disk_nodes(g, kSupportRadius)) f[k] = u(rng);
    return f;
}

// Value on the ray with the given angle index and offset.
double value_on(const Sinogram& s, int angle, double offset) {
    for (std::size_t r = 0; r < s.rays.size(); ++r) {
        if (r / s.rays.n_offsets() == static_cast<std::size_t>(angle) &&
            std::abs(s.rays[r].offset - offset) < 1e-12) {
            return s.values[r];
        }
    }
    throw std::runtime_error("no such ray");
}

}  // namespace

TEST(RaySet, Validation) {
    EXPECT_THROW(RaySet(0, 10, 0.1), InvalidParameter);
    EXPECT_THROW(RaySet(10, 10, 0.0), InvalidParameter);
    EXPECT_THROW(RaySet(10, 10, -1.0), InvalidParameter);
}

TEST(RaySet, MeasureIsOffsetCellTimesAngleCell) {
    const RaySet rays(12, 10, 0.05);
    const double expect = (3.0 / 10) * (2 * pi / 12);
    for (std::size_t r = 0; r < rays.size(); ++r) EXPECT_NEAR(rays[r].measure, expect, 1e-15);
    const Ray& ray = rays[3];
    EXPECT_NEAR(norm(ray.entry), kOuterRadius, 1e-14);
}

TEST(Forward, ZeroInputGivesZeroSinogram) {
    const Grid g(4.0, 16);
    const auto s = forward(hard_limited(), GridFunction(g), RaySet(8, 8, 0.1));
    for (double v : s.values) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ChordOfADisk) {
    const Grid g(4.0, 256);
    // Horizontal rays are the lines x2 = p; offset 0.15 exists with 10 offsets.
    const RaySet rays(4, 10, 0.25 * g.spacing());
    const Vec2 c{0.0, 0.15 - 0.3};
    const GridFunction f = sample(g, [&](Vec2 x) { return norm(x - c) < 0.5 ? 1.0 : 0.0; });
    const auto s = forward(WeightSpec::constant(1.0), f, rays);
    EXPECT_NEAR(value_on(s, 0, 0.15), 0.8, 2e-2);
}

TEST(Forward, GaussianLineIntegral) {
    const Grid g(4.0, 256);
    const double sigma = 0.25;
    const GridFunction f = sample(g, [&](Vec2 x) { return std::exp(-dot(x, x) / (2 * sigma * sigma)); });
    const RaySet rays(8, 15, 0.5 * g.spacing());
    const auto s = forward(WeightSpec::constant(1.0), f, rays);
    for (int a : {0, 1, 3}) {
        for (double p : {0.0, 0.2, -0.4}) {
            // Exact integral over the chord of the unit disk.
            const double half = std::sqrt(1.0 - p * p);
            const double expect = sigma * std::sqrt(2 * pi) * std::exp(-p * p / (2 * sigma * sigma)) *
                                  std::erf(half / (sigma * std::sqrt(2.0)));
            EXPECT_NEAR(value_on(s, a, p) / expect, 1.0, 1e-3) << a << " " << p;
        }
    }
}

TEST(Adjoint, ZeroSinogramGivesZero) {
    const Grid g(4.0, 16);
    const RaySet rays(8, 8, 0.1);
    const auto out = adjoint(WeightSpec::constant(1.0), Sinogram{rays, std::vector<double>(rays.size())}, g);
    EXPECT_EQ(l2_norm(out), 0.0);
}

TEST(Adjoint, RejectsMalformedSinogram) {
    const Grid g(4.0, 16);
    const RaySet rays(8, 8, 0.1);
    EXPECT_THROW(adjoint(WeightSpec::constant(1.0), Sinogram{rays, std::vector<double>(3)}, g), InvalidInput);
    const Sinogram a{rays, std::vector<double>(rays.size())};
    const Sinogram b{RaySet(8, 9, 0.1), std::vector<double>(72)};
    EXPECT_THROW(dsigma_inner(a, b), InvalidInput);
}

TEST(Adjoint, CenterValueByDirectSummation) {
    const Grid g(4.0, 32);
    const RaySet rays(36, 30, 0.5 * g.spacing());
    const auto out = adjoint(WeightSpec::constant(1.0), Sinogram{rays, std::vector<double>(rays.size(), 1.0)}, g);
    const double h = g.spacing();
    double acc = 0.0;
    for (std::size_t r = 0; r < rays.size(); ++r) {
        const Ray& ray = rays[r];
        const double chord = 2.0 * std::sqrt(kOuterRadius * kOuterRadius - ray.offset * ray.offset);
        for (long s = 0; (s + 0.5) * rays.t_step() < chord; ++s) {
            const Vec2 x = ray.entry + ((s + 0.5) * rays.t_step()) * ray.direction;
            const double a = 1.0 - std::abs(x.x1) / h, b = 1.0 - std::abs(x.x2) / h;
            if (a > 0.0 && b > 0.0) acc += ray.measure * rays.t_step() * a * b;
        }
    }
    acc /= h * h;
    EXPECT_NEAR(out.at(16, 16), acc, 1e-12 * acc);
    EXPECT_NEAR(out.at(16, 16), 6.2420882905, 1e-9);  // frozen
}

TEST(Adjoint, PairingAndNormalIdentityForEveryWeightKind) {
    const Grid g(4.0, 24);
    const RaySet rays = RaySet::for_grid(g, 1.0);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const auto& w : all_kinds(g)) {
        for (int t = 0; t < 5; ++t) {
            const GridFunction f = random_support(g, rng);
            Sinogram s{rays, std::vector<double>(rays.size())};
            for (auto& v : s.values) v = u(rng);
            const auto If = forward(w, f, rays);
            const auto adj = adjoint(w, s, g);
            const double scale = dsigma_norm(If) * dsigma_norm(s) + l2_norm(f) * l2_norm(adj);
            EXPECT_LE(std::abs(dsigma_inner(If, s) - inner(f, adj)), 1e-12 * scale) << w.fingerprint();
            const double lhs = inner(normal_compose(w, f, rays), f);
            const double rhs = std::pow(dsigma_norm(If), 2);
            EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(rhs, std::pow(l2_norm(f), 2))) << w.fingerprint();
        }
    }
}

TEST(Normal, CenteredGaussianIsRotationSymmetric) {
    const int n = 32;
    const Grid g(4.0, n);
    const GridFunction f = sample(g, [](Vec2 x) { return std::exp(-4.0 * dot(x, x)); });
    const auto out = normal_compose(WeightSpec::constant(1.0), f, RaySet::for_grid(g, 1.0));
    double worst = 0.0, peak = 0.0;
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j) {
            worst = std::max(worst, std::abs(out.at(i, j) - out.at(n - j, i)));
            peak = std::max(peak, std::abs(out.at(i, j)));
        }
    EXPECT_LE(worst, 1e-10 * peak);
    EXPECT_GT(peak, 0.0);
}

TEST(Normal, ComplexInputActsComponentwise) {
    const Grid g(4.0, 16);
    const RaySet rays = RaySet::for_grid(g, 1.0);
    std::mt19937_64 rng(1);
    const GridFunction re = random_support(g, rng), im = random_support(g, rng);
    ComplexGridFunction f(g);
    for (std::size_t k = 0; k < g.size(); ++k) f[k] = {re[k], im[k]};
    const auto w = hard_limited();
    const auto out = normal_compose(w, f, rays);
    const auto a = normal_compose(w, re, rays), b = normal_compose(w, im, rays);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_NEAR(out[k].real(), a[k], 1e-12);
        EXPECT_NEAR(out[k].imag(), b[k], 1e-12);
    }
}

TEST(KernelWeight, Examples) {
    EXPECT_DOUBLE_EQ(weight_W(WeightSpec::constant(1.0), {0.1, 0.2}, {-0.3, 0.5}), 2.0);
    const auto w = WeightSpec::from_function([](Vec2, Vec2 t) { return t.x1; }, "theta1");
    EXPECT_DOUBLE_EQ(weight_W(w, {1.0, 0.0}, {0.0, 0.0}), 2.0);
    EXPECT_THROW(weight_W(w, {0.3, 0.3}, {0.3, 0.3}), SingularPoint);
}

TEST(NormalKernel, ZeroInput) {
    const Grid g(4.0, 16);
    EXPECT_EQ(l2_norm(normal_kernel(WeightSpec::constant(1.0), GridFunction(g), 1.0)), 0.0);
}

TEST(NormalKernel, ConvergesToTheComposition) {
    const auto w = WeightSpec::constant(1.0);
    const std::vector<std::pair<Vec2, double>> bumps{
        {{0.0, 0.0}, 0.6}, {{0.3, -0.2}, 0.5}, {{-0.4, 0.3}, 0.45}, {{0.2, 0.4}, 0.5}, {{-0.1, -0.4}, 0.55}};
    std::vector<double> worst;
    for (int n : {32, 48}) {
        const Grid g(4.0, n);
        const RaySet rays = RaySet::for_grid(g, 1.0);
        std::vector<GridFunction> fs;
        for (const auto& [c, r] : bumps) fs.push_back(smooth_bump(g, c, r));
        const double cc = calibrate_kernel_constant(w, std::span<const GridFunction>(fs), rays);
        EXPECT_NEAR(cc, 1.0, 1e-2);
        double e = 0.0;
        for (const auto& f : fs) {
            const auto nf = normal_compose(w, f, rays, Region::outer);
            e = std::max(e, l2_norm(normal_kernel(w, f, cc, Region::outer) - nf) / l2_norm(nf));
        }
        worst.push_back(e);
    }
    EXPECT_LT(worst[1], worst[0]);
    EXPECT_LT(worst[1], 5e-2);
    EXPECT_NEAR(worst[0], 2.2186e-2, 1e-5);  // frozen
    EXPECT_NEAR(worst[1], 9.4943e-3, 1e-6);  // frozen
}

TEST(NormalKernel, CellIntegralMatchesClosedFormForConstants) {
    // For w = c0 the cell integral is 2 c0^2 * 4 h log(1 + sqrt 2).
    const double h = 0.1;
    EXPECT_NEAR(diagonal_cell_integral(WeightSpec::constant(1.5), {0.2, 0.1}, h, 4096),
                2 * 2.25 * 4 * h * std::log(1 + std::sqrt(2.0)), 1e-6);
}

TEST(Symbol, Examples) {
    const auto one = WeightSpec::constant(1.0);
    EXPECT_NEAR(principal_symbol(one, {0.1, 0.2}, {2.0, 0.0}), 2 * pi * 2 / 2.0, 1e-14);
    EXPECT_NEAR(symbol_normalization(), 2 * pi, 1e-15);
    EXPECT_THROW(principal_symbol(one, {0, 0}, {0, 0}), InvalidInput);
    EXPECT_DOUBLE_EQ(principal_symbol(hard_limited(), {0.3, 0.0}, {1.0, 0.0}), 0.0);
    EXPECT_GT(principal_symbol(hard_limited(), {0.3, 0.0}, {0.0, 1.0}), 0.0);
}

TEST(Ellipticity, Margins) {
    EXPECT_DOUBLE_EQ(ellipticity_margin(WeightSpec::constant(1.0), 16).margin, 2.0);
    EXPECT_DOUBLE_EQ(ellipticity_margin(WeightSpec::constant(0.5), 16).margin, 0.5);
    const auto r = ellipticity_margin(hard_limited(), 32);
    EXPECT_EQ(r.margin, 0.0);
    EXPECT_NEAR(std::abs(r.witness_covector.x1), 1.0, 1e-12);
    EXPECT_NEAR(r.witness_covector.x2, 0.0, 1e-12);
    EXPECT_THROW(ellipticity_margin(WeightSpec::constant(1.0), 4), InvalidParameter);
}

TEST(Weight, LimitedAngleMask) {
    const auto w = hard_limited();
    EXPECT_EQ(w({0, 0}, {0.0, 1.0}), 0.0);
    EXPECT_EQ(w({0, 0}, {0.0, -1.0}), 0.0);
    EXPECT_EQ(w({0, 0}, {1.0, 0.0}), 1.0);
    EXPECT_EQ(w({0, 0}, unit_from_angle(pi / 2 - pi / 6 - 0.1 - 1e-9)), 1.0);
    EXPECT_THROW(WeightSpec::limited_angle(0.0, 0.3, 0.0), InvalidParameter);
    EXPECT_THROW(WeightSpec::limited_angle(0.0, 1.5, 0.1), InvalidParameter);
}

TEST(Weight, TabulatedReproducesNodesAndAngles) {
    const Grid g(4.0, 16);
    auto fn = [](Vec2 x, Vec2 t) { return 2.0 + x.x1 - 0.5 * x.x2 + 0.25 * t.x2; };
    const auto w = WeightSpec::tabulate(g, 32, fn);
    const Vec2 x = g.node(g.index(7, 9));
    const Vec2 t = unit_from_angle(2 * pi * 5 / 32);
    EXPECT_NEAR(w(x, t), fn(x, t), 1e-14);
    // bilinear in x reproduces the affine part between nodes
    const Vec2 mid = x + Vec2{0.3 * g.spacing(), 0.6 * g.spacing()};
    EXPECT_NEAR(w(mid, t), fn(mid, t), 1e-13);
    EXPECT_THROW(WeightSpec::tabulated(g, 4, std::vector<double>(10)), InvalidInput);
}
