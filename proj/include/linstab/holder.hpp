#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "linstab/errors.hpp"
#include "linstab/grid.hpp"
#include "linstab/spectral.hpp"
#include "linstab/stability.hpp"

namespace linstab {

// ---------------------------------------------------------------------------
// Finite-dimensional cubic maps

/// A(x)_i = c_i + A_ij x_j + Q_ijk x_j x_k + T_ijkl x_j x_k x_l, with a base
/// point x0. Tensors are stored flat in row-major index order.
class FinDimMap {
public:
    FinDimMap(int n, int m, Eigen::VectorXd x0)
        : n_(n), m_(m), x0_(std::move(x0)), c_(Eigen::VectorXd::Zero(m)),
          a_(Eigen::MatrixXd::Zero(m, n)), q_(static_cast<std::size_t>(m) * n * n, 0.0),
          t_(static_cast<std::size_t>(m) * n * n * n, 0.0) {
        if (n < 1 || m < 1) throw InvalidParameter("map dimensions must be positive");
        if (x0_.size() != n) throw InvalidInput("base point has the wrong dimension");
    }

    int n() const noexcept { return n_; }
    int m() const noexcept { return m_; }
    const Eigen::VectorXd& x0() const noexcept { return x0_; }

    Eigen::VectorXd& constant() noexcept { return c_; }
    Eigen::MatrixXd& linear() noexcept { return a_; }
    double& quadratic(int i, int j, int k) { return q_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k]; }
    double& cubic(int i, int j, int k, int l) {
        return t_[((static_cast<std::size_t>(i) * n_ + j) * n_ + k) * n_ + l];
    }
    double quadratic(int i, int j, int k) const {
        return q_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k];
    }
    double cubic(int i, int j, int k, int l) const {
        return t_[((static_cast<std::size_t>(i) * n_ + j) * n_ + k) * n_ + l];
    }

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
        check(x);
        Eigen::VectorXd y = c_ + a_ * x;
        for (int i = 0; i < m_; ++i) {
            for (int j = 0; j < n_; ++j) {
                for (int k = 0; k < n_; ++k) {
                    const double xjk = x[j] * x[k];
                    y[i] += quadratic(i, j, k) * xjk;
                    for (int l = 0; l < n_; ++l) y[i] += cubic(i, j, k, l) * xjk * x[l];
                }
            }
        }
        return y;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
        check(x);
        Eigen::MatrixXd jac = a_;
        for (int i = 0; i < m_; ++i) {
            for (int j = 0; j < n_; ++j) {
                for (int k = 0; k < n_; ++k) {
                    jac(i, j) += (quadratic(i, j, k) + quadratic(i, k, j)) * x[k];
                    for (int l = 0; l < n_; ++l) {
                        jac(i, j) += (cubic(i, j, k, l) + cubic(i, k, j, l) + cubic(i, k, l, j)) *
                                     x[k] * x[l];
                    }
                }
            }
        }
        return jac;
    }

    double quadratic_frobenius() const { return frobenius(q_); }
    double cubic_frobenius() const { return frobenius(t_); }

    /// C(r) with |R_{x0}(x)| <= C(r) |x - x0|^2 whenever |x - x0| <= r.
    double remainder_constant(double r) const {
        return quadratic_frobenius() + 3.0 * cubic_frobenius() * x0_.norm() + cubic_frobenius() * r;
    }

private:
    void check(const Eigen::VectorXd& x) const {
        if (x.size() != n_) throw InvalidInput("point has the wrong dimension");
    }
    static double frobenius(const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    }

    int n_;
    int m_;
    Eigen::VectorXd x0_;
    Eigen::VectorXd c_;
    Eigen::MatrixXd a_;
    std::vector<double> q_;
    std::vector<double> t_;
};

/// Random cubic map whose differential at x0 has singular values in
/// [sigma_lo, sigma_hi]; higher-order coefficients are N(0, coeff_scale^2).
inline FinDimMap random_cubic_map(int n, int m, std::uint64_t seed, double sigma_lo = 0.5,
                                  double sigma_hi = 2.0, double coeff_scale = 0.5) {
    if (m < n) throw InvalidParameter("an injective differential needs m >= n");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(sigma_lo, sigma_hi);
    auto gaussian = [&](int r, int c) {
        Eigen::MatrixXd g(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) g(i, j) = gauss(rng);
        return g;
    };
    Eigen::VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0[i] = 0.5 * gauss(rng);
    FinDimMap map(n, m, x0);
    for (int i = 0; i < m; ++i) map.constant()[i] = gauss(rng);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                map.quadratic(i, j, k) = coeff_scale * gauss(rng);
                for (int l = 0; l < n; ++l) map.cubic(i, j, k, l) = coeff_scale * gauss(rng);
            }
    // Choose the linear part so that the Jacobian at x0 is U diag(s) V^T.
    const Eigen::MatrixXd u = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(m, m)).householderQ();
    const Eigen::MatrixXd v = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(n, n)).householderQ();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, n);
    for (int i = 0; i < n; ++i) s(i, i) = unif(rng);
    const Eigen::MatrixXd target = u * s * v.transpose();
    map.linear().setZero();
    map.linear() = target - map.jacobian(x0);
    return map;
}

struct FinDimReport {
    bool hypothesis_ok;
    std::string message;
    double sigma_min;
    double C0;
    double C_x0;
    double admissible_radius;
    double radius;
    double max_ratio;
    double bound;  // 2 C0
    int samples;
    bool passed;
};

/// Largest r with r C(r) <= 1 / (2 C0).
inline double admissible_radius(const FinDimMap& map, double C0) {
    const double q = map.remainder_constant(0.0);
    const double t = map.cubic_frobenius();
    const double target = 1.0 / (2.0 * C0);
    if (t == 0.0) return q == 0.0 ? std::numeric_limits<double>::infinity() : target / q;
    return (-q + std::sqrt(q * q + 4.0 * t * target)) / (2.0 * t);
}

/// Samples the ball of `radius` around x0 and checks |x - x0| <= 2 C0 |A(x) - A(x0)|.
inline FinDimReport findim_lipschitz_check(const FinDimMap& map, double radius, int samples,
                                           std::uint64_t seed) {
    if (samples < 1) throw InvalidParameter("samples must be >= 1");
    if (!(radius > 0.0)) throw InvalidParameter("radius must be positive");
    const Eigen::MatrixXd jac = map.jacobian(map.x0());
    const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(jac).singularValues().minCoeff();
    const double tol = 1e-12 * std::max(1.0, jac.norm());
    FinDimReport rep{false, "", sigma, 0.0, 0.0, 0.0, radius, 0.0, 0.0, 0, false};
    if (map.m() < map.n() || !(sigma > tol)) {
        rep.message = "differential at x0 is not injective";
        return rep;
    }
    rep.hypothesis_ok = true;
    rep.C0 = 1.0 / sigma;
    rep.bound = 2.0 * rep.C0;
    rep.C_x0 = map.remainder_constant(radius);
    rep.admissible_radius = admissible_radius(map, rep.C0);
    if (radius > rep.admissible_radius * (1.0 + 1e-12)) {
        throw InvalidParameter("radius exceeds the admissible radius (2 C0 C_x0)^-1");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Eigen::VectorXd y0 = map(map.x0());
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd dir(map.n());
        for (int i = 0; i < map.n(); ++i) dir[i] = gauss(rng);
        const double len = radius * std::pow(unif(rng), 1.0 / map.n());
        if (dir.norm() == 0.0 || len == 0.0) continue;
        const Eigen::VectorXd x = map.x0() + (len / dir.norm()) * dir;
        const double dy = (map(x) - y0).norm();
        const double ratio = dy > 0.0 ? (x - map.x0()).norm() / dy
                                      : std::numeric_limits<double>::infinity();
        rep.max_ratio = std::max(rep.max_ratio, ratio);
        ++rep.samples;
    }
    rep.passed = rep.max_ratio <= rep.bound;
    if (!rep.passed) rep.message = "Lipschitz inequality violated";
    return rep;
}

// ---------------------------------------------------------------------------
// Quadratic perturbation of the normal operator

/// C-infinity bump exp(1 - 1/(1 - |x - c|^2/R^2)) supported in the disk of radius R.
inline GridFunction smooth_bump(const Grid& grid, Vec2 center, double radius) {
    return sample(grid, [&](Vec2 x) {
        const Vec2 d = x - center;
        const double s = dot(d, d) / (radius * radius);
        return s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s)) : 0.0;
    });
}

inline GridFunction unit_l2(GridFunction f) {
    const double n = l2_norm(f);
    if (n == 0.0) throw InvalidInput("cannot normalise the zero function");
    f *= 1.0 / n;
    return f;
}

/// f -> N f + (f, a) N f on the matrix's support nodes, values on its outer nodes.
class TestMap {
public:
    TestMap(OperatorMatrix normal, GridFunction profile)
        : n_(std::move(normal)), a_(std::move(profile)) {
        if (!(a_.grid() == n_.grid)) throw InvalidInput("profile lives on a different grid");
        if (std::abs(l2_norm(a_) - 1.0) > 1e-12) throw InvalidParameter("profile must have unit L2 norm");
    }

    const OperatorMatrix& normal() const noexcept { return n_; }
    const GridFunction& profile() const noexcept { return a_; }

    double pair(const GridFunction& f) const {
        double s = 0.0;
        for (auto k : n_.col_nodes) s += f[k] * a_[k];
        const double h = n_.grid.spacing();
        return s * h * h;
    }

    Eigen::VectorXd apply_normal(const GridFunction& f) const {
        return n_.values * n_.column_input(f);
    }

    /// Values on the outer nodes.
    Eigen::VectorXd operator()(const GridFunction& f) const {
        return (1.0 + pair(f)) * apply_normal(f);
    }

    /// Differential at f0 applied to h.
    Eigen::VectorXd linearization(const GridFunction& f0, const GridFunction& h) const {
        return (1.0 + pair(f0)) * apply_normal(h) + pair(h) * apply_normal(f0);
    }

    /// The differential at f0 as an operator matrix.
    OperatorMatrix linearization_matrix(const GridFunction& f0) const {
        OperatorMatrix out = n_;
        const double hh = n_.grid.spacing() * n_.grid.spacing();
        const Eigen::VectorXd nf0 = apply_normal(f0);
        const Eigen::VectorXd a_cols = n_.column_input(a_) * hh;
        out.values = (1.0 + pair(f0)) * n_.values + nf0 * a_cols.transpose();
        return out;
    }

    /// Discrete L2 norm over the outer nodes.
    double norm(const Eigen::VectorXd& v) const { return n_.grid.spacing() * v.norm(); }

private:
    OperatorMatrix n_;
    GridFunction a_;
};

namespace detail {

inline void check_scales(const std::vector<double>& scales, bool decreasing) {
    if (scales.empty()) throw InvalidParameter("scale list is empty");
    for (std::size_t k = 0; k < scales.size(); ++k) {
        if (!(scales[k] > 0.0)) throw InvalidParameter("scales must be positive");
        if (k > 0 && decreasing && !(scales[k] < scales[k - 1])) {
            throw InvalidParameter("scales must be strictly decreasing");
        }
    }
}

// Seeded unit-L2 Gaussian packets cut off smoothly at radius 0.9; the same
// list is used at every scale so that scale is the only thing that changes.
inline std::vector<GridFunction> bump_directions(const Grid& grid, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<GridFunction> out;
    const GridFunction cutoff = smooth_bump(grid, Vec2{}, 0.9);
    for (int s = 0; s < count; ++s) {
        const Vec2 c = (0.08 * std::sqrt(unif(rng))) * unit_from_angle(2.0 * std::numbers::pi * unif(rng));
        const double width = 0.40 + 0.04 * unif(rng);
        const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
        GridFunction b = sample(grid, [&](Vec2 x) {
            const Vec2 d = x - c;
            return sign * std::exp(-dot(d, d) / (2.0 * width * width));
        });
        for (std::size_t k = 0; k < grid.size(); ++k) b[k] *= cutoff[k];
        out.push_back(unit_l2(std::move(b)));
    }
    return out;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0.0, my = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] <= 0.0 || y[k] <= 0.0) continue;
        mx += std::log(x[k]);
        my += std::log(y[k]);
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] <= 0.0 || y[k] <= 0.0) continue;
        const double dx = std::log(x[k]) - mx;
        sxy += dx * (std::log(y[k]) - my);
        sxx += dx * dx;
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    return detail::loglog_slope(x, y);
}

struct RemainderReport {
    std::vector<double> scales;
    std::vector<double> C_hat_per_scale;
    double C_hat;

    /// Relative change of the estimate between the two smallest scales.
    double stabilization() const {
        const std::size_t n = C_hat_per_scale.size();
        if (n < 2) return 0.0;
        const double a = C_hat_per_scale[n - 2], b = C_hat_per_scale[n - 1];
        const double m = std::max(std::abs(a), std::abs(b));
        return m > 0.0 ? std::abs(a - b) / m : 0.0;
    }
};

/// max ||A(f) - A(f0) - A_{f0}(f - f0)|| / ||f - f0||^2 per scale over seeded
/// smooth directions.
inline RemainderReport remainder_bound_estimate(const TestMap& map, const GridFunction& f0,
                                                const std::vector<double>& scales, int samples,
                                                std::uint64_t seed) {
    detail::check_scales(scales, true);
    if (samples < 1) throw InvalidParameter("samples must be >= 1");
    const auto dirs = detail::bump_directions(f0.grid(), samples, seed);
    const Eigen::VectorXd y0 = map(f0);
    RemainderReport rep{scales, {}, 0.0};
    for (double s : scales) {
        double worst = 0.0;
        for (const auto& d : dirs) {
            GridFunction step = s * d;
            const Eigen::VectorXd r = map(f0 + step) - y0 - map.linearization(f0, step);
            const double dn = l2_norm_on(step, map.normal().col_nodes);
            worst = std::max(worst, map.norm(r) / (dn * dn));
        }
        rep.C_hat_per_scale.push_back(worst);
        rep.C_hat = std::max(rep.C_hat, worst);
    }
    return rep;
}

struct HolderSample {
    int sample_id;
    double scale;
    double lhs_norm;  // ||f - f0||_{L2}
    double rhs_norm;  // ||A(f) - A(f0)||_{L2}
    double ratio;     // lhs / (K^{2 - mu1 - mu2} rhs^{mu1 mu2})
    double h3_norm;
    bool chain_ok;
};

struct HolderReport {
    std::array<std::string, 6> spaces{"L2", "L2", "H3", "L2", "H1", "H4"};
    double mu1 = 1.0;
    double mu2 = 0.75;
    double K = 0.0;
    std::vector<double> scales;
    std::vector<HolderSample> samples;
    int skipped = 0;  // candidates whose H3 norm exceeded K
    double sigma_min_linearization = 0.0;
    double C_hat = 0.0;
    double slope = 0.0;
    std::uint64_t seed = 0;
    bool hypothesis_ok = false;
    std::string message;

    double exponent() const { return mu1 * mu2; }
    bool slope_ok(double slack = 0.05) const { return slope >= exponent() - slack; }
    bool chain_ok() const {
        return std::all_of(samples.begin(), samples.end(),
                           [](const HolderSample& s) { return s.chain_ok; });
    }
    bool passed(double slack = 0.05) const {
        return hypothesis_ok && std::isfinite(C_hat) && slope_ok(slack) && chain_ok();
    }
};

struct HolderOptions {
    int samples = 8;
    std::uint64_t seed = 0;
    bool weakest_direction = false;  // also probe along the least stable direction
    double mu1 = 1.0;
    double mu2 = 0.75;
};

/// Conditional Hoelder estimate around f0 over a scale sweep.
inline HolderReport holder_fit(const TestMap& map, const GridFunction& f0, double K,
                               const std::vector<double>& scales, const HolderOptions& opt = {}) {
    detail::check_scales(scales, false);
    if (!(K > 0.0)) throw InvalidParameter("K must be positive");
    if (opt.samples < 1) throw InvalidParameter("samples must be >= 1");
    HolderReport rep;
    rep.K = K;
    rep.scales = scales;
    rep.seed = opt.seed;
    rep.mu1 = opt.mu1;
    rep.mu2 = opt.mu2;
    if (!(rep.mu1 > 0.0 && rep.mu1 <= 1.0 && rep.mu2 > 0.0 && rep.mu2 <= 1.0)) {
        throw InvalidParameter("mu1 and mu2 must lie in (0, 1]");
    }
    if (!(rep.exponent() > 0.5)) throw InvalidParameter("mu1 mu2 must exceed 1/2");
    const double f0_h3 = sobolev_norm(f0, 3.0);
    if (f0_h3 > K) throw InvalidParameter("base point exceeds the a-priori bound K");

    const OperatorMatrix lin = map.linearization_matrix(f0);
    const auto st = stability_constant(lin);
    rep.sigma_min_linearization = st.sigma_min;
    if (!(st.sigma_min > 0.0)) {
        rep.message = "linearization at f0 is not stable (sigma_min = 0)";
        return rep;
    }
    rep.hypothesis_ok = true;

    const Grid& grid = f0.grid();
    auto dirs = detail::bump_directions(grid, opt.samples, opt.seed);
    if (opt.weakest_direction) {
        const Eigen::MatrixXd g = h1_gram(grid, lin.row_nodes);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lin.values.transpose() * g * lin.values);
        GridFunction v(grid);
        for (std::size_t c = 0; c < lin.col_nodes.size(); ++c) v[lin.col_nodes[c]] = eig.eigenvectors()(c, 0);
        dirs.push_back(unit_l2(std::move(v)));
    }

    const Eigen::VectorXd y0 = map(f0);
    const double kfac = std::pow(K, 2.0 - rep.mu1 - rep.mu2);
    std::vector<double> lhs, rhs;
    int id = 0;
    for (double s : scales) {
        for (const auto& d : dirs) {
            const int sid = id++;
            GridFunction f = f0 + s * d;
            const double h3 = sobolev_norm(f, 3.0);
            if (h3 > K) {
                ++rep.skipped;
                continue;
            }
            const double l = l2_norm_on(f - f0, map.normal().col_nodes);
            const double r = map.norm(map(f) - y0);
            const double ratio = r > 0.0 ? l / (kfac * std::pow(r, rep.exponent()))
                                         : (l > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            rep.samples.push_back({sid, s, l, r, ratio, h3, false});
            lhs.push_back(l);
            rhs.push_back(r);
            rep.C_hat = std::max(rep.C_hat, ratio);
        }
    }
    // The proof's intermediate chain with the same constant.
    for (auto& smp : rep.samples) {
        const double chain = rep.C_hat * kfac *
                             (std::pow(smp.rhs_norm, rep.exponent()) +
                              std::pow(smp.lhs_norm, 2.0 * rep.exponent()));
        smp.chain_ok = smp.lhs_norm <= chain * (1.0 + 1e-12);
    }
    rep.slope = detail::loglog_slope(rhs, lhs);
    if (rep.samples.empty()) rep.message = "every candidate exceeded the a-priori bound K";
    return rep;
}

}  // namespace linstab
