#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "linstab/errors.hpp"
#include "linstab/grid.hpp"
#include "linstab/weight.hpp"
#include "linstab/xray.hpp"

namespace linstab {

inline constexpr std::size_t kMaxMatrixNodes = 4000;

/// Discrete normal operator as a dense matrix from support-disk nodes
/// (columns) to outer-disk nodes (rows), both in row-major node order.
struct OperatorMatrix {
    Grid grid;
    RaySet rays;
    WeightSpec weight;
    std::vector<std::size_t> row_nodes;
    std::vector<std::size_t> col_nodes;
    Eigen::MatrixXd values;

    std::string fingerprint() const { return weight.fingerprint(); }

    Eigen::VectorXd column_input(const GridFunction& f) const {
        Eigen::VectorXd v(col_nodes.size());
        for (std::size_t c = 0; c < col_nodes.size(); ++c) v[c] = f[col_nodes[c]];
        return v;
    }

    GridFunction scatter_rows(const Eigen::VectorXd& v) const {
        GridFunction out(grid);
        for (std::size_t r = 0; r < row_nodes.size(); ++r) out[row_nodes[r]] = v[r];
        return out;
    }
};

namespace detail {

inline std::vector<long> node_positions(const Grid& grid, const std::vector<std::size_t>& nodes) {
    std::vector<long> pos(grid.size(), -1);
    for (std::size_t k = 0; k < nodes.size(); ++k) pos[nodes[k]] = static_cast<long>(k);
    return pos;
}

// Ray-by-node sampling matrix of walk_ray restricted to the given node set.
inline Eigen::SparseMatrix<double> sampling_matrix(const WeightSpec& w, const Grid& grid,
                                                   const RaySet& rays, double reach,
                                                   const std::vector<long>& pos,
                                                   std::size_t n_cols) {
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<std::pair<int, double>> touched;
    for (std::size_t r = 0; r < rays.size(); ++r) {
        touched.clear();
        walk_ray(rays, rays[r], grid, w, reach,
                 [&](int i, int j, double a, double b, double weight) {
                     auto add = [&](int ii, int jj, double c) {
                         const long p = pos[grid.index(ii, jj)];
                         if (p >= 0 && c != 0.0) touched.emplace_back(static_cast<int>(p), c * weight);
                     };
                     add(i, j, (1 - a) * (1 - b));
                     add(i, j + 1, (1 - a) * b);
                     add(i + 1, j, a * (1 - b));
                     add(i + 1, j + 1, a * b);
                 });
        // Merge repeated nodes in sample order so the sums match forward().
        std::stable_sort(touched.begin(), touched.end(),
                         [](const auto& x, const auto& y) { return x.first < y.first; });
        for (std::size_t k = 0; k < touched.size();) {
            double acc = 0.0;
            const int col = touched[k].first;
            for (; k < touched.size() && touched[k].first == col; ++k) acc += touched[k].second;
            triplets.emplace_back(static_cast<int>(r), col, acc);
        }
    }
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(rays.size()),
                                  static_cast<Eigen::Index>(n_cols));
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

}  // namespace detail

/// Column j is normal_compose (outer region) of the j-th nodal basis function.
inline OperatorMatrix assemble_normal_matrix(const WeightSpec& w, const Grid& grid,
                                             const RaySet& rays) {
    if (grid.side() < 2.0 * kOuterRadius + 4.0 * grid.spacing()) {
        throw InvalidParameter("grid must cover the outer disk with a margin of two cells");
    }
    auto cols = disk_nodes(grid, kSupportRadius);
    auto rows = disk_nodes(grid, kOuterRadius);
    if (cols.size() > kMaxMatrixNodes || rows.size() > kMaxMatrixNodes) {
        throw TooLarge("normal matrix would have " + std::to_string(rows.size()) + " x " +
                       std::to_string(cols.size()) + " entries over the node limit " +
                       std::to_string(kMaxMatrixNodes) +
                       "; use a coarser grid or the matrix-free normal_compose");
    }
    const auto a_fwd = detail::sampling_matrix(w, grid, rays, detail::forward_reach(grid),
                                               detail::node_positions(grid, cols), cols.size());
    const auto a_bwd =
        detail::sampling_matrix(w, grid, rays, detail::backward_reach(grid, Region::outer),
                                detail::node_positions(grid, rows), rows.size());
    Eigen::VectorXd measure(static_cast<Eigen::Index>(rays.size()));
    for (std::size_t r = 0; r < rays.size(); ++r) measure[r] = rays[r].measure;
    const double h = grid.spacing();
    Eigen::SparseMatrix<double> weighted = measure.asDiagonal() * a_fwd;
    Eigen::SparseMatrix<double> prod = a_bwd.transpose() * weighted;
    Eigen::MatrixXd dense = Eigen::MatrixXd(prod) / (h * h);
    return {grid, rays, w, std::move(rows), std::move(cols), std::move(dense)};
}

/// Largest |column - normal_compose(basis)| over `count` seeded columns,
/// relative to the column's max entry.
inline double spot_check_columns(const OperatorMatrix& m, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, m.col_nodes.size() - 1);
    double worst = 0.0;
    for (int t = 0; t < count; ++t) {
        const std::size_t c = pick(rng);
        GridFunction e(m.grid);
        e[m.col_nodes[c]] = 1.0;
        const auto ref = normal_compose(m.weight, e, m.rays, Region::outer);
        double scale = 0.0, diff = 0.0;
        for (std::size_t r = 0; r < m.row_nodes.size(); ++r) {
            const double want = ref[m.row_nodes[r]];
            scale = std::max(scale, std::abs(want));
            diff = std::max(diff, std::abs(want - m.values(r, c)));
        }
        worst = std::max(worst, scale > 0.0 ? diff / scale : diff);
    }
    return worst;
}

/// Gram matrix of the discrete H1 norm on the outer-disk nodes:
/// h^2 sum |u|^2 plus the squared differences across every grid edge joining
/// two outer-disk nodes (h^2 |(u_a - u_b)/h|^2 per edge).
inline Eigen::MatrixXd h1_gram(const Grid& grid, const std::vector<std::size_t>& nodes) {
    const auto pos = detail::node_positions(grid, nodes);
    const double h = grid.spacing();
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n) * (h * h);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const int i = static_cast<int>(nodes[k] / grid.points());
        const int j = static_cast<int>(nodes[k] % grid.points());
        for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
            if (i + di >= grid.points() || j + dj >= grid.points()) continue;
            const long q = pos[grid.index(i + di, j + dj)];
            if (q < 0) continue;
            const auto a = static_cast<Eigen::Index>(k);
            const auto b = static_cast<Eigen::Index>(q);
            g(a, a) += 1.0;
            g(b, b) += 1.0;
            g(a, b) -= 1.0;
            g(b, a) -= 1.0;
        }
    }
    return g;
}

struct StabilityEntry {
    int resolution;
    double sigma_min;
    double C_estimate;
    double residual;
};

inline constexpr double kEigenResidualTolerance = 1e-8;

/// min ||M f||_{H1} / ||f||_{L2} over f on the support nodes, from the
/// smallest eigenpair of (M^T G M) f = mu h^2 f.
inline StabilityEntry stability_constant(const OperatorMatrix& m) {
    const double h = m.grid.spacing();
    const Eigen::MatrixXd g = h1_gram(m.grid, m.row_nodes);
    const Eigen::MatrixXd b = m.values.transpose() * g * m.values;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
    if (eig.info() != Eigen::Success) {
        throw NumericFailure("symmetric eigensolve did not converge",
                             std::numeric_limits<double>::quiet_NaN());
    }
    const double mu = eig.eigenvalues()[0];
    const Eigen::VectorXd v = eig.eigenvectors().col(0);
    const double scale = std::max(b.norm(), std::numeric_limits<double>::min());
    const double residual = (b * v - mu * v).norm() / scale;
    if (!(residual <= kEigenResidualTolerance)) {
        throw NumericFailure("generalized eigenpair fails the residual check", residual);
    }
    const double sigma = std::sqrt(std::max(mu, 0.0)) / h;
    const double c = sigma > 0.0 ? 1.0 / sigma : std::numeric_limits<double>::infinity();
    return {m.grid.points(), sigma, c, residual};
}

/// Same quantity by a full SVD of the whitened matrix L^T M / h with G = L L^T.
inline double stability_constant_svd(const OperatorMatrix& m) {
    const double h = m.grid.spacing();
    const Eigen::MatrixXd g = h1_gram(m.grid, m.row_nodes);
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw NumericFailure("H1 Gram matrix is not positive", 0.0);
    const Eigen::MatrixXd whitened = llt.matrixU() * m.values / h;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(whitened);
    return svd.singularValues().minCoeff();
}

struct StabilityReport {
    std::string weight_fingerprint;
    std::vector<StabilityEntry> entries;
    std::uint64_t seed = 0;
};

/// sigma_min over a resolution sweep on [-side/2, side/2)^2 with rays scaled
/// to each grid.
inline StabilityReport stability_sweep(const WeightSpec& w, const std::vector<int>& resolutions,
                                       double side = 4.0, double ray_oversampling = 1.0,
                                       std::uint64_t seed = 0) {
    StabilityReport report{w.fingerprint(), {}, seed};
    for (int n : resolutions) {
        const Grid grid(side, n);
        report.entries.push_back(
            stability_constant(assemble_normal_matrix(w, grid, RaySet::for_grid(grid, ray_oversampling))));
    }
    return report;
}

struct PerturbationPoint {
    double eps;
    double sigma_min;
    double deviation;
};

struct PerturbationReport {
    double sigma_base;
    std::vector<PerturbationPoint> points;
    double lipschitz;      // max deviation / eps, a bound valid at every point
    double fitted_slope;   // least-squares slope of deviation against eps through the origin
};

/// sigma_min of w0 + eps delta for each eps on a fixed grid and ray set.
inline PerturbationReport perturbation_scan(const WeightSpec& w0, const WeightSpec& delta,
                                            const std::vector<double>& eps_list, const Grid& grid,
                                            const RaySet& rays) {
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        if (!(eps_list[k] >= 0.0) || (k > 0 && !(eps_list[k] > eps_list[k - 1]))) {
            throw InvalidParameter("eps list must be nonnegative and strictly increasing");
        }
    }
    const double base = stability_constant(assemble_normal_matrix(w0, grid, rays)).sigma_min;
    PerturbationReport rep{base, {}, 0.0, 0.0};
    double num = 0.0, den = 0.0;
    for (double eps : eps_list) {
        const double s =
            eps == 0.0
                ? base
                : stability_constant(assemble_normal_matrix(WeightSpec::perturbed(w0, delta, eps),
                                                            grid, rays))
                      .sigma_min;
        const double dev = std::abs(s - base);
        rep.points.push_back({eps, s, dev});
        if (eps > 0.0) rep.lipschitz = std::max(rep.lipschitz, dev / eps);
        num += eps * dev;
        den += eps * eps;
    }
    rep.fitted_slope = den > 0.0 ? num / den : 0.0;
    return rep;
}

/// (lambda/pi)^{1/2} exp(i lambda x.xi0 - lambda |x - x0|^2 / 2).
inline ComplexGridFunction coherent_state(const Grid& grid, Vec2 x0, Vec2 xi0, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be positive");
    }
    if (std::abs(norm(xi0) - 1.0) > 1e-12) throw InvalidParameter("xi0 must be a unit covector");
    if (norm(x0) > kSupportRadius - 3.0 / std::sqrt(lambda)) {
        throw InvalidParameter("x0 must keep a distance 3/sqrt(lambda) from the support boundary");
    }
    const double h = grid.spacing();
    if (lambda * h * h > 1.0) {
        int need = static_cast<int>(std::ceil(grid.side() * std::sqrt(lambda)));
        need = std::max(8, need + need % 2);
        throw ResolutionError("oscillation not resolved: lambda h^2 > 1", need);
    }
    const double amp = std::sqrt(lambda / std::numbers::pi);
    return sample(grid, [&](Vec2 x) {
        const Vec2 d = x - x0;
        return amp * std::exp(std::complex<double>(-0.5 * lambda * dot(d, d), lambda * dot(x, xi0)));
    });
}

struct ProbeReport {
    Vec2 x0;
    Vec2 xi0;
    std::vector<double> lambdas;
    std::vector<int> resolutions;
    std::vector<double> measured;
    double analytic;
    std::vector<double> rel_err;

    /// |relative error| nonincreasing over the upper half of the lambda list.
    bool converging() const {
        for (std::size_t k = lambdas.size() / 2 + 1; k < lambdas.size(); ++k) {
            if (std::abs(rel_err[k]) > std::abs(rel_err[k - 1])) return false;
        }
        return true;
    }
};

namespace detail {

inline void check_lambdas(const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw InvalidParameter("lambda list is empty");
    for (std::size_t k = 1; k < lambdas.size(); ++k) {
        if (!(lambdas[k] > lambdas[k - 1])) {
            throw InvalidParameter("lambda list must be strictly increasing");
        }
    }
}

inline void finish_probe(ProbeReport& rep) {
    for (double v : rep.measured) {
        if (!std::isfinite(v)) throw NumericFailure("probe produced a non-finite value", v);
        rep.rel_err.push_back(rep.analytic != 0.0 ? v / rep.analytic - 1.0 : v);
    }
}

}  // namespace detail

/// lambda ||M f_lambda|| / ||f_lambda|| on the matrix's own grid.
inline ProbeReport symbol_probe(const OperatorMatrix& m, Vec2 x0, Vec2 xi0,
                                const std::vector<double>& lambdas,
                                double kappa = symbol_normalization()) {
    detail::check_lambdas(lambdas);
    ProbeReport rep{x0, xi0, lambdas, {}, {}, principal_symbol(m.weight, x0, xi0, kappa), {}};
    const double h = m.grid.spacing();
    for (double lambda : lambdas) {
        const auto f = coherent_state(m.grid, x0, xi0, lambda);
        const Eigen::VectorXd re = m.values * m.column_input(real_part(f));
        const Eigen::VectorXd im = m.values * m.column_input(imag_part(f));
        const double image = h * std::sqrt(re.squaredNorm() + im.squaredNorm());
        const double input = l2_norm_on(f, m.col_nodes);
        rep.resolutions.push_back(m.grid.points());
        rep.measured.push_back(input > 0.0 ? lambda * image / input : 0.0);
    }
    detail::finish_probe(rep);
    return rep;
}

/// Grid refinement for the matrix-free probe. Bilinear sampling loses a
/// relative amount of order (lambda h)^2 while the packet's own spread costs
/// order 1/lambda; refining with lambda^3 h^2 = constant keeps both decaying
/// like 1/lambda, so the error sequence can settle instead of growing.
struct ProbeRefinement {
    double side = 4.0;
    double lambda3_h2 = 65.0;
    double ray_oversampling = 1.0;
    double envelope_cutoff = 18.0;  // packet set to zero where lambda |x - x0|^2 / 2 exceeds this

    int points_for(double lambda) const {
        const double h = std::sqrt(lambda3_h2 / (lambda * lambda * lambda));
        int n = static_cast<int>(std::ceil(side / h));
        n += n % 2;
        return std::max(n, 16);
    }
};

/// lambda ||N f_lambda|| / ||f_lambda|| with the matrix-free composition on a
/// grid refined per lambda.
inline ProbeReport symbol_probe(const WeightSpec& w, Vec2 x0, Vec2 xi0,
                                const std::vector<double>& lambdas,
                                const ProbeRefinement& refine = {},
                                double kappa = symbol_normalization()) {
    detail::check_lambdas(lambdas);
    ProbeReport rep{x0, xi0, lambdas, {}, {}, principal_symbol(w, x0, xi0, kappa), {}};
    for (double lambda : lambdas) {
        const Grid grid(refine.side, refine.points_for(lambda));
        auto f = coherent_state(grid, x0, xi0, lambda);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const Vec2 d = grid.node(k) - x0;
            if (0.5 * lambda * dot(d, d) > refine.envelope_cutoff) f[k] = 0.0;
        }
        const auto image =
            normal_compose(w, f, RaySet::for_grid(grid, refine.ray_oversampling), Region::outer);
        const double input = l2_norm(restrict_to_disk(f, kSupportRadius));
        rep.resolutions.push_back(grid.points());
        rep.measured.push_back(input > 0.0 ? lambda * l2_norm(image) / input : 0.0);
    }
    detail::finish_probe(rep);
    return rep;
}

/// max over seeded random f of |<M f, f> - ||forward f||^2_dSigma| relative
/// to max(||forward f||^2_dSigma, ||f||^2).
inline double injectivity_identity_check(const OperatorMatrix& m, const RaySet& rays, int trials,
                                         std::uint64_t seed) {
    if (trials < 1) throw InvalidParameter("trials must be >= 1");
    if (!(rays == m.rays)) throw InvalidInput("ray set differs from the one the matrix was built on");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const auto row_pos = detail::node_positions(m.grid, m.row_nodes);
    const double h2 = m.grid.spacing() * m.grid.spacing();
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        GridFunction f(m.grid);
        for (auto k : m.col_nodes) f[k] = unif(rng);
        const Eigen::VectorXd mf = m.values * m.column_input(f);
        double pairing = 0.0;
        for (auto k : m.col_nodes) pairing += mf[row_pos[k]] * f[k];
        pairing *= h2;
        const double image = std::pow(dsigma_norm(forward(m.weight, f, rays)), 2);
        const double scale = std::max({image, std::pow(l2_norm(f), 2), 1e-300});
        worst = std::max(worst, std::abs(pairing - image) / scale);
    }
    return worst;
}

inline double injectivity_identity_check(const OperatorMatrix& m, int trials, std::uint64_t seed) {
    return injectivity_identity_check(m, m.rays, trials, seed);
}

}  // namespace linstab
