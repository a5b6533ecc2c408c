#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "linstab/errors.hpp"
#include "linstab/grid.hpp"
#include "linstab/weight.hpp"

namespace linstab {

/// One oriented line entering the outer disk: entry point on the circle of
/// radius kOuterRadius, inward direction, and its share of the boundary measure.
struct Ray {
    Vec2 entry;
    Vec2 direction;
    double offset;          // signed distance of the line from the origin
    double cos_incidence;   // |theta . nu(entry)|
    double boundary_cell;   // arclength of the boundary cell owned by the ray
    double measure;         // cos_incidence * boundary_cell * d_angle
};

/// Parallel-beam family over the full circle of directions: angles
/// 2 pi j / n_angles, offsets at the midpoints of n_offsets cells of
/// (-rho_1, rho_1), midpoint quadrature of step t_step along every line.
class RaySet {
public:
    RaySet(int n_angles, int n_offsets, double t_step)
        : n_angles_(n_angles), n_offsets_(n_offsets), t_step_(t_step) {
        if (n_angles < 1 || n_offsets < 1) {
            throw InvalidParameter("ray set needs n_angles >= 1 and n_offsets >= 1");
        }
        if (!(t_step > 0.0) || !std::isfinite(t_step)) {
            throw InvalidParameter("t_step must be positive");
        }
        constexpr double rho = kOuterRadius;
        const double d_angle = 2.0 * std::numbers::pi / n_angles;
        const double d_offset = 2.0 * rho / n_offsets;
        rays_.reserve(static_cast<std::size_t>(n_angles) * n_offsets);
        for (int a = 0; a < n_angles; ++a) {
            const Vec2 theta = unit_from_angle(a * d_angle);
            for (int o = 0; o < n_offsets; ++o) {
                const double p = -rho + (o + 0.5) * d_offset;
                const double half_chord = std::sqrt(rho * rho - p * p);
                const double cos_inc = half_chord / rho;
                // Uniform offsets sample the boundary with cells of arclength
                // d_offset / cos_inc, so the dSigma weight reduces to d_offset d_angle.
                const double cell = d_offset / cos_inc;
                rays_.push_back({p * perp(theta) - half_chord * theta, theta, p, cos_inc, cell,
                                 cos_inc * cell * d_angle});
            }
        }
    }

    /// Angles and offsets scaled with the grid so the discrete operator
    /// refines together with the grid.
    static RaySet for_grid(const Grid& grid, double oversampling = 1.0) {
        const double h = grid.spacing();
        const int n_offsets = static_cast<int>(std::ceil(2.0 * kOuterRadius / h * oversampling));
        const int n_angles =
            4 * static_cast<int>(std::ceil(std::numbers::pi * kOuterRadius / h * oversampling / 4));
        return RaySet(n_angles, n_offsets, 0.5 * h / oversampling);
    }

    int n_angles() const noexcept { return n_angles_; }
    int n_offsets() const noexcept { return n_offsets_; }
    double t_step() const noexcept { return t_step_; }
    std::size_t size() const noexcept { return rays_.size(); }
    const Ray& operator[](std::size_t r) const { return rays_[r]; }
    std::span<const Ray> rays() const noexcept { return rays_; }

    friend bool operator==(const RaySet& a, const RaySet& b) {
        return a.n_angles_ == b.n_angles_ && a.n_offsets_ == b.n_offsets_ &&
               a.t_step_ == b.t_step_;
    }

    /// Sample indices s whose midpoint entry + (s + 1/2) t_step theta lies
    /// strictly inside the centred disk of the given radius.
    std::pair<long, long> sample_range(const Ray& ray, double radius) const {
        if (std::abs(ray.offset) >= radius) return {0, -1};
        const double foot = std::sqrt(kOuterRadius * kOuterRadius - ray.offset * ray.offset);
        const double half = std::sqrt(radius * radius - ray.offset * ray.offset);
        const long lo = static_cast<long>(std::ceil((foot - half) / t_step_ - 0.5));
        const long hi = static_cast<long>(std::floor((foot + half) / t_step_ - 0.5));
        return {lo, hi};
    }

private:
    int n_angles_;
    int n_offsets_;
    double t_step_;
    std::vector<Ray> rays_;
};

template <GridScalar T>
struct BasicSinogram {
    RaySet rays;
    std::vector<T> values;
};

using Sinogram = BasicSinogram<double>;
using ComplexSinogram = BasicSinogram<std::complex<double>>;

/// Discrete L^2(dSigma) inner product sum_r measure_r conj(a_r) b_r.
template <GridScalar T>
T dsigma_inner(const BasicSinogram<T>& a, const BasicSinogram<T>& b) {
    if (!(a.rays == b.rays) || a.values.size() != b.values.size()) {
        throw InvalidInput("sinograms live on different ray sets");
    }
    T acc{};
    for (std::size_t r = 0; r < a.values.size(); ++r) {
        if constexpr (std::is_same_v<T, double>) {
            acc += a.rays[r].measure * a.values[r] * b.values[r];
        } else {
            acc += a.rays[r].measure * std::conj(a.values[r]) * b.values[r];
        }
    }
    return acc;
}

template <GridScalar T>
double dsigma_norm(const BasicSinogram<T>& g) {
    return std::sqrt(std::abs(dsigma_inner(g, g)));
}

/// Which disk a back-projection is evaluated on.
enum class Region { support, outer };

inline double region_radius(Region r) {
    return r == Region::support ? kSupportRadius : kOuterRadius;
}

namespace detail {

// Axis-aligned box in physical coordinates.
struct Box {
    Vec2 lo;
    Vec2 hi;
};

// Bounding box of the bilinear footprint of the nonzero values of f.
template <GridScalar T>
std::optional<Box> nonzero_footprint(const GridField<T>& f) {
    const Grid& g = f.grid();
    int imin = g.points(), imax = -1, jmin = g.points(), jmax = -1;
    for (int i = 0; i < g.points(); ++i) {
        for (int j = 0; j < g.points(); ++j) {
            if (f.at(i, j) == T{}) continue;
            imin = std::min(imin, i);
            imax = std::max(imax, i);
            jmin = std::min(jmin, j);
            jmax = std::max(jmax, j);
        }
    }
    if (imax < 0) return std::nullopt;
    const double h = g.spacing();
    return Box{{g.coord(imin) - h, g.coord(jmin) - h}, {g.coord(imax) + h, g.coord(jmax) + h}};
}

// Clips a sample index range to the samples whose midpoint lies in `box`.
inline std::pair<long, long> clip_to_box(const Ray& ray, double dt, std::pair<long, long> range,
                                         const Box& box) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    const double origin[2] = {ray.entry.x1, ray.entry.x2};
    const double dir[2] = {ray.direction.x1, ray.direction.x2};
    const double lo[2] = {box.lo.x1, box.lo.x2};
    const double hi[2] = {box.hi.x1, box.hi.x2};
    for (int d = 0; d < 2; ++d) {
        if (std::abs(dir[d]) < 1e-300) {
            if (origin[d] < lo[d] || origin[d] > hi[d]) return {0, -1};
            continue;
        }
        double a = (lo[d] - origin[d]) / dir[d];
        double b = (hi[d] - origin[d]) / dir[d];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
    }
    if (t1 < t0) return {0, -1};
    const long lo_s = static_cast<long>(std::floor(t0 / dt - 0.5));
    const long hi_s = static_cast<long>(std::ceil(t1 / dt - 0.5));
    return {std::max(range.first, lo_s), std::min(range.second, hi_s)};
}

// Visits every bilinear stencil touched by the samples of `ray` inside the
// disk of `radius` (and inside `clip` when given):
// fn(i0, j0, a, b, weight_times_step).
template <typename Fn>
void walk_ray(const RaySet& rays, const Ray& ray, const Grid& grid, const WeightSpec& w,
              double radius, Fn&& fn, const std::optional<Box>& clip = std::nullopt) {
    auto range = rays.sample_range(ray, radius);
    if (clip) range = clip_to_box(ray, rays.t_step(), range, *clip);
    const auto [lo, hi] = range;
    if (hi < lo) return;
    const double h = grid.spacing();
    const double half_side = 0.5 * grid.side();
    const double dt = rays.t_step();
    const int n = grid.points();
    const bool constant = w.is_constant();
    const double c0 = constant ? w(Vec2{}, ray.direction) : 0.0;
    for (long s = lo; s <= hi; ++s) {
        const Vec2 x = ray.entry + ((s + 0.5) * dt) * ray.direction;
        const double u = (x.x1 + half_side) / h;
        const double v = (x.x2 + half_side) / h;
        const double fu = std::floor(u);
        const double fv = std::floor(v);
        const int i0 = static_cast<int>(fu);
        const int j0 = static_cast<int>(fv);
        if (i0 < 0 || j0 < 0 || i0 + 1 >= n || j0 + 1 >= n) continue;
        const double weight = (constant ? c0 : w(x, ray.direction)) * dt;
        if (weight == 0.0) continue;
        fn(i0, j0, u - fu, v - fv, weight);
    }
}

inline double forward_reach(const Grid& grid) { return kSupportRadius + 2.0 * grid.spacing(); }
inline double backward_reach(const Grid& grid, Region region) {
    return region_radius(region) + 2.0 * grid.spacing();
}

}  // namespace detail

/// Weighted line integrals of f (restricted to the support disk) along every
/// ray, with the weight evaluated at the moving point.
template <GridScalar T>
BasicSinogram<T> forward(const WeightSpec& w, const GridField<T>& f, const RaySet& rays) {
    const GridField<T> masked = restrict_to_disk(f, kSupportRadius);
    const Grid& grid = f.grid();
    BasicSinogram<T> out{rays, std::vector<T>(rays.size(), T{})};
    const double reach = detail::forward_reach(grid);
    const auto footprint = detail::nonzero_footprint(masked);
    if (!footprint) return out;
    for (std::size_t r = 0; r < rays.size(); ++r) {
        T acc{};
        detail::walk_ray(rays, rays[r], grid, w, reach,
                         [&](int i, int j, double a, double b, double weight) {
                             const T val = (1 - a) * ((1 - b) * masked.at(i, j) +
                                                      b * masked.at(i, j + 1)) +
                                           a * ((1 - b) * masked.at(i + 1, j) +
                                                b * masked.at(i + 1, j + 1));
                             acc += weight * val;
                         },
                         footprint);
        out.values[r] = acc;
    }
    return out;
}

/// Transpose of `forward` for the pairings h^2 sum f g and dSigma, evaluated
/// on the nodes of `region`. With Region::support it is the exact adjoint.
template <GridScalar T>
GridField<T> adjoint(const WeightSpec& w, const BasicSinogram<T>& g, const Grid& grid,
                     Region region = Region::support) {
    if (g.values.size() != g.rays.size()) {
        throw InvalidInput("sinogram does not match its ray set");
    }
    const RaySet& rays = g.rays;
    GridField<T> out(grid);
    const double reach = detail::backward_reach(grid, region);
    for (std::size_t r = 0; r < rays.size(); ++r) {
        if (g.values[r] == T{}) continue;
        const T scaled = rays[r].measure * g.values[r];
        detail::walk_ray(rays, rays[r], grid, w, reach,
                         [&](int i, int j, double a, double b, double weight) {
                             const T v = weight * scaled;
                             out.at(i, j) += ((1 - a) * (1 - b)) * v;
                             out.at(i, j + 1) += ((1 - a) * b) * v;
                             out.at(i + 1, j) += (a * (1 - b)) * v;
                             out.at(i + 1, j + 1) += (a * b) * v;
                         });
    }
    const double h = grid.spacing();
    out *= T(1.0 / (h * h));
    return restrict_to_disk(std::move(out), region_radius(region));
}

/// adjoint(forward(f)).
template <GridScalar T>
GridField<T> normal_compose(const WeightSpec& w, const GridField<T>& f, const RaySet& rays,
                            Region region = Region::support) {
    return adjoint(w, forward(w, f, rays), f.grid(), region);
}

/// Two-term antipodal kernel weight with u = (x - y)/|x - y|.
inline double weight_W(const WeightSpec& w, Vec2 x, Vec2 y) {
    const Vec2 d = x - y;
    const double r = norm(d);
    if (r == 0.0) throw SingularPoint("kernel weight is undefined on the diagonal");
    const Vec2 u = (1.0 / r) * d;
    return w(x, -u) * w(y, -u) + w(x, u) * w(y, u);
}

/// Integral of W(x, x; u) / |x - y| over the grid cell centred at x, in
/// polar coordinates around x (exact radial integration, angular midpoint rule).
inline double diagonal_cell_integral(const WeightSpec& w, Vec2 x, double h, int n_angular = 256) {
    const double d_phi = 2.0 * std::numbers::pi / n_angular;
    double acc = 0.0;
    for (int k = 0; k < n_angular; ++k) {
        const double phi = (k + 0.5) * d_phi;
        const Vec2 u = unit_from_angle(phi);
        const double reach = 0.5 * h / std::max(std::abs(u.x1), std::abs(u.x2));
        const double wu = w(x, u);
        const double wm = w(x, -u);
        acc += (wm * wm + wu * wu) * reach;
    }
    return acc * d_phi;
}

/// c * sum_y W(x,y) f(y) h^2 / |x - y| over the support nodes, with the cell
/// containing x integrated in polar coordinates. Evaluated on `region`.
template <GridScalar T>
GridField<T> normal_kernel(const WeightSpec& w, const GridField<T>& f, double c_cal,
                           Region region = Region::support) {
    const Grid& grid = f.grid();
    const double h = grid.spacing();
    const auto sources = disk_nodes(grid, kSupportRadius);
    const auto targets = disk_nodes(grid, region_radius(region));
    const bool constant = w.is_constant();
    const double c0 = constant ? w(Vec2{}, Vec2{1.0, 0.0}) : 0.0;
    const double const_diag =
        constant ? 2.0 * c0 * c0 * 4.0 * h * std::log(1.0 + std::numbers::sqrt2) : 0.0;
    GridField<T> out(grid);
    for (auto xk : targets) {
        const Vec2 x = grid.node(xk);
        T acc{};
        for (auto yk : sources) {
            if (f[yk] == T{}) continue;
            if (yk == xk) {
                const double diag = constant ? const_diag : diagonal_cell_integral(w, x, h);
                acc += diag * f[yk];
                continue;
            }
            const Vec2 y = grid.node(yk);
            const double r = norm(x - y);
            const double W = constant ? 2.0 * c0 * c0 : weight_W(w, x, y);
            acc += (W * h * h / r) * f[yk];
        }
        out[xk] = c_cal * acc;
    }
    return out;
}

/// Least-squares constant c minimising sum ||c K f - N f||^2 over the given
/// functions, where K is the unit-constant kernel quadrature and N the
/// discrete composition, both measured on the outer disk.
template <GridScalar T>
double calibrate_kernel_constant(const WeightSpec& w, std::span<const GridField<T>> fs,
                                 const RaySet& rays) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& f : fs) {
        const auto k = normal_kernel(w, f, 1.0, Region::outer);
        const auto n = normal_compose(w, f, rays, Region::outer);
        num += std::real(inner(k, n));
        den += std::real(inner(k, k));
    }
    if (den == 0.0) throw InvalidInput("calibration functions are all zero");
    return num / den;
}

/// Fourier multiplier of 1/|x| in the plane is 2 pi / |xi|; the symbol
/// normalisation for a kernel constant c is therefore 2 pi c.
inline double symbol_normalization(double kernel_constant = 1.0) {
    return 2.0 * std::numbers::pi * kernel_constant;
}

/// kappa (|w(x, theta_perp)|^2 + |w(x, -theta_perp)|^2) / |xi|.
inline double principal_symbol(const WeightSpec& w, Vec2 x, Vec2 xi,
                               double kappa = symbol_normalization()) {
    const double r = norm(xi);
    if (!(r > 0.0)) throw InvalidInput("principal symbol needs a nonzero covector");
    const Vec2 tp = perp((1.0 / r) * xi);
    const double a = w(x, tp);
    const double b = w(x, -tp);
    return kappa * (a * a + b * b) / r;
}

struct EllipticityResult {
    double margin;
    Vec2 witness_point;
    Vec2 witness_covector;
};

/// min over x on a density x density lattice of the outer disk and over
/// 4*density unit covectors of |w(x, zeta_perp)|^2 + |w(x, -zeta_perp)|^2.
inline EllipticityResult ellipticity_margin(const WeightSpec& w, int sample_density) {
    if (sample_density < 8) throw InvalidParameter("sample_density must be >= 8");
    const int n_dirs = 4 * sample_density;
    EllipticityResult best{std::numeric_limits<double>::infinity(), {}, {}};
    const double step = 2.0 * kOuterRadius / (sample_density - 1);
    for (int i = 0; i < sample_density; ++i) {
        for (int j = 0; j < sample_density; ++j) {
            const Vec2 x{-kOuterRadius + i * step, -kOuterRadius + j * step};
            if (norm(x) > kOuterRadius) continue;
            for (int k = 0; k < n_dirs; ++k) {
                const Vec2 zeta = unit_from_angle(2.0 * std::numbers::pi * k / n_dirs);
                const Vec2 tp = perp(zeta);
                const double a = w(x, tp);
                const double b = w(x, -tp);
                const double v = a * a + b * b;
                if (v < best.margin) best = {v, x, zeta};
            }
        }
    }
    return best;
}

}  // namespace linstab
