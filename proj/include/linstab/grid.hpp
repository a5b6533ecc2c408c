#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

#include "linstab/errors.hpp"

namespace linstab {

struct Vec2 {
    double x1 = 0.0;
    double x2 = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
    friend Vec2 operator-(Vec2 a) { return {-a.x1, -a.x2}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x1, s * a.x2}; }
    friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x1 * b.x1 + a.x2 * b.x2; }
inline double norm(Vec2 a) { return std::hypot(a.x1, a.x2); }
// Counter-clockwise rotation by 90 degrees.
inline Vec2 perp(Vec2 a) { return {-a.x2, a.x1}; }
inline Vec2 unit_from_angle(double phi) { return {std::cos(phi), std::sin(phi)}; }

// Radii of the support disk and of the enclosing observation disk.
inline constexpr double kSupportRadius = 1.0;
inline constexpr double kOuterRadius = 1.5;

/// Uniform periodic grid on the box [-L/2, L/2)^2 with N points per side.
/// Node (i, j) sits at (-L/2 + i h, -L/2 + j h) and is stored at i * N + j.
class Grid {
public:
    Grid(double side, int points) : side_(side), points_(points) {
        if (!(side > 0.0) || !std::isfinite(side)) {
            throw InvalidParameter("grid side length must be positive");
        }
        if (points < 8 || points % 2 != 0) {
            throw InvalidParameter("grid.N must be even >= 8");
        }
        spacing_ = side / points;
    }

    double side() const noexcept { return side_; }
    int points() const noexcept { return points_; }
    double spacing() const noexcept { return spacing_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(points_) * points_; }

    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(i) * points_ + j;
    }
    double coord(int i) const noexcept { return -0.5 * side_ + i * spacing_; }
    Vec2 node(int i, int j) const noexcept { return {coord(i), coord(j)}; }
    Vec2 node(std::size_t k) const noexcept {
        return node(static_cast<int>(k / points_), static_cast<int>(k % points_));
    }

    // Signed frequency index for DFT bin k: {0..N/2-1, -N/2..-1}.
    int frequency_index(int k) const noexcept { return k < points_ / 2 ? k : k - points_; }
    double wavenumber(int k) const noexcept {
        return 2.0 * std::numbers::pi / side_ * frequency_index(k);
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    double side_;
    int points_;
    double spacing_ = 0.0;
};

inline Grid make_grid(double side, int points) { return Grid(side, points); }

template <typename T>
concept GridScalar = std::is_same_v<T, double> || std::is_same_v<T, std::complex<double>>;

/// Scalar samples on every node of a grid.
template <GridScalar T>
class GridField {
public:
    using value_type = T;

    explicit GridField(Grid grid) : grid_(grid), values_(grid.size(), T{}) {}
    GridField(Grid grid, std::vector<T> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw InvalidInput("grid function needs exactly N^2 values");
        }
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    T& operator[](std::size_t k) { return values_[k]; }
    const T& operator[](std::size_t k) const { return values_[k]; }
    T& at(int i, int j) { return values_[grid_.index(i, j)]; }
    const T& at(int i, int j) const { return values_[grid_.index(i, j)]; }

    GridField& operator+=(const GridField& o) {
        require_same_grid(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
        return *this;
    }
    GridField& operator-=(const GridField& o) {
        require_same_grid(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
        return *this;
    }
    GridField& operator*=(T s) {
        for (auto& v : values_) v *= s;
        return *this;
    }
    friend GridField operator+(GridField a, const GridField& b) { return a += b; }
    friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
    friend GridField operator*(T s, GridField a) { return a *= s; }

    void require_same_grid(const GridField& o) const {
        if (!(o.grid_ == grid_)) throw InvalidInput("grid functions live on different grids");
    }

private:
    Grid grid_;
    std::vector<T> values_;
};

using GridFunction = GridField<double>;
using ComplexGridFunction = GridField<std::complex<double>>;

template <typename Fn>
auto sample(const Grid& grid, Fn&& fn) {
    using R = std::invoke_result_t<Fn&, Vec2>;
    GridField<R> out(grid);
    for (int i = 0; i < grid.points(); ++i) {
        for (int j = 0; j < grid.points(); ++j) out.at(i, j) = fn(grid.node(i, j));
    }
    return out;
}

inline ComplexGridFunction to_complex(const GridFunction& f) {
    ComplexGridFunction out(f.grid());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[k];
    return out;
}

inline GridFunction real_part(const ComplexGridFunction& f) {
    GridFunction out(f.grid());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[k].real();
    return out;
}

inline GridFunction imag_part(const ComplexGridFunction& f) {
    GridFunction out(f.grid());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[k].imag();
    return out;
}

/// Discrete L^2 inner product h^2 sum conj(f) g.
template <GridScalar T>
T inner(const GridField<T>& f, const GridField<T>& g) {
    f.require_same_grid(g);
    T acc{};
    for (std::size_t k = 0; k < f.size(); ++k) {
        if constexpr (std::is_same_v<T, double>) {
            acc += f[k] * g[k];
        } else {
            acc += std::conj(f[k]) * g[k];
        }
    }
    const double h = f.grid().spacing();
    return acc * (h * h);
}

template <GridScalar T>
double l2_norm(const GridField<T>& f) {
    double acc = 0.0;
    for (const auto& v : f.values()) acc += std::norm(v);
    return std::sqrt(acc) * f.grid().spacing();
}

/// Flat indices of the nodes strictly inside the centred disk of the given
/// radius, in row-major order.
inline std::vector<std::size_t> disk_nodes(const Grid& grid, double radius) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (norm(grid.node(k)) < radius) out.push_back(k);
    }
    return out;
}

template <GridScalar T>
GridField<T> restrict_to_disk(GridField<T> f, double radius) {
    const Grid& g = f.grid();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(norm(g.node(k)) < radius)) f[k] = T{};
    }
    return f;
}

template <GridScalar T>
double l2_norm_on(const GridField<T>& f, std::span<const std::size_t> nodes) {
    double acc = 0.0;
    for (auto k : nodes) acc += std::norm(f[k]);
    return std::sqrt(acc) * f.grid().spacing();
}

/// Bilinear interpolation with periodic wrap-around.
template <GridScalar T>
T interpolate(const GridField<T>& f, Vec2 x) {
    const Grid& g = f.grid();
    const double h = g.spacing();
    const int n = g.points();
    const double u = (x.x1 + 0.5 * g.side()) / h;
    const double v = (x.x2 + 0.5 * g.side()) / h;
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const double a = u - fu;
    const double b = v - fv;
    auto wrap = [n](long k) { return static_cast<int>(((k % n) + n) % n); };
    const int i0 = wrap(static_cast<long>(fu));
    const int j0 = wrap(static_cast<long>(fv));
    const int i1 = (i0 + 1) % n;
    const int j1 = (j0 + 1) % n;
    return (1 - a) * ((1 - b) * f.at(i0, j0) + b * f.at(i0, j1)) +
           a * ((1 - b) * f.at(i1, j0) + b * f.at(i1, j1));
}

}  // namespace linstab
