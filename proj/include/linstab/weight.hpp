#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "linstab/errors.hpp"
#include "linstab/grid.hpp"

namespace linstab {

struct ConstantWeight {
    double value = 1.0;
};

/// Vanishes on the double cone of directions within `half_width` of the axis
/// at angle `center` (mod pi), rises to 1 through a C^1 smoothstep of width
/// `taper` outside it.
struct LimitedAngleWeight {
    double center = std::numbers::pi / 2;
    double half_width = std::numbers::pi / 6;
    double taper = 0.1;
};

/// Samples on the nodes of `grid` times `n_angles` equispaced directions,
/// interpolated bilinearly in x and linearly (periodically) in the angle.
struct TabulatedWeight {
    Grid grid;
    int n_angles;
    std::vector<double> values;  // values[node * n_angles + a]
};

/// amplitude * exp(-|x - center|^2 / (2 width^2)) * (1 + anisotropy cos(phi - direction)).
struct BumpWeight {
    Vec2 center{};
    double width = 0.3;
    double amplitude = 1.0;
    double anisotropy = 0.0;
    double direction = 0.0;
};

class WeightSpec;

struct PerturbedWeight {
    std::shared_ptr<const WeightSpec> base;
    std::shared_ptr<const WeightSpec> delta;
    double eps;
};

struct FunctionWeight {
    std::function<double(Vec2, Vec2)> fn;
    std::string name;
};

/// The weight w(x, theta) of the transform: a continuous function of the
/// point x and the unit direction theta.
class WeightSpec {
public:
    using Variant = std::variant<ConstantWeight, LimitedAngleWeight, TabulatedWeight, BumpWeight,
                                 PerturbedWeight, FunctionWeight>;

    WeightSpec() : kind_(ConstantWeight{}) {}

    static WeightSpec constant(double c0) { return WeightSpec(ConstantWeight{c0}); }

    static WeightSpec limited_angle(double center, double half_width, double taper) {
        if (!(taper > 0.0)) throw InvalidParameter("limited-angle taper must be positive");
        if (!(half_width >= 0.0) || half_width + taper >= std::numbers::pi / 2) {
            throw InvalidParameter("limited-angle cone must leave visible directions");
        }
        return WeightSpec(LimitedAngleWeight{center, half_width, taper});
    }

    static WeightSpec tabulated(Grid grid, int n_angles, std::vector<double> values) {
        if (n_angles < 1) throw InvalidParameter("tabulated weight needs n_angles >= 1");
        if (values.size() != grid.size() * static_cast<std::size_t>(n_angles)) {
            throw InvalidInput("tabulated weight table has the wrong size");
        }
        for (double v : values) {
            if (!std::isfinite(v)) throw InvalidInput("tabulated weight must be finite");
        }
        return WeightSpec(TabulatedWeight{grid, n_angles, std::move(values)});
    }

    /// Samples fn(x, theta) on the table grid and angles.
    template <typename Fn>
    static WeightSpec tabulate(Grid grid, int n_angles, Fn&& fn) {
        std::vector<double> values(grid.size() * static_cast<std::size_t>(n_angles));
        for (std::size_t k = 0; k < grid.size(); ++k) {
            for (int a = 0; a < n_angles; ++a) {
                const double phi = 2.0 * std::numbers::pi * a / n_angles;
                values[k * n_angles + a] = fn(grid.node(k), unit_from_angle(phi));
            }
        }
        return tabulated(grid, n_angles, std::move(values));
    }

    static WeightSpec bump(Vec2 center, double width, double amplitude, double anisotropy = 0.0,
                           double direction = 0.0) {
        if (!(width > 0.0)) throw InvalidParameter("bump width must be positive");
        return WeightSpec(BumpWeight{center, width, amplitude, anisotropy, direction});
    }

    static WeightSpec perturbed(const WeightSpec& base, const WeightSpec& delta, double eps) {
        return WeightSpec(PerturbedWeight{std::make_shared<const WeightSpec>(base),
                                          std::make_shared<const WeightSpec>(delta), eps});
    }

    static WeightSpec from_function(std::function<double(Vec2, Vec2)> fn, std::string name) {
        return WeightSpec(FunctionWeight{std::move(fn), std::move(name)});
    }

    const Variant& kind() const noexcept { return kind_; }

    bool is_constant() const noexcept { return std::holds_alternative<ConstantWeight>(kind_); }

    double operator()(Vec2 x, Vec2 theta) const {
        return std::visit([&](const auto& k) { return eval(k, x, theta); }, kind_);
    }

    /// Stable text identifying the weight, recorded in every report.
    std::string fingerprint() const {
        return std::visit([](const auto& k) { return describe(k); }, kind_);
    }

private:
    explicit WeightSpec(Variant v) : kind_(std::move(v)) {}

    static double angle_of(Vec2 theta) { return std::atan2(theta.x2, theta.x1); }

    static double eval(const ConstantWeight& k, Vec2, Vec2) { return k.value; }

    static double eval(const LimitedAngleWeight& k, Vec2, Vec2 theta) {
        constexpr double pi = std::numbers::pi;
        // Distance to the cone axis modulo pi, in [0, pi/2].
        double d = std::fmod(std::abs(angle_of(theta) - k.center), pi);
        d = std::min(d, pi - d);
        if (d <= k.half_width) return 0.0;
        if (d >= k.half_width + k.taper) return 1.0;
        const double t = (d - k.half_width) / k.taper;
        return t * t * (3.0 - 2.0 * t);
    }

    static double eval(const TabulatedWeight& k, Vec2 x, Vec2 theta) {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        double phi = angle_of(theta);
        if (phi < 0.0) phi += two_pi;
        const double u = phi / two_pi * k.n_angles;
        const double fu = std::floor(u);
        const double frac = u - fu;
        const int a0 = static_cast<int>(fu) % k.n_angles;
        const int a1 = (a0 + 1) % k.n_angles;
        const Grid& g = k.grid;
        const double h = g.spacing();
        const int n = g.points();
        const double p = (x.x1 + 0.5 * g.side()) / h;
        const double q = (x.x2 + 0.5 * g.side()) / h;
        const double fp = std::floor(p);
        const double fq = std::floor(q);
        const double a = p - fp;
        const double b = q - fq;
        auto wrap = [n](long i) { return static_cast<int>(((i % n) + n) % n); };
        const int i0 = wrap(static_cast<long>(fp)), i1 = (i0 + 1) % n;
        const int j0 = wrap(static_cast<long>(fq)), j1 = (j0 + 1) % n;
        auto at = [&](int i, int j) {
            const std::size_t base = g.index(i, j) * static_cast<std::size_t>(k.n_angles);
            return (1.0 - frac) * k.values[base + a0] + frac * k.values[base + a1];
        };
        return (1 - a) * ((1 - b) * at(i0, j0) + b * at(i0, j1)) +
               a * ((1 - b) * at(i1, j0) + b * at(i1, j1));
    }

    static double eval(const BumpWeight& k, Vec2 x, Vec2 theta) {
        const Vec2 d = x - k.center;
        const double spatial = std::exp(-dot(d, d) / (2.0 * k.width * k.width));
        const double angular = 1.0 + k.anisotropy * std::cos(angle_of(theta) - k.direction);
        return k.amplitude * spatial * angular;
    }

    static double eval(const PerturbedWeight& k, Vec2 x, Vec2 theta) {
        return (*k.base)(x, theta) + k.eps * (*k.delta)(x, theta);
    }

    static double eval(const FunctionWeight& k, Vec2 x, Vec2 theta) { return k.fn(x, theta); }

    static std::string describe(const ConstantWeight& k) {
        std::ostringstream os;
        os.precision(17);
        os << "constant(c0=" << k.value << ")";
        return os.str();
    }
    static std::string describe(const LimitedAngleWeight& k) {
        std::ostringstream os;
        os.precision(17);
        os << "limited_angle(center=" << k.center << ",half_width=" << k.half_width
           << ",taper=" << k.taper << ")";
        return os.str();
    }
    static std::string describe(const TabulatedWeight& k) {
        std::string bytes(reinterpret_cast<const char*>(k.values.data()),
                          k.values.size() * sizeof(double));
        std::ostringstream os;
        os << "tabulated(N=" << k.grid.points() << ",n_angles=" << k.n_angles
           << ",hash=" << std::hex << std::hash<std::string_view>{}(bytes) << ")";
        return os.str();
    }
    static std::string describe(const BumpWeight& k) {
        std::ostringstream os;
        os.precision(17);
        os << "bump(center=(" << k.center.x1 << "," << k.center.x2 << "),width=" << k.width
           << ",amplitude=" << k.amplitude << ",anisotropy=" << k.anisotropy
           << ",direction=" << k.direction << ")";
        return os.str();
    }
    static std::string describe(const PerturbedWeight& k) {
        std::ostringstream os;
        os.precision(17);
        os << k.base->fingerprint() << "+" << k.eps << "*" << k.delta->fingerprint();
        return os.str();
    }
    static std::string describe(const FunctionWeight& k) { return "function(" + k.name + ")"; }

    Variant kind_;
};

}  // namespace linstab
