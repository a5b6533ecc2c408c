#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "linstab/errors.hpp"
#include "linstab/grid.hpp"

namespace linstab {

/// DFT coefficients of a grid function, scaled by L/N^2 so that the plain sum
/// of |c|^2 equals the box L^2 norm squared.
struct SpectralField {
    Grid grid;
    std::vector<std::complex<double>> coefficients;

    const std::complex<double>& at(int k1, int k2) const {
        return coefficients[grid.index(k1, k2)];
    }
};

namespace detail {

inline void fft2(std::vector<std::complex<double>>& data, int n, bool inverse) {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> line(n), out(n);
    auto pass = [&](auto&& load, auto&& store) {
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) line[c] = load(r, c);
            if (inverse) {
                fft.inv(out, line);
            } else {
                fft.fwd(out, line);
            }
            for (int c = 0; c < n; ++c) store(r, c, out[c]);
        }
    };
    const auto at = [&](int i, int j) -> std::complex<double>& {
        return data[static_cast<std::size_t>(i) * n + j];
    };
    pass([&](int r, int c) { return at(r, c); },
         [&](int r, int c, std::complex<double> v) { at(r, c) = v; });
    pass([&](int r, int c) { return at(c, r); },
         [&](int r, int c, std::complex<double> v) { at(c, r) = v; });
}

template <GridScalar T>
void require_finite(const GridField<T>& f) {
    for (const auto& v : f.values()) {
        if (!std::isfinite(std::real(v)) || !std::isfinite(std::imag(v))) {
            throw InvalidInput("grid function has non-finite values");
        }
    }
}

}  // namespace detail

template <GridScalar T>
SpectralField to_spectral(const GridField<T>& f) {
    const Grid& g = f.grid();
    const int n = g.points();
    std::vector<std::complex<double>> data(f.values().begin(), f.values().end());
    detail::fft2(data, n, false);
    const double scale = g.side() / (static_cast<double>(n) * n);
    for (auto& c : data) c *= scale;
    return {g, std::move(data)};
}

inline ComplexGridFunction from_spectral(const SpectralField& s) {
    const Grid& g = s.grid;
    const int n = g.points();
    std::vector<std::complex<double>> data = s.coefficients;
    detail::fft2(data, n, true);  // each inverse pass divides by n
    const double scale = static_cast<double>(n) * n / g.side();
    for (auto& c : data) c *= scale;
    return ComplexGridFunction(g, std::move(data));
}

/// |xi|^2 for every lattice frequency, in the same order as the coefficients.
inline std::vector<double> frequency_norms_squared(const Grid& g) {
    const int n = g.points();
    std::vector<double> out(g.size());
    for (int a = 0; a < n; ++a) {
        const double k1 = g.wavenumber(a);
        for (int b = 0; b < n; ++b) {
            const double k2 = g.wavenumber(b);
            out[g.index(a, b)] = k1 * k1 + k2 * k2;
        }
    }
    return out;
}

inline double sobolev_norm(const SpectralField& s, double order) {
    const auto xi2 = frequency_norms_squared(s.grid);
    double acc = 0.0;
    for (std::size_t k = 0; k < xi2.size(); ++k) {
        acc += std::pow(1.0 + xi2[k], order) * std::norm(s.coefficients[k]);
    }
    return std::sqrt(acc);
}

/// (sum (1+|xi|^2)^s |f^(xi)|^2)^{1/2}; order 0 is the box L^2 norm.
template <GridScalar T>
double sobolev_norm(const GridField<T>& f, double order) {
    detail::require_finite(f);
    return sobolev_norm(to_spectral(f), order);
}

namespace detail {

// Central difference stencils of second-order accuracy, offsets -2..2.
inline const std::array<double, 5>& central_stencil(int order) {
    static const std::array<std::array<double, 5>, 5> table{{
        {0.0, 0.0, 1.0, 0.0, 0.0},
        {0.0, -0.5, 0.0, 0.5, 0.0},
        {0.0, 1.0, -2.0, 1.0, 0.0},
        {-0.5, 1.0, 0.0, -1.0, 0.5},
        {1.0, -4.0, 6.0, -4.0, 1.0},
    }};
    return table[order];
}

}  // namespace detail

/// Max over nodes of |f| and every periodic central-difference partial of
/// total order <= k.
template <GridScalar T>
double ck_norm(const GridField<T>& f, int k) {
    if (k < 0 || k > 4) throw UnsupportedOrder("C^k norm supports 0 <= k <= 4");
    detail::require_finite(f);
    const Grid& g = f.grid();
    const int n = g.points();
    const double h = g.spacing();
    auto wrap = [n](int i) { return ((i % n) + n) % n; };
    double best = 0.0;
    for (int a = 0; a <= k; ++a) {
        for (int b = 0; a + b <= k; ++b) {
            const auto& sa = detail::central_stencil(a);
            const auto& sb = detail::central_stencil(b);
            const double scale = std::pow(h, -(a + b));
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    T acc{};
                    for (int p = 0; p < 5; ++p) {
                        if (sa[p] == 0.0) continue;
                        for (int q = 0; q < 5; ++q) {
                            if (sb[q] == 0.0) continue;
                            acc += sa[p] * sb[q] * f.at(wrap(i + p - 2), wrap(j + q - 2));
                        }
                    }
                    best = std::max(best, std::abs(acc) * scale);
                }
            }
        }
    }
    return best;
}

/// ||f||_{H^s} / (||f||_{H^s1}^a1 ||f||_{H^s2}^a2) with s = a1 s1 + a2 s2.
/// Never exceeds 1 on the lattice (Hoelder's inequality on the spectral sum).
template <GridScalar T>
double interpolation_check(const GridField<T>& f, double s1, double s2, double alpha1) {
    if (!(alpha1 >= 0.0 && alpha1 <= 1.0)) {
        throw InvalidParameter("interpolation weight must lie in [0, 1]");
    }
    if (s1 == s2 && alpha1 != 0.0 && alpha1 != 1.0) {
        throw InvalidParameter("interpolation orders must differ");
    }
    detail::require_finite(f);
    const double alpha2 = 1.0 - alpha1;
    const SpectralField spec = to_spectral(f);
    const double n1 = sobolev_norm(spec, s1);
    if (n1 == 0.0) return 1.0;
    const double n2 = sobolev_norm(spec, s2);
    const double mid = sobolev_norm(spec, alpha1 * s1 + alpha2 * s2);
    return mid / (std::pow(n1, alpha1) * std::pow(n2, alpha2));
}

}  // namespace linstab
