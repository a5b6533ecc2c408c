#pragma once

// Truncated sequence space model: A(x) = E x - (x, a) x with
// E = diag(e^{-k}) and a = (1/k), k = 1..M.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "linstab/errors.hpp"

namespace linstab::seq {

/// Entries x_1..x_M of a finitely supported sequence.
class SequenceVec {
public:
    explicit SequenceVec(std::size_t truncation) : entries_(truncation, 0.0) {
        if (truncation == 0) throw InvalidParameter("sequence truncation must be >= 1");
    }
    explicit SequenceVec(std::vector<double> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw InvalidParameter("sequence truncation must be >= 1");
        for (double v : entries_) {
            if (!std::isfinite(v)) throw InvalidInput("sequence entries must be finite");
        }
    }

    static SequenceVec unit(std::size_t k, std::size_t truncation) {
        SequenceVec e(truncation);
        e.at(k) = 1.0;
        return e;
    }

    std::size_t truncation() const noexcept { return entries_.size(); }
    // 1-based access, matching the sequence indexing.
    double& at(std::size_t k) { return entries_.at(k - 1); }
    double at(std::size_t k) const { return entries_.at(k - 1); }
    std::span<const double> entries() const noexcept { return entries_; }

private:
    std::vector<double> entries_;
};

inline void require_same_truncation(const SequenceVec& a, const SequenceVec& b) {
    if (a.truncation() != b.truncation()) {
        throw InvalidInput("sequence truncations differ");
    }
}

/// (x, a) with a_k = 1/k.
inline double pair_with_harmonic(const SequenceVec& x) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= x.truncation(); ++k) acc += x.at(k) / static_cast<double>(k);
    return acc;
}

inline SequenceVec apply_decay(const SequenceVec& x) {
    SequenceVec out(x.truncation());
    for (std::size_t k = 1; k <= x.truncation(); ++k) {
        out.at(k) = std::exp(-static_cast<double>(k)) * x.at(k);
    }
    return out;
}

inline SequenceVec seq_map(const SequenceVec& x) {
    const double xa = pair_with_harmonic(x);
    SequenceVec out(x.truncation());
    for (std::size_t k = 1; k <= x.truncation(); ++k) {
        out.at(k) = std::exp(-static_cast<double>(k)) * x.at(k) - x.at(k) * xa;
    }
    return out;
}

/// Differential of seq_map at x0 applied to h: E h - (h, a) x0 - (x0, a) h.
inline SequenceVec seq_linearization_at(const SequenceVec& x0, const SequenceVec& h) {
    require_same_truncation(x0, h);
    const double ha = pair_with_harmonic(h);
    const double x0a = pair_with_harmonic(x0);
    SequenceVec out(h.truncation());
    for (std::size_t k = 1; k <= h.truncation(); ++k) {
        out.at(k) = std::exp(-static_cast<double>(k)) * h.at(k) - ha * x0.at(k) - x0a * h.at(k);
    }
    return out;
}

/// The nonzero zero of seq_map supported at index k: entry k e^{-k}.
inline SequenceVec counterexample(std::size_t k, std::size_t truncation) {
    if (k == 0 || k > truncation) {
        throw InvalidInput("counterexample index must satisfy 1 <= k <= M");
    }
    SequenceVec x(truncation);
    x.at(k) = static_cast<double>(k) * std::exp(-static_cast<double>(k));
    return x;
}

/// (sum k^{2s} |x_k|^2)^{1/2}.
inline double hs_norm(const SequenceVec& x, double s) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= x.truncation(); ++k) {
        const double v = x.at(k);
        if (v == 0.0) continue;
        acc += std::pow(static_cast<double>(k), 2.0 * s) * v * v;
    }
    return std::sqrt(acc);
}

inline double l2_norm(const SequenceVec& x) { return hs_norm(x, 0.0); }

struct InstabilityRatio {
    double value;       // +inf when saturated
    double log10_value;
    bool saturated;
};

/// ||e_k||_{h^s1} / ||E e_k||_{h^s2} = k^{s1-s2} e^k, evaluated in log space.
inline InstabilityRatio instability_ratio(std::size_t k, double s1, double s2) {
    if (k == 0) throw InvalidInput("instability ratio needs k >= 1");
    const double kk = static_cast<double>(k);
    const double log_value = (s1 - s2) * std::log(kk) + kk;
    const double log10_value = log_value / std::numbers::ln10;
    const bool saturated = log_value >= std::log(std::numeric_limits<double>::max());
    return {saturated ? std::numeric_limits<double>::infinity() : std::exp(log_value),
            log10_value, saturated};
}

}  // namespace linstab::seq
