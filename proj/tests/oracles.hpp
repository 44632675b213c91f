// Test-only reference implementations, deliberately written along different
// code paths than the library so they can serve as independent oracles.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracles {

/// Chi-squared critical value via the Wilson-Hilferty cube approximation.
inline double chi_squared_critical(std::size_t df, double alpha) {
    // Standard-normal quantile by bisection on erfc.
    const double p = 1.0 - alpha;
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
        (cdf < p ? lo : hi) = mid;
    }
    const double z = 0.5 * (lo + hi);
    const double d = static_cast<double>(df);
    const double a = 2.0 / (9.0 * d);
    const double t = 1.0 - a + z * std::sqrt(a);
    return d * t * t * t;
}

/// Softmax cross-entropy in extended precision, no log-sum-exp trick.
inline double reference_level_nll(const std::vector<double>& logits, std::size_t target) {
    long double denom = 0.0L;
    for (double x : logits) denom += std::exp(static_cast<long double>(x));
    const long double p = std::exp(static_cast<long double>(logits[target])) / denom;
    return static_cast<double>(-std::log(p));
}

/// Brute-force scalar quantizer: enumerates every finest cell of an
/// L-level/B-bin hierarchy in lexicographic order and returns the index
/// vector of the cell containing v, by scanning cell bounds directly.
inline std::vector<std::size_t> brute_force_cell(double v, double low, double high,
                                                 std::size_t levels, std::size_t bins) {
    std::size_t cells = 1;
    for (std::size_t l = 0; l < levels; ++l) cells *= bins;
    for (std::size_t rank = 0; rank < cells; ++rank) {
        // Decode rank into per-level indices, then descend for bounds.
        std::vector<std::size_t> idx(levels);
        std::size_t r = rank;
        for (std::size_t l = levels; l-- > 0;) {
            idx[l] = r % bins;
            r /= bins;
        }
        double lo = low, hi = high;
        for (std::size_t l = 0; l < levels; ++l) {
            const double width = (hi - lo) / static_cast<double>(bins);
            const double nlo = lo + static_cast<double>(idx[l]) * width;
            const double nhi = (idx[l] + 1 == bins) ? hi : lo + static_cast<double>(idx[l] + 1) * width;
            lo = nlo;
            hi = nhi;
        }
        if (v >= lo && v < hi) return idx;
    }
    return {};
}

} // namespace oracles
