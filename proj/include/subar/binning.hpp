#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "subar/common.hpp"

namespace subar {

// ---------------------------------------------------------------------------
// Hierarchical coarse-to-fine binning
// ---------------------------------------------------------------------------

/// Extents and shape of the coarse-to-fine discretization: L levels of B bins
/// each over [low, high), for a finest resolution of (high-low)/B^L.
struct BinningSpec {
    double low = 0.0;
    double high = 1.0;
    std::size_t levels = 3;
    std::size_t bins = 12;

    void validate() const {
        require(low < high, "binning extent invalid: low=", low, " >= high=", high);
        require(levels >= 1, "binning needs at least 1 level");
        require(bins >= 2, "binning needs at least 2 bins per level");
    }

    std::size_t cells() const {
        std::size_t n = 1;
        for (std::size_t l = 0; l < levels; ++l) n *= bins;
        return n;
    }

    double finest_width() const { return (high - low) / static_cast<double>(cells()); }
};

/// Result of discretizing one normalized value: either L bin indices, or an
/// out-of-extent flag. Exactly one of the three states holds.
struct C2FEncoding {
    std::vector<std::size_t> indices;
    bool below = false;
    bool above = false;

    bool in_extent() const { return !below && !above; }

    /// Lexicographic cell number; out-of-extent values clamp to the edge cells.
    std::size_t cell_rank(const BinningSpec& spec) const {
        if (below) return 0;
        if (above) return spec.cells() - 1;
        std::size_t r = 0;
        for (std::size_t idx : indices) r = r * spec.bins + idx;
        return r;
    }
};

/// Per-level unnormalized scores; levels[l] has length spec.bins.
struct C2FLogits {
    std::vector<std::vector<double>> levels;
};

namespace detail {

/// [lo, hi) of the sub-interval reached by descending `indices`; the exact
/// arithmetic here is the single source of truth for cell boundaries.
inline void descend_bounds(const BinningSpec& spec, const std::vector<std::size_t>& indices,
                           double& lo, double& hi) {
    lo = spec.low;
    hi = spec.high;
    for (std::size_t idx : indices) {
        const double width = (hi - lo) / static_cast<double>(spec.bins);
        const double new_lo = lo + static_cast<double>(idx) * width;
        const double new_hi = (idx + 1 == spec.bins) ? hi : lo + static_cast<double>(idx + 1) * width;
        lo = new_lo;
        hi = new_hi;
    }
}

} // namespace detail

inline void cell_bounds(const BinningSpec& spec, const C2FEncoding& enc, double& lo, double& hi) {
    if (enc.below) {
        std::vector<std::size_t> edge(spec.levels, 0);
        detail::descend_bounds(spec, edge, lo, hi);
        return;
    }
    if (enc.above) {
        std::vector<std::size_t> edge(spec.levels, spec.bins - 1);
        detail::descend_bounds(spec, edge, lo, hi);
        return;
    }
    detail::descend_bounds(spec, enc.indices, lo, hi);
}

/// Discretizes a normalized value. In-extent values (low <= v < high) get one
/// bin index per level, chosen by recursing into the selected bin; values
/// outside the extent only set the below/above flag.
inline C2FEncoding c2f_encode(double value, const BinningSpec& spec) {
    spec.validate();
    require(std::isfinite(value), "cannot encode non-finite value");
    C2FEncoding enc;
    if (value < spec.low) {
        enc.below = true;
        return enc;
    }
    if (value >= spec.high) {
        enc.above = true;
        return enc;
    }
    double lo = spec.low;
    double hi = spec.high;
    enc.indices.resize(spec.levels);
    for (std::size_t l = 0; l < spec.levels; ++l) {
        const double width = (hi - lo) / static_cast<double>(spec.bins);
        auto bounds_of = [&](std::size_t idx, double& blo, double& bhi) {
            blo = lo + static_cast<double>(idx) * width;
            bhi = (idx + 1 == spec.bins) ? hi : lo + static_cast<double>(idx + 1) * width;
        };
        double raw = std::floor((value - lo) / width);
        std::size_t idx = static_cast<std::size_t>(
            std::clamp(raw, 0.0, static_cast<double>(spec.bins - 1)));
        double blo, bhi;
        bounds_of(idx, blo, bhi);
        // Rounding at bin boundaries can land the floor one bin off; nudge
        // until the invariant cell_low <= v < cell_high holds.
        while (value < blo && idx > 0) bounds_of(--idx, blo, bhi);
        while (value >= bhi && idx + 1 < spec.bins) bounds_of(++idx, blo, bhi);
        enc.indices[l] = idx;
        lo = blo;
        hi = bhi;
    }
    return enc;
}

/// Per-level within-bin position of an in-extent value, each in [0,1).
/// Below-extent values report 0, above-extent report 1 at every level.
inline std::vector<double> c2f_level_fractions(double value, const C2FEncoding& enc,
                                               const BinningSpec& spec) {
    std::vector<double> fracs(spec.levels, enc.above ? 1.0 : 0.0);
    if (!enc.in_extent()) return fracs;
    double lo = spec.low;
    double hi = spec.high;
    for (std::size_t l = 0; l < spec.levels; ++l) {
        const double width = (hi - lo) / static_cast<double>(spec.bins);
        const std::size_t idx = enc.indices[l];
        const double blo = lo + static_cast<double>(idx) * width;
        const double bhi = (idx + 1 == spec.bins) ? hi : lo + static_cast<double>(idx + 1) * width;
        fracs[l] = std::clamp((value - blo) / (bhi - blo), 0.0, 1.0);
        lo = blo;
        hi = bhi;
    }
    return fracs;
}

// ---------------------------------------------------------------------------
// Extent fitting
// ---------------------------------------------------------------------------

/// Linearly-interpolated empirical percentile (the "type 7" definition),
/// p in [0,1].
inline double percentile(std::vector<double> values, double p) {
    require(!values.empty(), "percentile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(h));
    if (i + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(i);
    return values[i] + frac * (values[i + 1] - values[i]);
}

/// Fits extents so that [low, high] covers the 1st to 99th percentile of the
/// supplied normalized training values.
inline BinningSpec fit_binning(const std::vector<double>& normalized_values,
                               std::size_t levels, std::size_t bins) {
    require(normalized_values.size() >= 2,
            "binning fit needs at least 2 values, got ", normalized_values.size());
    BinningSpec spec;
    spec.levels = levels;
    spec.bins = bins;
    spec.low = percentile(normalized_values, 0.01);
    spec.high = percentile(normalized_values, 0.99);
    require(spec.low < spec.high,
            "degenerate binning extent: 1%/99% percentiles both equal ", spec.low);
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

inline double log_sum_exp(const std::vector<double>& xs) {
    double m = xs[0];
    for (double x : xs) m = std::max(m, x);
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    const double lse = log_sum_exp(logits);
    std::vector<double> p(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
    return p;
}

/// Indices the target trains against: out-of-extent targets clamp to the
/// bottom / top cell; this keeps the likelihood proper without tail terms.
inline std::vector<std::size_t> clamped_target_indices(const C2FEncoding& target,
                                                       const BinningSpec& spec) {
    if (target.below) return std::vector<std::size_t>(spec.levels, 0);
    if (target.above) return std::vector<std::size_t>(spec.levels, spec.bins - 1);
    return target.indices;
}

/// Negative log-likelihood of the target cell: the sum over levels of the
/// categorical cross-entropy of that level's index under softmaxed logits.
inline double c2far_nll(const C2FLogits& logits, const C2FEncoding& target,
                        const BinningSpec& spec) {
    require(logits.levels.size() == spec.levels,
            "logits carry ", logits.levels.size(), " levels, spec has ", spec.levels);
    const std::vector<std::size_t> idx = clamped_target_indices(target, spec);
    double nll = 0.0;
    for (std::size_t l = 0; l < spec.levels; ++l) {
        const auto& lv = logits.levels[l];
        require(lv.size() == spec.bins, "level ", l, " has ", lv.size(), " logits, expected ", spec.bins);
        for (double x : lv) require(std::isfinite(x), "non-finite logit at level ", l);
        nll += log_sum_exp(lv) - lv[idx[l]];
    }
    return nll;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Supplies the logits for a level given the indices already chosen at
/// coarser levels.
using LevelLogitFn =
    std::function<std::vector<double>(std::size_t level, const std::vector<std::size_t>& prefix)>;

inline std::size_t sample_categorical(const std::vector<double>& logits, Rng& rng) {
    const std::vector<double> p = softmax(logits);
    double u = rng.uniform();
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        if (u < p[i]) return i;
        u -= p[i];
    }
    return p.size() - 1;
}

/// Draws level indices sequentially from the per-level softmaxes, then a
/// value uniformly within the selected finest cell. Samples never leave
/// [low, high).
inline double c2far_sample(const LevelLogitFn& level_logits, const BinningSpec& spec, Rng& rng) {
    C2FEncoding enc;
    enc.indices.reserve(spec.levels);
    for (std::size_t l = 0; l < spec.levels; ++l) {
        enc.indices.push_back(sample_categorical(level_logits(l, enc.indices), rng));
    }
    double lo, hi;
    cell_bounds(spec, enc, lo, hi);
    return lo + rng.uniform() * (hi - lo);
}

/// Probability of every finest cell, in lexicographic index order. Intended
/// for desk-scale checks (B^L cells).
inline std::vector<double> enumerate_cell_probs(const LevelLogitFn& level_logits,
                                                const BinningSpec& spec) {
    std::vector<double> probs;
    probs.reserve(spec.cells());
    std::vector<std::size_t> prefix;
    std::function<void(double)> walk = [&](double p_prefix) {
        if (prefix.size() == spec.levels) {
            probs.push_back(p_prefix);
            return;
        }
        const std::vector<double> p = softmax(level_logits(prefix.size(), prefix));
        for (std::size_t i = 0; i < spec.bins; ++i) {
            prefix.push_back(i);
            walk(p_prefix * p[i]);
            prefix.pop_back();
        }
    };
    walk(1.0);
    return probs;
}

/// Adapts a fixed per-level logit matrix (no cross-level dependence) to the
/// LevelLogitFn interface.
inline LevelLogitFn fixed_level_logits(const C2FLogits& logits) {
    return [logits](std::size_t level, const std::vector<std::size_t>&) {
        return logits.levels[level];
    };
}

// ---------------------------------------------------------------------------
// Flat binned head (single-level ablation)
// ---------------------------------------------------------------------------

struct FlatBinning {
    double low = 0.0;
    double high = 1.0;
    std::size_t bins = 1024;

    void validate() const {
        require(low < high, "flat binning extent invalid: low=", low, " >= high=", high);
        require(bins >= 2, "flat binning needs at least 2 bins");
    }
};

inline std::size_t flat_encode(double value, const FlatBinning& spec) {
    spec.validate();
    if (value < spec.low) return 0;
    if (value >= spec.high) return spec.bins - 1;
    const double width = (spec.high - spec.low) / static_cast<double>(spec.bins);
    const double raw = std::floor((value - spec.low) / width);
    return static_cast<std::size_t>(std::clamp(raw, 0.0, static_cast<double>(spec.bins - 1)));
}

inline double flat_nll(const std::vector<double>& logits, std::size_t target_bin) {
    require(target_bin < logits.size(), "flat target bin ", target_bin, " out of range ", logits.size());
    for (double x : logits) require(std::isfinite(x), "non-finite flat logit");
    return log_sum_exp(logits) - logits[target_bin];
}

inline double flat_sample(const std::vector<double>& logits, const FlatBinning& spec, Rng& rng) {
    spec.validate();
    require(logits.size() == spec.bins, "flat logits size ", logits.size(), " != bins ", spec.bins);
    const std::size_t bin = sample_categorical(logits, rng);
    const double width = (spec.high - spec.low) / static_cast<double>(spec.bins);
    const double lo = spec.low + static_cast<double>(bin) * width;
    const double hi = (bin + 1 == spec.bins) ? spec.high : spec.low + static_cast<double>(bin + 1) * width;
    return lo + rng.uniform() * (hi - lo);
}

} // namespace subar
