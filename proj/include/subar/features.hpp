#pragma once

#include <cstdint>
#include <vector>

#include "subar/binning.hpp"
#include "subar/common.hpp"
#include "subar/series.hpp"

namespace subar {

// ---------------------------------------------------------------------------
// Input feature layout
//
// Every autoregressive input value occupies one fixed-width block:
//   [0,      L*B)        one-hot bin index per level (exactly L ones in-extent)
//   [L*B,    2*L*B)      fractional one-hot: the same positions scaled by the
//                        within-bin position at that level
//   [2*L*B,  2*L*B+L*(B-1))  thermometer: per level, dim j-1 set when the
//                        level index is >= j (j = 1..B-1)
//   [.., +3)             flags: below extent, above extent, missing
// giving a block width of 3*L*B - L + 3 (108 for L=3, B=12).
//
// One shared block of calendar covariates follows the value blocks. Each of
// the two seasonal axes (position-in-day, position-in-week) contributes
//   soft periodic one-hot over `seasonal_bins` bins, sin, cos, raw phase,
//   and an active flag
// for 2*(seasonal_bins+4) dims total (136 with the default 64 bins).
// ---------------------------------------------------------------------------

inline std::size_t value_block_width(std::size_t levels, std::size_t bins) {
    return 3 * levels * bins - levels + 3;
}

inline std::size_t seasonal_block_width(std::size_t seasonal_bins) {
    return 2 * (seasonal_bins + 4);
}

/// A value that may be absent (before history starts, or not yet generated).
struct MaybeValue {
    double value = 0.0;
    bool missing = true;

    static MaybeValue of(double v) { return MaybeValue{v, false}; }
    static MaybeValue none() { return MaybeValue{}; }
};

/// Sparse feature vector. `entries` are explicit (column, value) pairs;
/// `ranges` denote runs of consecutive columns all set to 1 (thermometer
/// encodings), which the recurrent layer can fold via precomputed prefix
/// sums instead of touching every column.
struct SparseFeatures {
    std::size_t width = 0;

    struct Entry {
        std::uint32_t col;
        double val;
    };
    struct Range {
        std::uint32_t first;
        std::uint32_t count;
    };

    std::vector<Entry> entries;
    std::vector<Range> ranges;

    void clear() {
        entries.clear();
        ranges.clear();
    }

    std::vector<double> to_dense() const {
        std::vector<double> out(width, 0.0);
        for (const Entry& e : entries) out[e.col] += e.val;
        for (const Range& r : ranges) {
            for (std::uint32_t j = 0; j < r.count; ++j) out[r.first + j] += 1.0;
        }
        return out;
    }
};

/// Appends the feature block for one (possibly missing) normalized value.
/// With expand_ranges set, thermometer dims are emitted as plain entries so
/// the result has one entry per nonzero dim (required under input dropout).
inline void append_value_block(MaybeValue v, const BinningSpec& spec, std::size_t base,
                               SparseFeatures& out, bool expand_ranges = false) {
    const std::size_t LB = spec.levels * spec.bins;
    const std::size_t flag_base = base + 3 * LB - spec.levels;
    if (v.missing) {
        out.entries.push_back({static_cast<std::uint32_t>(flag_base + 2), 1.0});
        return;
    }
    const C2FEncoding enc = c2f_encode(v.value, spec);
    if (enc.below) out.entries.push_back({static_cast<std::uint32_t>(flag_base + 0), 1.0});
    if (enc.above) out.entries.push_back({static_cast<std::uint32_t>(flag_base + 1), 1.0});
    const std::vector<std::size_t> idx = clamped_target_indices(enc, spec);
    const std::vector<double> fracs = c2f_level_fractions(v.value, enc, spec);
    for (std::size_t l = 0; l < spec.levels; ++l) {
        out.entries.push_back({static_cast<std::uint32_t>(base + l * spec.bins + idx[l]), 1.0});
        if (fracs[l] != 0.0) {
            out.entries.push_back(
                {static_cast<std::uint32_t>(base + LB + l * spec.bins + idx[l]), fracs[l]});
        }
        if (idx[l] > 0) {
            const std::size_t first = base + 2 * LB + l * (spec.bins - 1);
            if (expand_ranges) {
                for (std::size_t j = 0; j < idx[l]; ++j) {
                    out.entries.push_back({static_cast<std::uint32_t>(first + j), 1.0});
                }
            } else {
                out.ranges.push_back({static_cast<std::uint32_t>(first),
                                      static_cast<std::uint32_t>(idx[l])});
            }
        }
    }
}

/// Appends one seasonal axis: soft periodic one-hot + sin/cos + raw + flag.
/// An inactive axis (cycle not resolved at this frequency) is all zero.
inline void append_seasonal_axis(double phase, bool active, std::size_t seasonal_bins,
                                 std::size_t base, SparseFeatures& out) {
    if (!active) return;
    const double x = phase * static_cast<double>(seasonal_bins);
    const std::size_t i = std::min(static_cast<std::size_t>(x), seasonal_bins - 1);
    const double frac = x - static_cast<double>(i);
    out.entries.push_back({static_cast<std::uint32_t>(base + i), 1.0 - frac});
    if (frac != 0.0) {
        out.entries.push_back(
            {static_cast<std::uint32_t>(base + (i + 1) % seasonal_bins), frac});
    }
    const double angle = 2.0 * M_PI * phase;
    const double s = std::sin(angle);
    const double c = std::cos(angle);
    if (s != 0.0) out.entries.push_back({static_cast<std::uint32_t>(base + seasonal_bins), s});
    if (c != 0.0) out.entries.push_back({static_cast<std::uint32_t>(base + seasonal_bins + 1), c});
    if (phase != 0.0) out.entries.push_back({static_cast<std::uint32_t>(base + seasonal_bins + 2), phase});
    out.entries.push_back({static_cast<std::uint32_t>(base + seasonal_bins + 3), 1.0});
}

inline void append_seasonal_block(const SeasonalPhase& phase, std::size_t seasonal_bins,
                                  std::size_t base, SparseFeatures& out) {
    append_seasonal_axis(phase.day, phase.day_active, seasonal_bins, base, out);
    append_seasonal_axis(phase.week, phase.week_active, seasonal_bins,
                         base + seasonal_bins + 4, out);
}

// ---------------------------------------------------------------------------
// Public encoding surface
// ---------------------------------------------------------------------------

/// Concatenated feature blocks for up to K values, as a dense vector.
inline std::vector<double> encode_input_features(const std::vector<MaybeValue>& values,
                                                 const BinningSpec& spec) {
    const std::size_t bw = value_block_width(spec.levels, spec.bins);
    SparseFeatures sf;
    sf.width = values.size() * bw;
    for (std::size_t i = 0; i < values.size(); ++i) {
        append_value_block(values[i], spec, i * bw, sf);
    }
    return sf.to_dense();
}

// ---------------------------------------------------------------------------
// Input dropout
// ---------------------------------------------------------------------------

/// Zeroes each feature with probability p and rescales survivors by 1/(1-p);
/// identity in eval mode.
inline std::vector<double> input_dropout(const std::vector<double>& features, double p,
                                         Rng& rng, bool train_mode) {
    require(p >= 0.0 && p < 1.0, "dropout probability must be in [0,1), got ", p);
    if (!train_mode || p == 0.0) return features;
    std::vector<double> out(features.size());
    const double scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < features.size(); ++i) {
        out[i] = (rng.uniform() < p) ? 0.0 : features[i] * scale;
    }
    return out;
}

/// Entry-wise dropout on sparse features. Callers must have expanded
/// thermometer ranges first so each nonzero dim drops independently, exactly
/// as in the dense form.
inline void input_dropout_sparse(SparseFeatures& features, double p, Rng& rng) {
    require(p >= 0.0 && p < 1.0, "dropout probability must be in [0,1), got ", p);
    require(features.ranges.empty(), "dropout requires expanded feature ranges");
    if (p == 0.0) return;
    const double scale = 1.0 / (1.0 - p);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < features.entries.size(); ++i) {
        if (rng.uniform() < p) continue;
        features.entries[kept] = features.entries[i];
        features.entries[kept].val *= scale;
        ++kept;
    }
    features.entries.resize(kept);
}

} // namespace subar
