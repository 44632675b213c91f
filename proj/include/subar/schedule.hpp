#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "subar/common.hpp"
#include "subar/series.hpp"

namespace subar {

/// Alternating generates one value per sub-series per sub-series timestep
/// (and conditions on previous values of later sub-series); non-alternating
/// finishes each sub-series before starting the next and never looks ahead.
enum class GenerationMode { alternating, non_alternating };

inline const char* mode_name(GenerationMode m) {
    return m == GenerationMode::alternating ? "alternating" : "non-alternating";
}

/// Reference to one autoregressive input value. `time` below zero means the
/// value lies before the window start; the encoder turns it into a missing
/// marker. One slot exists per sub-series the entry conditions on: slot j
/// holds the latest value of sub-series j visible at generation time.
struct InputRef {
    std::size_t sub_series = 0;
    std::ptrdiff_t time = -1;

    bool missing() const { return time < 0; }
};

/// One generative step: sub-series `sub_series` (generation-order index)
/// emits its value at sub-series time `time`, conditional on `input_refs`.
struct ScheduleEntry {
    std::size_t step = 0;
    std::size_t sub_series = 0;
    std::size_t time = 0;
    std::size_t target_position = 0; // position within the original window
    std::vector<InputRef> input_refs;
};

/// Input slots of sub-model k at sub-series time t: the current values of
/// sub-series generated before k this timestep, its own previous value, and
/// (alternating only) the previous values of later sub-series.
inline std::vector<InputRef> input_refs_for(std::size_t k, std::ptrdiff_t time, std::size_t K,
                                            GenerationMode mode) {
    std::vector<InputRef> refs;
    const std::size_t n_slots = (mode == GenerationMode::alternating) ? K : k + 1;
    refs.reserve(n_slots);
    for (std::size_t j = 0; j < n_slots; ++j) {
        refs.push_back(InputRef{j, j < k ? time : time - 1});
    }
    return refs;
}

/// Number of value-input slots sub-model k owns under the given mode.
inline std::size_t value_slots_for(std::size_t k, std::size_t K, GenerationMode mode) {
    return mode == GenerationMode::alternating ? K : k + 1;
}

/// Prediction-range generation schedule: each (k, t) pair in the prediction
/// range appears exactly once, ordered by (t, k) when alternating and by
/// (k, t) otherwise.
inline std::vector<ScheduleEntry> build_schedule(std::size_t K, Ordering ordering,
                                                 GenerationMode mode, std::size_t T_tilde,
                                                 std::size_t N_tilde) {
    require(K >= 1, "schedule needs K >= 1");
    std::vector<ScheduleEntry> entries;
    entries.reserve(K * N_tilde);
    auto emit = [&](std::size_t k, std::size_t t) {
        ScheduleEntry e;
        e.step = entries.size();
        e.sub_series = k;
        e.time = t;
        e.target_position = t * K + ordering.offset_of(k, K);
        e.input_refs = input_refs_for(k, static_cast<std::ptrdiff_t>(t), K, mode);
        entries.push_back(std::move(e));
    };
    if (mode == GenerationMode::alternating) {
        for (std::size_t t = T_tilde; t < T_tilde + N_tilde; ++t) {
            for (std::size_t k = 0; k < K; ++k) emit(k, t);
        }
    } else {
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t t = T_tilde; t < T_tilde + N_tilde; ++t) emit(k, t);
        }
    }
    return entries;
}

/// Original-window positions in the order the schedule generates them.
inline std::vector<std::size_t> generation_order(const std::vector<ScheduleEntry>& schedule) {
    std::vector<std::size_t> order;
    order.reserve(schedule.size());
    for (const ScheduleEntry& e : schedule) order.push_back(e.target_position);
    return order;
}

// ---------------------------------------------------------------------------
// Low-to-high-frequency hybrid
// ---------------------------------------------------------------------------

/// Walk of the two-model hybrid: the low-frequency model samples the
/// sub-series at original offsets == K-1 (mod K) in full, then the
/// high-frequency model steps through every original position, sampling the
/// rest while the low-frequency positions stay fixed to the drawn values.
struct Low2HighSchedule {
    std::size_t K = 1;
    std::vector<std::size_t> low_positions; // prediction positions owned by the low model
    struct HighStep {
        std::size_t position = 0;
        bool constrained = false; // true at low-frequency positions
    };
    std::vector<HighStep> high_walk; // every prediction position in order
};

inline Low2HighSchedule build_low2high_schedule(std::size_t K, std::size_t T, std::size_t N) {
    require(K >= 1, "schedule needs K >= 1");
    require(T % K == 0 && N % K == 0, "window lengths not divisible by K: T=", T, ", N=", N,
            ", K=", K);
    Low2HighSchedule s;
    s.K = K;
    for (std::size_t p = T; p < T + N; ++p) {
        const bool low = (p % K) == K - 1;
        if (low) s.low_positions.push_back(p);
        s.high_walk.push_back({p, low});
    }
    return s;
}

/// Positions in the order values are actually drawn: the whole low-frequency
/// sub-series first, then the unconstrained positions of the high walk.
inline std::vector<std::size_t> generation_order(const Low2HighSchedule& schedule) {
    std::vector<std::size_t> order(schedule.low_positions);
    for (const auto& hs : schedule.high_walk) {
        if (!hs.constrained) order.push_back(hs.position);
    }
    return order;
}

// ---------------------------------------------------------------------------
// Backfill-standard preprocessing
// ---------------------------------------------------------------------------

/// Reverses every block of K consecutive values in place; an involution.
inline void backfill_standard_transform(std::vector<double>& values, std::size_t K) {
    require(K >= 1, "block size must be >= 1");
    require(values.size() % K == 0, "sequence length ", values.size(),
            " not divisible by block size K=", K);
    for (std::size_t b = 0; b < values.size(); b += K) {
        std::reverse(values.begin() + static_cast<std::ptrdiff_t>(b),
                     values.begin() + static_cast<std::ptrdiff_t>(b + K));
    }
}

/// Window variant: conditioning and prediction ranges are transformed as one
/// sequence; both lengths must divide by K so blocks never straddle the
/// boundary.
inline Window backfill_standard_transform(const Window& window, std::size_t K) {
    require(window.T() % K == 0 && window.N() % K == 0,
            "window lengths not divisible by K: T=", window.T(), ", N=", window.N(), ", K=", K);
    Window out = window;
    backfill_standard_transform(out.conditioning, K);
    backfill_standard_transform(out.prediction, K);
    return out;
}

} // namespace subar
