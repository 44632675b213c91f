#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "subar/common.hpp"

namespace subar {

// ---------------------------------------------------------------------------
// Timestamps and frequencies
// ---------------------------------------------------------------------------

/// Parses "YYYY-MM-DD" or "YYYY-MM-DD[T ]HH:MM[:SS]" (optional trailing 'Z')
/// into Unix epoch seconds. No timezone arithmetic beyond that.
inline std::int64_t parse_iso8601(const std::string& text) {
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    const char* s = text.c_str();
    auto read_int = [&](int digits, const char* what) {
        int v = 0;
        for (int i = 0; i < digits; ++i) {
            require(*s >= '0' && *s <= '9', "bad ISO-8601 timestamp '", text, "': expected digit in ", what);
            v = v * 10 + (*s - '0');
            ++s;
        }
        return v;
    };
    auto expect = [&](char c) {
        require(*s == c, "bad ISO-8601 timestamp '", text, "': expected '", std::string(1, c), "'");
        ++s;
    };
    year = read_int(4, "year");
    expect('-');
    month = read_int(2, "month");
    expect('-');
    day = read_int(2, "day");
    if (*s == 'T' || *s == ' ') {
        ++s;
        hour = read_int(2, "hour");
        expect(':');
        minute = read_int(2, "minute");
        if (*s == ':') {
            ++s;
            second = read_int(2, "second");
        }
    }
    if (*s == 'Z') ++s;
    require(*s == '\0', "bad ISO-8601 timestamp '", text, "': trailing characters");
    require(month >= 1 && month <= 12, "bad ISO-8601 timestamp '", text, "': month out of range");
    require(day >= 1 && day <= 31, "bad ISO-8601 timestamp '", text, "': day out of range");
    require(hour < 24 && minute < 60 && second < 61, "bad ISO-8601 timestamp '", text, "': time out of range");

    // Days-from-civil (proleptic Gregorian).
    const int y = year - (month <= 2 ? 1 : 0);
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(month + (month > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(day) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    const std::int64_t days = static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
    return days * 86400 + hour * 3600 + minute * 60 + second;
}

inline std::string format_iso8601(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    std::int64_t rem = epoch_seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    const std::int64_t year = y + (m <= 2 ? 1 : 0);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                  static_cast<long long>(year), m, d,
                  static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem / 60) % 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

/// Sampling frequency, e.g. "1H", "5min", "1D". Units: s, min (or T), h/H, D/d, W/w.
struct Freq {
    std::int64_t seconds = 0;
    std::string text;

    static Freq parse(const std::string& raw) {
        require(!raw.empty(), "empty frequency string");
        std::size_t i = 0;
        std::int64_t count = 0;
        while (i < raw.size() && raw[i] >= '0' && raw[i] <= '9') {
            count = count * 10 + (raw[i] - '0');
            ++i;
        }
        if (i == 0) count = 1;
        std::string unit = raw.substr(i);
        std::int64_t unit_seconds = 0;
        if (unit == "s" || unit == "S" || unit == "sec")
            unit_seconds = 1;
        else if (unit == "min" || unit == "T" || unit == "m")
            unit_seconds = 60;
        else if (unit == "h" || unit == "H")
            unit_seconds = 3600;
        else if (unit == "d" || unit == "D")
            unit_seconds = 86400;
        else if (unit == "w" || unit == "W")
            unit_seconds = 604800;
        else
            fail("unrecognized frequency unit in '", raw, "'");
        require(count > 0, "frequency count must be positive in '", raw, "'");
        return Freq{count * unit_seconds, raw};
    }

    /// "1H".scaled(6) == "6H"; used when exporting sub-series.
    Freq scaled(std::int64_t factor) const {
        std::size_t i = 0;
        std::int64_t count = 0;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            count = count * 10 + (text[i] - '0');
            ++i;
        }
        if (i == 0) count = 1;
        Freq f;
        f.seconds = seconds * factor;
        f.text = std::to_string(count * factor) + text.substr(i);
        return f;
    }
};

// ---------------------------------------------------------------------------
// Core containers
// ---------------------------------------------------------------------------

/// One univariate series: identified value sequence with frequency metadata
/// and optional per-step covariate vectors.
struct TimeSeries {
    std::string id;
    std::int64_t start_epoch = 0;
    Freq freq;
    std::vector<double> values;
    std::vector<std::vector<double>> covariates; // empty, or one vector per step

    void validate() const {
        require(!values.empty(), "series '", id, "' has no values");
        require(freq.seconds > 0, "series '", id, "' has no frequency");
        if (!covariates.empty()) {
            require(covariates.size() == values.size(),
                    "series '", id, "': covariates length ", covariates.size(),
                    " != values length ", values.size());
        }
    }
};

/// A conditioning range of length T plus a prediction range of length N
/// (N may be zero at inference), carved out of a parent series.
struct Window {
    std::vector<double> conditioning;
    std::vector<double> prediction;
    std::vector<std::vector<double>> covariates; // aligned over T+N when present
    std::size_t origin_offset = 0;
    std::int64_t start_epoch = 0; // timestamp of conditioning[0]
    std::int64_t freq_seconds = 0;

    std::size_t T() const { return conditioning.size(); }
    std::size_t N() const { return prediction.size(); }
    std::size_t total() const { return conditioning.size() + prediction.size(); }

    double value_at(std::size_t pos) const {
        return pos < conditioning.size() ? conditioning[pos]
                                         : prediction[pos - conditioning.size()];
    }

    std::vector<double> joined() const {
        std::vector<double> all(conditioning);
        all.insert(all.end(), prediction.begin(), prediction.end());
        return all;
    }
};

inline Window make_window(const TimeSeries& series, std::size_t offset, std::size_t T, std::size_t N) {
    require(T > 0, "conditioning length must be positive");
    require(offset + T + N <= series.values.size(),
            "window [", offset, ", ", offset + T + N, ") exceeds series '", series.id,
            "' of length ", series.values.size());
    Window w;
    w.conditioning.assign(series.values.begin() + static_cast<std::ptrdiff_t>(offset),
                          series.values.begin() + static_cast<std::ptrdiff_t>(offset + T));
    w.prediction.assign(series.values.begin() + static_cast<std::ptrdiff_t>(offset + T),
                        series.values.begin() + static_cast<std::ptrdiff_t>(offset + T + N));
    if (!series.covariates.empty()) {
        w.covariates.assign(series.covariates.begin() + static_cast<std::ptrdiff_t>(offset),
                            series.covariates.begin() + static_cast<std::ptrdiff_t>(offset + T + N));
    }
    w.origin_offset = offset;
    w.start_epoch = series.start_epoch + static_cast<std::int64_t>(offset) * series.freq.seconds;
    w.freq_seconds = series.freq.seconds;
    return w;
}

// ---------------------------------------------------------------------------
// Window slicing
// ---------------------------------------------------------------------------

/// Streams training windows from one series. Every epoch visits each valid
/// start offset exactly once, in a seed-determined random order; a new epoch
/// reshuffles. Window starts are therefore not aligned to fixed clock
/// positions.
class WindowSampler {
public:
    WindowSampler(const TimeSeries& series, std::size_t T, std::size_t N, std::uint64_t seed)
        : series_(&series), T_(T), N_(N), rng_(seed) {
        require(series.values.size() >= T + N,
                "series '", series.id, "' too short: length ", series.values.size(),
                " < T+N = ", T + N);
        offsets_.resize(series.values.size() - (T + N) + 1);
        std::iota(offsets_.begin(), offsets_.end(), std::size_t{0});
        rng_.shuffle(offsets_);
    }

    std::size_t windows_per_epoch() const { return offsets_.size(); }

    Window next() {
        if (cursor_ == offsets_.size()) {
            rng_.shuffle(offsets_);
            cursor_ = 0;
        }
        return make_window(*series_, offsets_[cursor_++], T_, N_);
    }

private:
    const TimeSeries* series_;
    std::size_t T_, N_;
    Rng rng_;
    std::vector<std::size_t> offsets_;
    std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Sub-series split / merge
// ---------------------------------------------------------------------------

enum class OrderingKind { regular, backfill };

/// Maps generation-order sub-series index k to its offset in the original
/// window: regular keeps k, backfill reverses to K-1-k.
struct Ordering {
    OrderingKind kind = OrderingKind::regular;

    std::size_t offset_of(std::size_t k, std::size_t K) const {
        return kind == OrderingKind::regular ? k : K - 1 - k;
    }
    const char* name() const { return kind == OrderingKind::regular ? "regular" : "backfill"; }
};

inline Ordering regular_ordering() { return Ordering{OrderingKind::regular}; }
inline Ordering backfill_ordering() { return Ordering{OrderingKind::backfill}; }

/// K aligned sub-series carved from one window; a lossless image of it.
/// Sub-series k (generation order) holds original positions j*K + offset(k).
struct SubSeriesBundle {
    std::size_t K = 1;
    Ordering ordering;
    std::vector<std::vector<double>> subs;
    std::size_t T_tilde = 0;
    std::size_t N_tilde = 0;

    // Carried through so merge can reconstruct the window exactly.
    std::size_t origin_offset = 0;
    std::int64_t start_epoch = 0;
    std::int64_t freq_seconds = 0;

    std::size_t steps() const { return T_tilde + N_tilde; }

    /// Original position of sub-series k at sub-series time j.
    std::size_t original_position(std::size_t k, std::size_t j) const {
        return j * K + ordering.offset_of(k, K);
    }
};

inline SubSeriesBundle split_subseries(const Window& window, std::size_t K, Ordering ordering) {
    require(K >= 1, "K must be >= 1");
    const std::size_t T = window.T();
    const std::size_t N = window.N();
    require(T % K == 0 && N % K == 0,
            "window lengths not divisible by K: T=", T, ", N=", N, ", K=", K);
    SubSeriesBundle b;
    b.K = K;
    b.ordering = ordering;
    b.T_tilde = T / K;
    b.N_tilde = N / K;
    b.origin_offset = window.origin_offset;
    b.start_epoch = window.start_epoch;
    b.freq_seconds = window.freq_seconds;
    b.subs.assign(K, std::vector<double>((T + N) / K));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < (T + N) / K; ++j) {
            b.subs[k][j] = window.value_at(b.original_position(k, j));
        }
    }
    return b;
}

inline Window merge_subseries(const SubSeriesBundle& bundle) {
    require(bundle.K >= 1 && bundle.subs.size() == bundle.K,
            "bundle holds ", bundle.subs.size(), " sub-series, expected K=", bundle.K);
    const std::size_t len = bundle.steps();
    for (std::size_t k = 0; k < bundle.K; ++k) {
        require(bundle.subs[k].size() == len,
                "ragged bundle: sub-series ", k, " has length ", bundle.subs[k].size(),
                ", expected ", len);
    }
    std::vector<double> joined(len * bundle.K);
    for (std::size_t k = 0; k < bundle.K; ++k) {
        for (std::size_t j = 0; j < len; ++j) {
            joined[bundle.original_position(k, j)] = bundle.subs[k][j];
        }
    }
    Window w;
    const std::size_t T = bundle.T_tilde * bundle.K;
    w.conditioning.assign(joined.begin(), joined.begin() + static_cast<std::ptrdiff_t>(T));
    w.prediction.assign(joined.begin() + static_cast<std::ptrdiff_t>(T), joined.end());
    w.origin_offset = bundle.origin_offset;
    w.start_epoch = bundle.start_epoch;
    w.freq_seconds = bundle.freq_seconds;
    return w;
}

// ---------------------------------------------------------------------------
// Min-max normalization
// ---------------------------------------------------------------------------

/// Min-max scale fitted on a conditioning range. Degenerate ranges
/// (min == max) normalize to 0 and invert to min.
struct ScaleParams {
    double min = 0.0;
    double max = 1.0;
    bool degenerate = false;

    double apply(double v) const {
        if (degenerate) return 0.0;
        return (v - min) / (max - min);
    }
    double invert(double normalized) const {
        if (degenerate) return min;
        return min + normalized * (max - min);
    }
};

inline ScaleParams minmax_fit(const std::vector<double>& conditioning) {
    require(!conditioning.empty(), "cannot fit min-max scale on an empty sequence");
    ScaleParams p;
    p.min = *std::min_element(conditioning.begin(), conditioning.end());
    p.max = *std::max_element(conditioning.begin(), conditioning.end());
    p.degenerate = (p.min == p.max);
    return p;
}

inline double minmax_apply(double v, const ScaleParams& p) { return p.apply(v); }
inline double minmax_invert(double v, const ScaleParams& p) { return p.invert(v); }

// ---------------------------------------------------------------------------
// Lag and seasonal covariates
// ---------------------------------------------------------------------------

struct LagValue {
    double value = 0.0;
    bool missing = true;
};

/// Per-step column where entry t is y[t - lag_period]; steps before the lag
/// horizon carry an explicit missing marker rather than a sentinel value.
inline std::vector<LagValue> build_lag_features(const std::vector<double>& values,
                                                std::size_t lag_period) {
    require(lag_period > 0, "lag period must be positive");
    std::vector<LagValue> out(values.size());
    for (std::size_t t = 0; t < values.size(); ++t) {
        if (t >= lag_period) {
            out[t] = LagValue{values[t - lag_period], false};
        }
    }
    return out;
}

/// Positions within the daily and weekly cycles, each in [0,1), plus flags
/// for whether the axis resolves anything at this frequency. Weeks are
/// anchored at Monday 00:00.
struct SeasonalPhase {
    double day = 0.0;
    double week = 0.0;
    bool day_active = false;
    bool week_active = false;
};

inline SeasonalPhase seasonal_phase(std::int64_t epoch_seconds, std::int64_t freq_seconds) {
    SeasonalPhase p;
    p.day_active = freq_seconds < 86400;
    p.week_active = freq_seconds < 604800;
    auto cycle_pos = [](std::int64_t t, std::int64_t period) {
        std::int64_t r = t % period;
        if (r < 0) r += period;
        return static_cast<double>(r) / static_cast<double>(period);
    };
    if (p.day_active) p.day = cycle_pos(epoch_seconds, 86400);
    // 1970-01-01 was a Thursday, three days into a Monday-anchored week.
    if (p.week_active) p.week = cycle_pos(epoch_seconds + 3 * 86400, 604800);
    return p;
}

/// Per-step {day position, week position} vectors for a window.
inline std::vector<std::array<double, 2>> build_seasonal_covariates(const Window& window) {
    std::vector<std::array<double, 2>> out(window.total());
    for (std::size_t t = 0; t < window.total(); ++t) {
        const SeasonalPhase p = seasonal_phase(
            window.start_epoch + static_cast<std::int64_t>(t) * window.freq_seconds,
            window.freq_seconds);
        out[t] = {p.day, p.week};
    }
    return out;
}

} // namespace subar
