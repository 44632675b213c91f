#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "subar/common.hpp"
#include "subar/series.hpp"

namespace subar {

inline const std::vector<double>& wql_alphas() {
    static const std::vector<double> alphas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    return alphas;
}

/// Pinball loss of one quantile estimate against one actual.
inline double pinball(double alpha, double forecast_q, double actual) {
    require(alpha > 0.0 && alpha < 1.0, "quantile level must be in (0,1), got ", alpha);
    const double indicator = actual < forecast_q ? 1.0 : 0.0;
    return (alpha - indicator) * (actual - forecast_q);
}

/// QL_alpha = 2 * sum(pinball) / sum(|y|).
inline double quantile_loss(double alpha, const std::vector<double>& forecasts,
                            const std::vector<double>& actuals) {
    require(!actuals.empty(), "quantile loss over an empty range");
    require(forecasts.size() == actuals.size(), "forecast length ", forecasts.size(),
            " != actuals length ", actuals.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        num += 2.0 * pinball(alpha, forecasts[i], actuals[i]);
        den += std::abs(actuals[i]);
    }
    require(den > 0.0, "quantile loss denominator is zero (all actuals zero)");
    return num / den;
}

/// Normalized deviation of the median forecast.
inline double nd(const std::vector<double>& medians, const std::vector<double>& actuals) {
    require(!actuals.empty(), "ND over an empty range");
    require(medians.size() == actuals.size(), "median length ", medians.size(),
            " != actuals length ", actuals.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        num += std::abs(actuals[i] - medians[i]);
        den += std::abs(actuals[i]);
    }
    require(den > 0.0, "ND denominator is zero (all actuals zero)");
    return num / den;
}

/// Mean of the nine quantile losses at alpha = 0.1 .. 0.9. `tracks[i]` holds
/// the forecasts at wql_alphas()[i].
inline double wql(const std::vector<std::vector<double>>& tracks,
                  const std::vector<double>& actuals) {
    require(tracks.size() == wql_alphas().size(), "wQL needs ", wql_alphas().size(),
            " quantile tracks, got ", tracks.size());
    double total = 0.0;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        total += quantile_loss(wql_alphas()[i], tracks[i], actuals);
    }
    return total / static_cast<double>(tracks.size());
}

// ---------------------------------------------------------------------------
// Pooled evaluation
// ---------------------------------------------------------------------------

struct EvalReport {
    double nd = 0.0;
    double wql = 0.0;
    std::map<double, double> ql_by_alpha;
    std::vector<double> per_horizon_nd;
    std::size_t n_windows = 0;
    std::size_t n_points = 0;
};

/// Accumulates numerators and denominators across windows and series before
/// dividing, so every window contributes to one pooled metric.
class EvalAccumulator {
public:
    explicit EvalAccumulator(std::size_t horizon)
        : horizon_(horizon), pinball_sums_(wql_alphas().size(), 0.0),
          horizon_abs_err_(horizon, 0.0), horizon_abs_actual_(horizon, 0.0) {}

    /// `tracks[i]` carries the forecasts at wql_alphas()[i] for this window.
    void add_window(const std::vector<std::vector<double>>& tracks,
                    const std::vector<double>& actuals) {
        require(tracks.size() == wql_alphas().size(), "expected ", wql_alphas().size(),
                " quantile tracks, got ", tracks.size());
        require(actuals.size() == horizon_, "window horizon ", actuals.size(),
                " != accumulator horizon ", horizon_);
        const std::vector<double>& medians = tracks[4]; // alpha = 0.5
        for (std::size_t h = 0; h < horizon_; ++h) {
            const double y = actuals[h];
            abs_actual_ += std::abs(y);
            abs_err_ += std::abs(y - medians[h]);
            horizon_abs_err_[h] += std::abs(y - medians[h]);
            horizon_abs_actual_[h] += std::abs(y);
            for (std::size_t i = 0; i < tracks.size(); ++i) {
                pinball_sums_[i] += 2.0 * pinball(wql_alphas()[i], tracks[i][h], y);
            }
        }
        n_windows_ += 1;
        n_points_ += horizon_;
    }

    void merge(const EvalAccumulator& other) {
        require(other.horizon_ == horizon_, "cannot merge accumulators of different horizons");
        abs_actual_ += other.abs_actual_;
        abs_err_ += other.abs_err_;
        for (std::size_t i = 0; i < pinball_sums_.size(); ++i) {
            pinball_sums_[i] += other.pinball_sums_[i];
        }
        for (std::size_t h = 0; h < horizon_; ++h) {
            horizon_abs_err_[h] += other.horizon_abs_err_[h];
            horizon_abs_actual_[h] += other.horizon_abs_actual_[h];
        }
        n_windows_ += other.n_windows_;
        n_points_ += other.n_points_;
    }

    EvalReport report() const {
        require(n_points_ > 0, "no windows were evaluated");
        require(abs_actual_ > 0.0, "evaluation denominator is zero (all actuals zero)");
        EvalReport r;
        r.nd = abs_err_ / abs_actual_;
        double total = 0.0;
        for (std::size_t i = 0; i < pinball_sums_.size(); ++i) {
            const double ql = pinball_sums_[i] / abs_actual_;
            r.ql_by_alpha[wql_alphas()[i]] = ql;
            total += ql;
        }
        r.wql = total / static_cast<double>(pinball_sums_.size());
        r.per_horizon_nd.resize(horizon_);
        for (std::size_t h = 0; h < horizon_; ++h) {
            r.per_horizon_nd[h] = horizon_abs_actual_[h] > 0.0
                                      ? horizon_abs_err_[h] / horizon_abs_actual_[h]
                                      : 0.0;
        }
        r.n_windows = n_windows_;
        r.n_points = n_points_;
        return r;
    }

private:
    std::size_t horizon_;
    double abs_actual_ = 0.0;
    double abs_err_ = 0.0;
    std::vector<double> pinball_sums_;
    std::vector<double> horizon_abs_err_;
    std::vector<double> horizon_abs_actual_;
    std::size_t n_windows_ = 0;
    std::size_t n_points_ = 0;
};

/// Produces the nine wQL quantile tracks for one conditioning window.
using QuantileForecaster = std::function<std::vector<std::vector<double>>(
    const Window& window, std::size_t horizon)>;

/// Rolling evaluation over one series: every start offset (with the given
/// stride) whose conditioning+prediction range fits contributes one window;
/// sums are pooled before dividing.
inline void rolling_accumulate(const QuantileForecaster& forecaster, const TimeSeries& series,
                               std::size_t T, std::size_t N, std::size_t stride,
                               EvalAccumulator& acc) {
    require(stride >= 1, "stride must be >= 1");
    require(series.values.size() >= T + N, "evaluation span of series '", series.id,
            "' too short: length ", series.values.size(), " < T+N = ", T + N);
    for (std::size_t start = 0; start + T + N <= series.values.size(); start += stride) {
        Window w = make_window(series, start, T, N);
        std::vector<double> actuals = w.prediction;
        w.prediction.clear();
        const auto tracks = forecaster(w, N);
        acc.add_window(tracks, actuals);
    }
}

inline EvalReport rolling_evaluate(const QuantileForecaster& forecaster, const TimeSeries& series,
                                   std::size_t T, std::size_t N, std::size_t stride = 1) {
    EvalAccumulator acc(N);
    rolling_accumulate(forecaster, series, T, N, stride, acc);
    return acc.report();
}

inline EvalReport rolling_evaluate(const QuantileForecaster& forecaster,
                                   const std::vector<TimeSeries>& dataset, std::size_t T,
                                   std::size_t N, std::size_t stride = 1) {
    require(!dataset.empty(), "evaluation over an empty dataset");
    EvalAccumulator acc(N);
    for (const TimeSeries& s : dataset) rolling_accumulate(forecaster, s, T, N, stride, acc);
    return acc.report();
}

} // namespace subar
