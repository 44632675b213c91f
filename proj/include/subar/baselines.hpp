#pragma once

#include <vector>

#include "subar/common.hpp"
#include "subar/metrics.hpp"
#include "subar/series.hpp"

namespace subar {

struct SeasonalPeriod {
    std::size_t steps = 1;
};

/// Repeats the last observed historical value at every horizon.
inline std::vector<double> naive_forecast(const Window& window, std::size_t N) {
    require(!window.conditioning.empty(), "naive forecast needs a non-empty conditioning range");
    return std::vector<double>(N, window.conditioning.back());
}

/// Repeats the most recent value at the same season as each horizon step;
/// horizons past one period recycle phase arithmetic over the conditioning
/// range only.
inline std::vector<double> seasonal_naive_forecast(const Window& window, std::size_t N,
                                                   SeasonalPeriod period) {
    require(period.steps >= 1, "seasonal period must be >= 1");
    const std::size_t T = window.T();
    require(T >= period.steps, "conditioning range of length ", T,
            " shorter than seasonal period ", period.steps);
    std::vector<double> out(N);
    for (std::size_t h = 0; h < N; ++h) {
        out[h] = window.conditioning[T - period.steps + (h % period.steps)];
    }
    return out;
}

/// Wraps a point forecast as a quantile forecaster: all nine tracks equal
/// the point forecast, so wQL collapses to ND.
inline QuantileForecaster point_forecaster(
    std::function<std::vector<double>(const Window&, std::size_t)> point) {
    return [point = std::move(point)](const Window& window, std::size_t horizon) {
        const std::vector<double> track = point(window, horizon);
        return std::vector<std::vector<double>>(wql_alphas().size(), track);
    };
}

inline QuantileForecaster naive_forecaster() {
    return point_forecaster([](const Window& w, std::size_t n) { return naive_forecast(w, n); });
}

inline QuantileForecaster seasonal_naive_forecaster(SeasonalPeriod period) {
    return point_forecaster([period](const Window& w, std::size_t n) {
        return seasonal_naive_forecast(w, n, period);
    });
}

} // namespace subar
