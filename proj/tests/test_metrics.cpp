#include <catch2/catch_amalgamated.hpp>

#include "subar/baselines.hpp"
#include "subar/metrics.hpp"

using namespace subar;

namespace {

TimeSeries constant_series(std::size_t n, double value) {
    TimeSeries s;
    s.id = "c";
    s.start_epoch = 0;
    s.freq = Freq::parse("1H");
    s.values.assign(n, value);
    return s;
}

} // namespace

TEST_CASE("pinball loss") {
    CHECK(pinball(0.3, 5.0, 5.0) == 0.0);
    CHECK(pinball(0.9, 0.0, 1.0) == Catch::Approx(0.9));
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const double y = rng.normal(), q = rng.normal();
        CHECK(pinball(0.5, q, y) == Catch::Approx(0.5 * std::abs(y - q)));
        CHECK(pinball(0.2, q, y) >= 0.0);
    }
    CHECK_THROWS_AS(pinball(0.0, 1.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(pinball(1.0, 1.0, 1.0), InvalidInput);
}

TEST_CASE("quantile loss") {
    const std::vector<double> actuals{1.0, 1.0};
    CHECK(quantile_loss(0.5, actuals, actuals) == 0.0);
    CHECK(quantile_loss(0.5, {0.0, 2.0}, actuals) == Catch::Approx(1.0));
    CHECK_THROWS_WITH(quantile_loss(0.5, {0.0}, {0.0}),
                      Catch::Matchers::ContainsSubstring("zero"));

    // QL at the median is exactly ND.
    Rng rng(2);
    std::vector<double> y(50), q(50);
    for (std::size_t i = 0; i < 50; ++i) {
        y[i] = rng.uniform(0.5, 3.0);
        q[i] = rng.uniform(0.5, 3.0);
    }
    CHECK(std::abs(quantile_loss(0.5, q, y) - nd(q, y)) < 1e-12);
}

TEST_CASE("normalized deviation") {
    CHECK(nd({1, 2, 2}, {1, 1, 2}) == 0.25);
    CHECK(nd({4, 4}, {4, 4}) == 0.0);
    Rng rng(3);
    std::vector<double> y(30), m(30);
    for (std::size_t i = 0; i < 30; ++i) {
        y[i] = rng.uniform(1.0, 5.0);
        m[i] = rng.uniform(1.0, 5.0);
    }
    const double base = nd(m, y);
    std::vector<double> y2 = y, m2 = m;
    for (double& v : y2) v *= 17.0;
    for (double& v : m2) v *= 17.0;
    CHECK(nd(m2, y2) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("wQL is the mean of the nine quantile losses") {
    Rng rng(4);
    std::vector<double> actuals(40);
    for (double& v : actuals) v = rng.uniform(0.5, 2.0);
    std::vector<std::vector<double>> tracks;
    for (double alpha : wql_alphas()) {
        std::vector<double> track(40);
        for (std::size_t i = 0; i < 40; ++i) track[i] = actuals[i] + alpha - 0.5 + 0.1 * rng.normal();
        tracks.push_back(track);
    }
    // Direct-formula reference computed right here.
    double expected = 0.0;
    for (std::size_t a = 0; a < 9; ++a) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < 40; ++i) {
            num += 2.0 * pinball(wql_alphas()[a], tracks[a][i], actuals[i]);
            den += std::abs(actuals[i]);
        }
        expected += num / den;
    }
    expected /= 9.0;
    CHECK(wql(tracks, actuals) == Catch::Approx(expected).epsilon(1e-12));

    // Perfect forecasts.
    std::vector<std::vector<double>> perfect(9, actuals);
    CHECK(wql(perfect, actuals) == 0.0);

    // Point forecaster: every track equal means wQL == ND exactly.
    std::vector<double> point(40);
    for (std::size_t i = 0; i < 40; ++i) point[i] = actuals[i] + 0.2;
    std::vector<std::vector<double>> flat(9, point);
    CHECK(wql(flat, actuals) == Catch::Approx(nd(point, actuals)).epsilon(1e-13));
}

TEST_CASE("rolling evaluation windows and pooling") {
    TimeSeries s;
    s.id = "r";
    s.start_epoch = 0;
    s.freq = Freq::parse("1H");
    Rng rng(5);
    for (int i = 0; i < 30; ++i) s.values.push_back(rng.uniform(1.0, 4.0));

    // A span of exactly T+N yields a single window.
    TimeSeries tight = s;
    tight.values.resize(10);
    std::size_t calls = 0;
    QuantileForecaster counting = [&](const Window& w, std::size_t horizon) {
        calls += 1;
        return std::vector<std::vector<double>>(9, naive_forecast(w, horizon));
    };
    rolling_evaluate(counting, tight, 6, 4);
    CHECK(calls == 1);

    // Naive on a constant series scores zero over any span.
    const EvalReport zero =
        rolling_evaluate(naive_forecaster(), constant_series(25, 3.0), 6, 4);
    CHECK(zero.nd == 0.0);
    CHECK(zero.wql == 0.0);
    CHECK(zero.n_windows == 25 - 10 + 1);

    // Pooled aggregation equals a brute-force loop over windows.
    const EvalReport pooled = rolling_evaluate(naive_forecaster(), s, 6, 4);
    double num = 0.0, den = 0.0;
    std::vector<double> hnum(4, 0.0), hden(4, 0.0);
    for (std::size_t start = 0; start + 10 <= s.values.size(); ++start) {
        const double last = s.values[start + 5];
        for (std::size_t h = 0; h < 4; ++h) {
            const double y = s.values[start + 6 + h];
            num += std::abs(y - last);
            den += std::abs(y);
            hnum[h] += std::abs(y - last);
            hden[h] += std::abs(y);
        }
    }
    CHECK(pooled.nd == Catch::Approx(num / den).epsilon(1e-12));
    for (std::size_t h = 0; h < 4; ++h) {
        CHECK(pooled.per_horizon_nd[h] == Catch::Approx(hnum[h] / hden[h]).epsilon(1e-12));
    }
    CHECK(pooled.ql_by_alpha.at(0.5) == Catch::Approx(pooled.nd).epsilon(1e-12));

    CHECK_THROWS_WITH(rolling_evaluate(naive_forecaster(), tight, 20, 4),
                      Catch::Matchers::ContainsSubstring("too short"));
}

TEST_CASE("multi-series evaluation pools across series") {
    std::vector<TimeSeries> dataset{constant_series(15, 2.0), constant_series(15, 5.0)};
    const EvalReport r = rolling_evaluate(naive_forecaster(), dataset, 4, 3);
    CHECK(r.nd == 0.0);
    CHECK(r.n_windows == 2 * (15 - 7 + 1));
}
