#include <catch2/catch_amalgamated.hpp>

#include "subar/baselines.hpp"

using namespace subar;

namespace {

Window with_conditioning(std::vector<double> values) {
    Window w;
    w.conditioning = std::move(values);
    w.freq_seconds = 3600;
    return w;
}

} // namespace

TEST_CASE("naive forecast repeats the last value") {
    CHECK(naive_forecast(with_conditioning({1, 4, 7}), 3) == std::vector<double>{7, 7, 7});
    CHECK(naive_forecast(with_conditioning({2}), 0).empty());
    CHECK_THROWS_AS(naive_forecast(with_conditioning({}), 2), InvalidInput);
}

TEST_CASE("seasonal naive repeats the same season") {
    CHECK(seasonal_naive_forecast(with_conditioning({1, 2, 3, 4, 5, 6}), 3, {3}) ==
          std::vector<double>{4, 5, 6});
    // Beyond one period the phase arithmetic recycles conditioning values.
    CHECK(seasonal_naive_forecast(with_conditioning({1, 2, 3, 4, 5, 6}), 7, {3}) ==
          std::vector<double>{4, 5, 6, 4, 5, 6, 4});
    // Period one degenerates to the naive forecast.
    const Window w = with_conditioning({3, 8, 5});
    CHECK(seasonal_naive_forecast(w, 4, {1}) == naive_forecast(w, 4));
    CHECK_THROWS_WITH(seasonal_naive_forecast(with_conditioning({1, 2}), 2, {5}),
                      Catch::Matchers::ContainsSubstring("period"));
}

TEST_CASE("seasonal naive nails an exactly periodic series") {
    TimeSeries s;
    s.id = "p";
    s.start_epoch = 0;
    s.freq = Freq::parse("1H");
    for (int i = 0; i < 60; ++i) s.values.push_back(2.0 + (i % 6));
    const EvalReport r = rolling_evaluate(seasonal_naive_forecaster({6}), s, 12, 6);
    CHECK(r.nd == 0.0);
    CHECK(r.wql == 0.0);
}

TEST_CASE("point forecasters have wQL equal to ND") {
    TimeSeries s;
    s.id = "q";
    s.start_epoch = 0;
    s.freq = Freq::parse("1H");
    Rng rng(7);
    for (int i = 0; i < 40; ++i) s.values.push_back(rng.uniform(1.0, 3.0));
    for (const auto& forecaster : {naive_forecaster(), seasonal_naive_forecaster({4})}) {
        const EvalReport r = rolling_evaluate(forecaster, s, 8, 5);
        // Individual QL_alpha values differ, but their mean telescopes to ND.
        CHECK(r.wql == Catch::Approx(r.nd).epsilon(1e-13));
        CHECK(r.ql_by_alpha.at(0.5) == Catch::Approx(r.nd).epsilon(1e-13));
    }
}
