#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "subar/series.hpp"

using namespace subar;

namespace {

TimeSeries make_series(std::size_t n, double start_value = 0.0) {
    TimeSeries s;
    s.id = "s";
    s.start_epoch = parse_iso8601("2020-01-06T00:00:00"); // a Monday
    s.freq = Freq::parse("1H");
    for (std::size_t i = 0; i < n; ++i) s.values.push_back(start_value + static_cast<double>(i));
    return s;
}

} // namespace

TEST_CASE("iso8601 parsing round trips") {
    CHECK(parse_iso8601("1970-01-01T00:00:00") == 0);
    CHECK(parse_iso8601("1970-01-02") == 86400);
    CHECK(format_iso8601(parse_iso8601("2014-07-01T13:05:30")) == "2014-07-01T13:05:30");
    CHECK_THROWS_AS(parse_iso8601("2014-13-01"), InvalidInput);
    CHECK_THROWS_AS(parse_iso8601("garbage"), InvalidInput);
}

TEST_CASE("frequency strings") {
    CHECK(Freq::parse("1H").seconds == 3600);
    CHECK(Freq::parse("5min").seconds == 300);
    CHECK(Freq::parse("1D").seconds == 86400);
    CHECK(Freq::parse("H").seconds == 3600);
    CHECK(Freq::parse("1H").scaled(6).text == "6H");
    CHECK(Freq::parse("5min").scaled(6).seconds == 1800);
    CHECK_THROWS_AS(Freq::parse("1fortnight"), InvalidInput);
}

TEST_CASE("window sampler visits every offset exactly once per epoch") {
    TimeSeries s = make_series(5);
    WindowSampler sampler(s, 2, 2, 7);
    REQUIRE(sampler.windows_per_epoch() == 2);
    std::set<std::size_t> seen;
    for (int i = 0; i < 2; ++i) seen.insert(sampler.next().origin_offset);
    CHECK(seen == std::set<std::size_t>{0, 1});

    TimeSeries longer = make_series(40);
    WindowSampler a(longer, 8, 4, 123);
    WindowSampler b(longer, 8, 4, 123);
    std::vector<std::size_t> order_a, order_b;
    std::set<std::size_t> epoch;
    for (std::size_t i = 0; i < a.windows_per_epoch(); ++i) {
        order_a.push_back(a.next().origin_offset);
        order_b.push_back(b.next().origin_offset);
        epoch.insert(order_a.back());
    }
    CHECK(order_a == order_b); // same seed, same order
    CHECK(epoch.size() == a.windows_per_epoch());
}

TEST_CASE("window sampler rejects short series") {
    TimeSeries s = make_series(3);
    CHECK_THROWS_WITH(WindowSampler(s, 2, 2, 0), Catch::Matchers::ContainsSubstring("too short"));
}

TEST_CASE("split matches the every-Kth-value rule") {
    TimeSeries s = make_series(12);
    Window w = make_window(s, 0, 6, 6);

    SubSeriesBundle reg = split_subseries(w, 3, regular_ordering());
    CHECK(reg.subs[0] == std::vector<double>{0, 3, 6, 9});
    CHECK(reg.subs[1] == std::vector<double>{1, 4, 7, 10});
    CHECK(reg.subs[2] == std::vector<double>{2, 5, 8, 11});
    CHECK(reg.T_tilde == 2);
    CHECK(reg.N_tilde == 2);

    Window w6 = make_window(s, 0, 3, 3);
    SubSeriesBundle k1 = split_subseries(w6, 1, regular_ordering());
    CHECK(k1.subs[0] == std::vector<double>{0, 1, 2, 3, 4, 5});

    SubSeriesBundle back = split_subseries(w6, 3, backfill_ordering());
    CHECK(back.subs[0] == std::vector<double>{2, 5});
    CHECK(back.subs[1] == std::vector<double>{1, 4});
    CHECK(back.subs[2] == std::vector<double>{0, 3});
}

TEST_CASE("split rejects non-divisible lengths") {
    TimeSeries s = make_series(10);
    Window w = make_window(s, 0, 5, 5);
    CHECK_THROWS_WITH(split_subseries(w, 3, regular_ordering()),
                      Catch::Matchers::ContainsSubstring("K=3"));
}

TEST_CASE("merge inverts split exactly") {
    Rng rng(99);
    for (std::size_t K : {1u, 2u, 3u, 6u}) {
        for (Ordering ord : {regular_ordering(), backfill_ordering()}) {
            TimeSeries s;
            s.id = "r";
            s.start_epoch = 0;
            s.freq = Freq::parse("1H");
            for (int i = 0; i < 48; ++i) s.values.push_back(rng.normal());
            Window w = make_window(s, 0, 4 * K, 2 * K);
            Window round = merge_subseries(split_subseries(w, K, ord));
            CHECK(round.conditioning == w.conditioning);
            CHECK(round.prediction == w.prediction);
            CHECK(round.origin_offset == w.origin_offset);
        }
    }

    // The documented backfill example, inverted.
    SubSeriesBundle b;
    b.K = 3;
    b.ordering = backfill_ordering();
    b.subs = {{2, 5}, {1, 4}, {0, 3}};
    b.T_tilde = 1;
    b.N_tilde = 1;
    Window merged = merge_subseries(b);
    CHECK(merged.joined() == std::vector<double>{0, 1, 2, 3, 4, 5});

    SubSeriesBundle ragged = b;
    ragged.subs[1] = {1};
    CHECK_THROWS_WITH(merge_subseries(ragged), Catch::Matchers::ContainsSubstring("ragged"));
}

TEST_CASE("min-max scaling") {
    ScaleParams p = minmax_fit({2, 4, 6});
    CHECK(p.min == 2);
    CHECK(p.max == 6);
    CHECK_FALSE(p.degenerate);
    CHECK(minmax_apply(4, p) == 0.5);
    CHECK(minmax_apply(8, p) == 1.5); // out-of-range values may leave [0,1]

    ScaleParams deg = minmax_fit({5, 5, 5});
    CHECK(deg.degenerate);
    CHECK(minmax_apply(7, deg) == 0.0);
    CHECK(minmax_invert(0.3, deg) == 5.0);

    ScaleParams neg = minmax_fit({-1, 3});
    CHECK(neg.min == -1);
    CHECK(neg.max == 3);

    CHECK_THROWS_AS(minmax_fit({}), InvalidInput);

    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double x = rng.uniform(-50, 50);
        const double round = minmax_invert(minmax_apply(x, neg), neg);
        CHECK(std::abs(round - x) <= 1e-12 * std::max(1.0, std::abs(x)));
    }
}

TEST_CASE("lag features carry explicit missing markers") {
    auto lags = build_lag_features({1, 2, 3, 4}, 2);
    REQUIRE(lags.size() == 4);
    CHECK(lags[0].missing);
    CHECK(lags[1].missing);
    CHECK(lags[2].value == 1);
    CHECK(lags[3].value == 2);

    auto lag1 = build_lag_features({5, 6, 7}, 1);
    CHECK(lag1[1].value == 5);
    CHECK(lag1[2].value == 6);

    // Lag 24 on hourly data lines up the same hour of day.
    std::vector<double> hourly(48);
    for (int i = 0; i < 48; ++i) hourly[static_cast<std::size_t>(i)] = i % 24;
    auto lag24 = build_lag_features(hourly, 24);
    for (std::size_t t = 24; t < 48; ++t) {
        CHECK(lag24[t].value == hourly[t]);
    }
}

TEST_CASE("seasonal covariates") {
    TimeSeries s = make_series(200); // starts Monday 00:00
    Window w = make_window(s, 0, 100, 0);
    auto cov = build_seasonal_covariates(w);
    CHECK(cov[12][0] == 0.5);        // hour 12 -> half way through the day
    CHECK(cov[84][1] == 0.5);        // week-hour 84 -> half way through the week
    CHECK(cov[0][0] == 0.0);
    CHECK(cov[0][1] == 0.0);

    TimeSeries daily = make_series(20);
    daily.freq = Freq::parse("1D");
    Window dw = make_window(daily, 0, 10, 0);
    auto dcov = build_seasonal_covariates(dw);
    for (const auto& row : dcov) CHECK(row[0] == 0.0); // day axis unresolved at daily frequency
    CHECK(dcov[3][1] == Catch::Approx(3.0 / 7.0));
}
