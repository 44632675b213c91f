#include <catch2/catch_amalgamated.hpp>

#include "subar/features.hpp"

using namespace subar;

namespace {

BinningSpec unit_spec() {
    BinningSpec s;
    s.low = 0.0;
    s.high = 1.0;
    s.levels = 3;
    s.bins = 12;
    return s;
}

} // namespace

TEST_CASE("block width arithmetic") {
    CHECK(value_block_width(3, 12) == 108);
    CHECK(value_block_width(2, 3) == 19);
    CHECK(seasonal_block_width(64) == 136);
}

TEST_CASE("in-extent value sets exactly L ones in the one-hot block") {
    BinningSpec spec = unit_spec();
    const auto features = encode_input_features({MaybeValue::of(0.53)}, spec);
    REQUIRE(features.size() == 108);
    int ones = 0;
    for (std::size_t i = 0; i < 36; ++i) {
        if (features[i] != 0.0) {
            CHECK(features[i] == 1.0);
            ones += 1;
        }
    }
    CHECK(ones == 3);
    // Flags clear for an in-extent value.
    CHECK(features[105] == 0.0);
    CHECK(features[106] == 0.0);
    CHECK(features[107] == 0.0);
}

TEST_CASE("missing value leaves the one-hot block empty and sets the flag") {
    BinningSpec spec = unit_spec();
    const auto features = encode_input_features({MaybeValue::none()}, spec);
    for (std::size_t i = 0; i < 105; ++i) CHECK(features[i] == 0.0);
    CHECK(features[107] == 1.0);
}

TEST_CASE("below/above extent clamp to edge cells with flags") {
    BinningSpec spec = unit_spec();
    const auto below = encode_input_features({MaybeValue::of(-3.0)}, spec);
    CHECK(below[0] == 1.0);   // level-0 bin 0
    CHECK(below[12] == 1.0);  // level-1 bin 0
    CHECK(below[24] == 1.0);  // level-2 bin 0
    CHECK(below[105] == 1.0); // below flag
    const auto above = encode_input_features({MaybeValue::of(9.0)}, spec);
    CHECK(above[11] == 1.0);
    CHECK(above[106] == 1.0);
    // Above-extent saturates the thermometer block.
    for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t j = 0; j < 11; ++j) CHECK(above[72 + l * 11 + j] == 1.0);
    }
}

TEST_CASE("feature width scales linearly in the number of values") {
    BinningSpec spec = unit_spec();
    std::vector<MaybeValue> six(6, MaybeValue::of(0.4));
    CHECK(encode_input_features(six, spec).size() == 6 * 108);
}

TEST_CASE("thermometer ranges expand to the same dense vector") {
    BinningSpec spec = unit_spec();
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.uniform(-0.3, 1.3);
        SparseFeatures packed, expanded;
        packed.width = expanded.width = 108;
        append_value_block(MaybeValue::of(v), spec, 0, packed, false);
        append_value_block(MaybeValue::of(v), spec, 0, expanded, true);
        CHECK(packed.to_dense() == expanded.to_dense());
        CHECK(expanded.ranges.empty());
    }
}

TEST_CASE("fractional block recovers within-bin position") {
    BinningSpec spec = unit_spec();
    const double v = 0.5 + 0.5 / 12.0; // half way through level-0 bin 6
    const auto f = encode_input_features({MaybeValue::of(v)}, spec);
    CHECK(f[36 + 6] == Catch::Approx(0.5));
}

TEST_CASE("seasonal axis block") {
    SparseFeatures sf;
    sf.width = seasonal_block_width(8);
    SeasonalPhase phase;
    phase.day = 0.25;
    phase.day_active = true;
    phase.week = 0.0;
    phase.week_active = false;
    append_seasonal_block(phase, 8, 0, sf);
    const auto dense = sf.to_dense();
    CHECK(dense[2] == 1.0); // 0.25 * 8 = bin 2, no interpolation remainder
    CHECK(dense[8] == Catch::Approx(1.0));  // sin(pi/2)
    CHECK(dense[9] == Catch::Approx(0.0).margin(1e-12)); // cos(pi/2)
    CHECK(dense[10] == 0.25);
    CHECK(dense[11] == 1.0); // active flag
    // Inactive week axis stays all zero.
    for (std::size_t i = 12; i < dense.size(); ++i) CHECK(dense[i] == 0.0);
}

TEST_CASE("input dropout") {
    Rng rng(17);
    std::vector<double> features(64, 1.0);

    CHECK(input_dropout(features, 0.0, rng, true) == features);
    CHECK(input_dropout(features, 0.7, rng, false) == features);
    CHECK_THROWS_AS(input_dropout(features, 1.0, rng, true), InvalidInput);

    // Dropping and rescaling is unbiased: the mean of many dropped copies of
    // a constant vector stays near the original.
    const double p = 0.2;
    std::vector<double> mean(features.size(), 0.0);
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) {
        const auto dropped = input_dropout(features, p, rng, true);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += dropped[i];
    }
    double avg = 0.0;
    for (double& m : mean) {
        m /= reps;
        avg += m;
    }
    avg /= static_cast<double>(mean.size());
    CHECK(avg == Catch::Approx(1.0).epsilon(0.01));
}

TEST_CASE("sparse dropout matches dense semantics in expectation") {
    BinningSpec spec = unit_spec();
    SparseFeatures sf;
    sf.width = 108;
    append_value_block(MaybeValue::of(0.77), spec, 0, sf, true);
    const auto dense = sf.to_dense();
    double dense_sum = 0.0;
    for (double v : dense) dense_sum += v;

    Rng rng(23);
    double total = 0.0;
    const int reps = 20000;
    for (int r = 0; r < reps; ++r) {
        SparseFeatures copy = sf;
        input_dropout_sparse(copy, 0.2, rng);
        for (const auto& e : copy.entries) total += e.val;
    }
    CHECK(total / reps == Catch::Approx(dense_sum).epsilon(0.02));

    SparseFeatures with_ranges;
    with_ranges.width = 108;
    append_value_block(MaybeValue::of(0.77), spec, 0, with_ranges, false);
    if (!with_ranges.ranges.empty()) {
        CHECK_THROWS_AS(input_dropout_sparse(with_ranges, 0.2, rng), InvalidInput);
    }
}
