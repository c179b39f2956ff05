#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "pfvar/discrete.hpp"
#include "pfvar/exact.hpp"
#include "pfvar/filter.hpp"
#include "pfvar/models.hpp"
#include "pfvar/variance.hpp"
#include "support/oracles.hpp"
#include "support/scripted.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using pfvar::testing::scripted_model;
using pfvar::testing::two_state_model;

TEST_CASE("constant test functions give exactly zero variance") {
    const auto model = pfvar::make_linear_gaussian({.phi = 0.5, .sigma_u = 1.0, .sigma_v = 1.0});
    pfvar::FilterState state = pfvar::init_filter(model, 32, 3, 7);
    for (int t = 0; t < 5; ++t) state.step(0.1);
    const auto constant = pfvar::TestFunction::custom([](double) { return 4.2; });
    CHECK(pfvar::fixed_lag_predictor_variance(state, constant).value == 0.0);
    CHECK(pfvar::cle_predictor_variance(state, constant).value == 0.0);
    state.weigh(0.0);
    CHECK(pfvar::fixed_lag_filter_variance(state, constant).value == 0.0);
}

TEST_CASE("two-particle predictor estimate, worked by hand") {
    // Positions 1 and 3 at time 1; the point-mass weight forces both
    // ancestors onto particle 0, so the root row at time 0 is (0, 0) while
    // the identity row at time 1 is (0, 1).
    const auto model = scripted_model({1.0, 3.0}, {1.0, 3.0}, [](double, double x) {
        return x < 2.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    });
    pfvar::FilterState state = pfvar::init_filter(model, 2, 5, 3);
    state.step(0.0);
    REQUIRE(state.positions() == std::vector<double>{1.0, 3.0});
    REQUIRE(state.enoch_row(0) == std::vector<std::int32_t>{0, 0});

    const auto h = pfvar::TestFunction::identity();
    // Distinct groups: (1/2) ((1-2)^2 + (3-2)^2) = 1.
    CHECK_THAT(pfvar::fixed_lag_predictor_variance(state, h, 0).value, WithinAbs(1.0, 1e-15));
    // Shared ancestor: the group sum telescopes to zero.
    CHECK(pfvar::fixed_lag_predictor_variance(state, h, 1).value == 0.0);
    CHECK(pfvar::cle_predictor_variance(state, h).value == 0.0);
}

TEST_CASE("two-particle filter estimate, worked by hand") {
    // Positions 0 and 4 with potentials 3 and 1: normalized weights
    // (.75, .25), filter mean 1, terms (.75)^2 + (.75)^2, times N = 2.25.
    const auto model = scripted_model({0.0, 4.0}, {0.0}, [](double, double x) {
        return x < 2.0 ? std::log(3.0) : 0.0;
    });
    pfvar::FilterState state = pfvar::init_filter(model, 2, 1, 3);
    state.weigh(0.0);
    const auto h = pfvar::TestFunction::identity();
    CHECK_THAT(pfvar::fixed_lag_filter_variance(state, h).value, WithinAbs(2.25, 1e-12));
    CHECK_THAT(pfvar::cle_filter_variance(state, h).value, WithinAbs(2.25, 1e-12));
}

TEST_CASE("full-window fixed lag coincides with the CLE") {
    const auto model = pfvar::make_linear_gaussian({.phi = 0.9, .sigma_u = 0.3, .sigma_v = 0.8});
    const auto h = pfvar::TestFunction::identity();
    pfvar::FilterState state = pfvar::init_filter(model, 64, 10, 11);
    pfvar::Rng obs(5);
    for (int t = 0; t < 7; ++t) {
        state.step(obs.normal());
        const double fixed = pfvar::fixed_lag_predictor_variance(state, h).value;
        const double cle = pfvar::cle_predictor_variance(state, h).value;
        CHECK_THAT(fixed, WithinRel(cle, 1e-12));
    }
}

TEST_CASE("a collapsed genealogy sends the CLE to exactly zero") {
    // Potentials concentrate all selections on particle 0.
    const auto model = scripted_model({0.0, 5.0, 5.0}, {0.0, 5.0, 5.0}, [](double, double x) {
        return x < 2.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    });
    pfvar::FilterState state = pfvar::init_filter(model, 3, 1, 3);
    state.step(0.0);
    REQUIRE(state.unique_eve_count() == 1);
    const auto h = pfvar::TestFunction::identity();
    CHECK(pfvar::cle_predictor_variance(state, h).value == 0.0);
    // The windowed estimator still sees distinct recent ancestors.
    CHECK(pfvar::fixed_lag_predictor_variance(state, h, 0).value > 0.0);
}

TEST_CASE("estimates are invariant under shifting h and scale as c^2") {
    const auto model =
        pfvar::make_stochastic_volatility({.beta = 0.641, .phi = 0.975, .sigma = 0.165});
    pfvar::FilterState state = pfvar::init_filter(model, 128, 6, 21);
    pfvar::Rng obs(9);
    for (int t = 0; t < 15; ++t) state.step(0.3 * obs.normal());

    const auto id = pfvar::TestFunction::identity();
    const auto shifted = pfvar::TestFunction::custom([](double x) { return x + 5.0; });
    const auto scaled = pfvar::TestFunction::custom([](double x) { return 3.0 * x; });

    const double base_fixed = pfvar::fixed_lag_predictor_variance(state, id).value;
    const double base_cle = pfvar::cle_predictor_variance(state, id).value;
    CHECK_THAT(pfvar::fixed_lag_predictor_variance(state, shifted).value,
               WithinRel(base_fixed, 1e-10));
    CHECK_THAT(pfvar::cle_predictor_variance(state, shifted).value,
               WithinRel(base_cle, 1e-10));
    CHECK_THAT(pfvar::fixed_lag_predictor_variance(state, scaled).value,
               WithinRel(9.0 * base_fixed, 1e-12));
    CHECK_THAT(pfvar::cle_predictor_variance(state, scaled).value,
               WithinRel(9.0 * base_cle, 1e-12));
}

TEST_CASE("weighted and ratio forms of the filter-flow estimator agree") {
    const auto model =
        pfvar::make_stochastic_volatility({.beta = 0.641, .phi = 0.975, .sigma = 0.165});
    const auto h = pfvar::TestFunction::identity();
    pfvar::FilterState state = pfvar::init_filter(model, 256, 8, 13);
    pfvar::Rng obs(3);
    for (int t = 0; t < 25; ++t) state.step(0.4 * obs.normal());
    state.weigh(0.2);
    const double weighted = pfvar::fixed_lag_filter_variance(state, h).value;
    const double ratio = pfvar::filter_variance_ratio_form(state, h);
    CHECK_THAT(weighted, WithinRel(ratio, 1e-9));
}

TEST_CASE("estimates are nonnegative across random runs") {
    pfvar::Rng meta(100);
    for (int run = 0; run < 10; ++run) {
        const auto model = pfvar::make_linear_gaussian(
            {.phi = 0.5, .sigma_u = 0.5 + meta.uniform01(), .sigma_v = 0.5 + meta.uniform01()});
        pfvar::FilterState state =
            pfvar::init_filter(model, 32, 4, meta.next_u64());
        for (int t = 0; t < 12; ++t) state.step(meta.normal());
        const auto h = pfvar::TestFunction::identity();
        CHECK(pfvar::fixed_lag_predictor_variance(state, h).value >= 0.0);
        CHECK(pfvar::cle_predictor_variance(state, h).value >= 0.0);
        state.weigh(0.0);
        CHECK(pfvar::fixed_lag_filter_variance(state, h).value >= 0.0);
    }
}

TEST_CASE("estimate metadata describes where it came from") {
    const auto model = pfvar::make_linear_gaussian({.phi = 0.5, .sigma_u = 1.0, .sigma_v = 1.0});
    pfvar::FilterState state = pfvar::init_filter(model, 16, 3, 1);
    for (int t = 0; t < 5; ++t) state.step(0.0);
    const auto h = pfvar::TestFunction::identity();

    const auto fixed = pfvar::fixed_lag_predictor_variance(state, h);
    CHECK(fixed.time_n == 5);
    CHECK(fixed.lag == 3);
    CHECK(fixed.flow == pfvar::Flow::predictor);
    CHECK(fixed.estimator == pfvar::EstimatorKind::fixed_lag);

    const auto cle = pfvar::cle_predictor_variance(state, h);
    CHECK(cle.lag == pfvar::kFullTracing);
    CHECK(cle.estimator == pfvar::EstimatorKind::cle);

    state.weigh(0.0);
    const auto filter = pfvar::fixed_lag_filter_variance(state, h);
    CHECK(filter.flow == pfvar::Flow::filter);
}

TEST_CASE("confidence intervals follow the quantile arithmetic") {
    const pfvar::VarianceEstimate unit{1.0, 0, 0, pfvar::Flow::predictor,
                                       pfvar::EstimatorKind::fixed_lag};
    const auto interval = pfvar::confidence_interval(0.0, unit, 4000, 0.95);
    CHECK_THAT(interval.hi, WithinAbs(0.030989751615228082, 1e-9));
    CHECK_THAT(interval.lo, WithinAbs(-0.030989751615228082, 1e-9));

    const pfvar::VarianceEstimate zero{0.0, 0, 0, pfvar::Flow::predictor,
                                       pfvar::EstimatorKind::fixed_lag};
    const auto degenerate = pfvar::confidence_interval(1.5, zero, 100, 0.95);
    CHECK(degenerate.lo == 1.5);
    CHECK(degenerate.hi == 1.5);

    const pfvar::VarianceEstimate infinite{std::numeric_limits<double>::infinity(), 0, 0,
                                           pfvar::Flow::predictor,
                                           pfvar::EstimatorKind::fixed_lag};
    const auto everything = pfvar::confidence_interval(0.0, infinite, 100, 0.95);
    CHECK(everything.lo == -std::numeric_limits<double>::infinity());
    CHECK(everything.hi == std::numeric_limits<double>::infinity());

    CHECK_THROWS_AS(pfvar::confidence_interval(0.0, unit, 100, 0.0), pfvar::InvalidLevel);
    CHECK_THROWS_AS(pfvar::confidence_interval(0.0, unit, 100, 1.0), pfvar::InvalidLevel);
    CHECK_THROWS_AS(pfvar::confidence_interval(0.0, unit, 100, -2.0), pfvar::InvalidLevel);
}

TEST_CASE("student-t quantiles widen the interval and converge to gaussian") {
    const pfvar::VarianceEstimate unit{1.0, 0, 0, pfvar::Flow::predictor,
                                       pfvar::EstimatorKind::fixed_lag};
    const auto gaussian = pfvar::confidence_interval(0.0, unit, 100, 0.95);
    const auto student = pfvar::confidence_interval(
        0.0, unit, 100, 0.95,
        {.kind = pfvar::QuantileSpec::Kind::student_t, .dof = 30});
    CHECK(student.hi > gaussian.hi);
    const auto student_wide = pfvar::confidence_interval(
        0.0, unit, 100, 0.95,
        {.kind = pfvar::QuantileSpec::Kind::student_t, .dof = 2000000});
    CHECK_THAT(student_wide.hi, WithinRel(gaussian.hi, 1e-4));
}

TEST_CASE("replicate-averaged filter-flow estimates approach the exact value",
          "[statistical]") {
    const auto discrete = two_state_model();
    const auto model = pfvar::make_discrete(discrete);
    const std::vector<int> symbols{0, 1, 0, 0, 1};  // filter time n = 4
    const std::vector<double> h_values{0.0, 1.0};
    const auto h = pfvar::vector_test_function(h_values);
    const std::int64_t lag = 2;  // root (4 - 2) = 2

    const double exact =
        pfvar::exact_filter_variance(discrete, symbols, h_values, 2).value;

    const int replicates = 300;
    const int count = 5000;
    double mean = 0.0;
    for (int r = 0; r < replicates; ++r) {
        pfvar::FilterState state =
            pfvar::init_filter(model, count, lag, pfvar::derive_seed(808, 17, r));
        for (std::size_t t = 0; t + 1 < symbols.size(); ++t) state.step(symbols[t]);
        state.weigh(symbols.back());
        mean += pfvar::fixed_lag_filter_variance(state, h).value;
    }
    mean /= replicates;
    CHECK_THAT(mean, WithinRel(exact, 0.08));
}
