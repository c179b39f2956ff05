#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pfvar/errors.hpp"
#include "pfvar/filter.hpp"
#include "pfvar/gaussian.hpp"
#include "pfvar/model.hpp"

namespace pfvar {

enum class Flow { predictor, filter };
enum class EstimatorKind { fixed_lag, cle };

inline const char* to_string(Flow flow) {
    return flow == Flow::predictor ? "predictor" : "filter";
}
inline const char* to_string(EstimatorKind kind) {
    return kind == EstimatorKind::fixed_lag ? "fixed_lag" : "cle";
}

/// A single variance estimate with the metadata needed to interpret it:
/// the time it was formed at, the lag of the traced genealogy (kFullTracing
/// for the eve-based estimator), which distribution flow it refers to and
/// which estimator produced it.
struct VarianceEstimate {
    double value = 0.0;
    std::int64_t time_n = 0;
    std::int64_t lag = 0;
    Flow flow = Flow::predictor;
    EstimatorKind estimator = EstimatorKind::fixed_lag;
};

namespace detail {

/// sum_i (sum_{j : groups[j] = i} terms[j])^2, accumulated in ascending
/// particle index so identical states give bitwise-identical results.
inline double grouped_square_sum(const std::vector<std::int32_t>& groups,
                                 const std::vector<double>& terms) {
    std::vector<double> acc(groups.size(), 0.0);
    for (std::size_t j = 0; j < groups.size(); ++j) {
        acc[static_cast<std::size_t>(groups[j])] += terms[j];
    }
    double total = 0.0;
    for (double a : acc) total += a * a;
    return total;
}

inline bool single_group(const std::vector<std::int32_t>& root) {
    for (auto index : root) {
        if (index != root.front()) return false;
    }
    return true;
}

/// Test function values shifted by the first one. The estimators are exactly
/// invariant under adding a constant to h, so the shift changes nothing
/// mathematically, but it makes a constant h produce bitwise zeros instead
/// of rounding residue.
inline std::vector<double> shifted_values(const FilterState& state, const TestFunction& h) {
    const int count = state.particle_count();
    std::vector<double> values(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) values[j] = h(state.positions()[j]);
    const double shift = values[0];
    for (auto& value : values) value -= shift;
    return values;
}

inline double predictor_group_value(const FilterState& state, const TestFunction& h,
                                    const std::vector<std::int32_t>& root) {
    // A fully coalesced root row makes the one group sum telescope to zero.
    if (single_group(root)) return 0.0;
    const int count = state.particle_count();
    std::vector<double> centered = shifted_values(state, h);
    double mean = 0.0;
    for (double value : centered) mean += value;
    mean /= count;
    for (auto& value : centered) value -= mean;
    return grouped_square_sum(root, centered) / count;
}

inline double filter_group_value(const FilterState& state, const TestFunction& h,
                                 const std::vector<std::int32_t>& root) {
    if (!state.has_weights()) throw Error("filter variance requires weights; call weigh() first");
    if (single_group(root)) return 0.0;
    const int count = state.particle_count();
    const double total = state.weight_sum();
    std::vector<double> terms = shifted_values(state, h);
    double mean = 0.0;
    for (int j = 0; j < count; ++j) mean += state.weights()[j] / total * terms[j];
    for (int j = 0; j < count; ++j) {
        terms[j] = state.weights()[j] / total * (terms[j] - mean);
    }
    return grouped_square_sum(root, terms) * count;
}

}  // namespace detail

/// Fixed-lag variance estimator for the predictor flow: particles are grouped
/// by their ancestor at the window root (n - lag) v 0, and the grouped sums of
/// the centered test function are squared and averaged.
inline VarianceEstimate fixed_lag_predictor_variance(const FilterState& state,
                                                     const TestFunction& h,
                                                     std::int64_t lag) {
    const std::int64_t root = root_time(state.n(), lag);
    const double value = detail::predictor_group_value(state, h, state.enoch_row(root));
    return {value, state.n(), lag, Flow::predictor, EstimatorKind::fixed_lag};
}

inline VarianceEstimate fixed_lag_predictor_variance(const FilterState& state,
                                                     const TestFunction& h) {
    return fixed_lag_predictor_variance(state, h, state.lag());
}

/// Full-tracing estimator built from the eve indices (the CLE). Collapses to
/// zero once the genealogy has coalesced; callers can watch
/// unique_eve_count() to detect that.
inline VarianceEstimate cle_predictor_variance(const FilterState& state,
                                               const TestFunction& h) {
    const double value = detail::predictor_group_value(state, h, state.eve());
    return {value, state.n(), kFullTracing, Flow::predictor, EstimatorKind::cle};
}

/// Fixed-lag estimator for the filter flow, weighted form:
/// N * sum_i ( sum_{j in group i} (w_j / W) { h(x_j) - filter mean } )^2.
/// Requires weights for the current positions.
inline VarianceEstimate fixed_lag_filter_variance(const FilterState& state,
                                                  const TestFunction& h,
                                                  std::int64_t lag) {
    const std::int64_t root = root_time(state.n(), lag);
    const double value = detail::filter_group_value(state, h, state.enoch_row(root));
    return {value, state.n(), lag, Flow::filter, EstimatorKind::fixed_lag};
}

inline VarianceEstimate fixed_lag_filter_variance(const FilterState& state,
                                                  const TestFunction& h) {
    return fixed_lag_filter_variance(state, h, state.lag());
}

inline VarianceEstimate cle_filter_variance(const FilterState& state,
                                            const TestFunction& h) {
    const double value = detail::filter_group_value(state, h, state.eve());
    return {value, state.n(), kFullTracing, Flow::filter, EstimatorKind::cle};
}

/// The filter-flow estimate written as a predictor-flow estimate of the
/// transformed function g<z>(h - filter mean), divided by the squared cloud
/// mean of the potential. Algebraically identical to the weighted form; kept
/// as a second route for consistency checking. The weight shift cancels
/// between numerator and denominator.
inline double filter_variance_ratio_form(const FilterState& state, const TestFunction& h,
                                         std::int64_t lag) {
    if (!state.has_weights()) throw Error("ratio form requires weights; call weigh() first");
    const std::int64_t root_m = root_time(state.n(), lag);
    const auto& root = state.enoch_row(root_m);
    if (detail::single_group(root)) return 0.0;

    const int count = state.particle_count();
    const double total = state.weight_sum();
    std::vector<double> values = detail::shifted_values(state, h);
    double filter_mean = 0.0;
    for (int j = 0; j < count; ++j) filter_mean += state.weights()[j] / total * values[j];

    std::vector<double> transformed(static_cast<std::size_t>(count));
    double transformed_mean = 0.0;
    for (int j = 0; j < count; ++j) {
        transformed[j] = state.weights()[j] * (values[j] - filter_mean);
        transformed_mean += transformed[j];
    }
    transformed_mean /= count;
    for (auto& t : transformed) t -= transformed_mean;

    const double numerator = detail::grouped_square_sum(root, transformed) / count;
    const double potential_mean = total / count;
    return numerator / (potential_mean * potential_mean);
}

inline double filter_variance_ratio_form(const FilterState& state, const TestFunction& h) {
    return filter_variance_ratio_form(state, h, state.lag());
}

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct QuantileSpec {
    enum class Kind { gaussian, student_t };
    Kind kind = Kind::gaussian;
    int dof = 0;  // student_t only
};

inline double student_t_quantile(double p, int dof);  // defined below

/// Two-sided confidence interval around `mean` at the given coverage level,
/// using the variance estimate scaled by 1/N:
/// mean +- q * sqrt(value) / sqrt(N), with q the upper (1+level)/2 quantile.
/// Gaussian quantiles by default; Student's t as an option for hedging
/// against variance underestimation.
inline ConfidenceInterval confidence_interval(double mean, const VarianceEstimate& estimate,
                                              int count, double level,
                                              QuantileSpec quantile = {}) {
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidLevel("confidence level must lie strictly inside (0, 1)");
    }
    if (count < 1) throw InvalidConfig("particle count must be at least 1");
    const double p = 0.5 * (1.0 + level);
    const double q = quantile.kind == QuantileSpec::Kind::gaussian
                         ? normal_quantile(p)
                         : student_t_quantile(p, quantile.dof);
    const double half_width = q * std::sqrt(estimate.value) / std::sqrt(double(count));
    return {mean - half_width, mean + half_width};
}

}  // namespace pfvar

#include <boost/math/distributions/students_t.hpp>

namespace pfvar {

inline double student_t_quantile(double p, int dof) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidLevel("t quantile: p must lie in (0, 1)");
    if (dof < 1) throw InvalidLevel("t quantile: degrees of freedom must be >= 1");
    return boost::math::quantile(boost::math::students_t(double(dof)), p);
}

}  // namespace pfvar
