#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pfvar/errors.hpp"
#include "pfvar/rng.hpp"

namespace pfvar {

/// One categorical draw by inverse CDF over an inclusive prefix-sum table:
/// the smallest index whose cumulative weight reaches u * total. Zero-weight
/// entries are never selected because u is strictly positive.
inline std::int32_t categorical_from_cdf(std::span<const double> cumulative,
                                         double total, Rng& rng) {
    const double u = rng.uniform01() * total;
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;  // u == total after rounding
    return static_cast<std::int32_t>(it - cumulative.begin());
}

/// `count` i.i.d. categorical draws with P(index = l) proportional to
/// weights[l]. Weights must be nonnegative with a positive sum; NaN or
/// negative entries and all-zero weights are rejected as degenerate.
inline std::vector<std::int32_t> resample_categorical(std::span<const double> weights,
                                                      int count, Rng& rng) {
    if (weights.empty()) throw DegenerateWeights("no weights to resample from");
    std::vector<double> cumulative(weights.size());
    double running = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double w = weights[i];
        if (std::isnan(w) || w < 0.0) {
            throw DegenerateWeights("weight is NaN or negative");
        }
        running += w;
        cumulative[i] = running;
    }
    if (!(running > 0.0) || !std::isfinite(running)) {
        throw DegenerateWeights("weights sum to zero or overflow");
    }
    std::vector<std::int32_t> indices(static_cast<std::size_t>(count));
    for (auto& index : indices) {
        index = categorical_from_cdf(cumulative, running, rng);
    }
    return indices;
}

}  // namespace pfvar
