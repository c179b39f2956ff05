#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pfvar/discrete.hpp"
#include "pfvar/errors.hpp"
#include "pfvar/lag.hpp"

namespace pfvar {

/// Truncated asymptotic variance with its individual summands, one per time
/// m in [ell, n]. value is their sum.
struct ExactVariance {
    double value = 0.0;
    std::int64_t ell = 0;
    std::vector<double> terms;
};

namespace detail {

/// One application of the unnormalised one-step operator to a column vector:
/// (Q<z> v)(x) = g<z>(x) * sum_x' M(x, x') v(x').
inline std::vector<double> apply_q(const DiscreteModel& model, int symbol,
                                   const std::vector<double>& v) {
    const int size = model.state_count();
    const auto& g = model.potential(symbol);
    std::vector<double> out(static_cast<std::size_t>(size), 0.0);
    for (int x = 0; x < size; ++x) {
        double sum = 0.0;
        for (int xp = 0; xp < size; ++xp) {
            sum += model.transition[static_cast<std::size_t>(x)][static_cast<std::size_t>(xp)] *
                   v[static_cast<std::size_t>(xp)];
        }
        out[static_cast<std::size_t>(x)] = g[static_cast<std::size_t>(x)] * sum;
    }
    return out;
}

/// Row-vector update eta <- normalize(eta Q<z>), returning the mass that was
/// normalised away (unused by callers, but kept positive-checked).
inline void predictor_step(const DiscreteModel& model, int symbol, std::vector<double>& eta) {
    const int size = model.state_count();
    const auto& g = model.potential(symbol);
    std::vector<double> next(static_cast<std::size_t>(size), 0.0);
    for (int x = 0; x < size; ++x) {
        const double mass = eta[static_cast<std::size_t>(x)] * g[static_cast<std::size_t>(x)];
        for (int xp = 0; xp < size; ++xp) {
            next[static_cast<std::size_t>(xp)] +=
                mass * model.transition[static_cast<std::size_t>(x)][static_cast<std::size_t>(xp)];
        }
    }
    double total = 0.0;
    for (double p : next) total += p;
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw NumericalUnderflow("predictor mass vanished or overflowed");
    }
    for (auto& p : next) p /= total;
    eta.swap(next);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

}  // namespace detail

/// Predictor distribution after consuming z_0..z_{n-1}; the empty sequence
/// yields the initial distribution.
inline std::vector<double> exact_predictor(const DiscreteModel& model,
                                           std::span<const int> z_seq) {
    model.validate();
    std::vector<double> eta = model.chi;
    for (int symbol : z_seq) detail::predictor_step(model, symbol, eta);
    return eta;
}

/// Filter distribution after consuming z_0..z_n (the final symbol updates).
inline std::vector<double> exact_filter(const DiscreteModel& model,
                                        std::span<const int> z_seq) {
    if (z_seq.empty()) throw IndexOutOfRange("exact_filter needs at least one observation");
    std::vector<double> eta =
        exact_predictor(model, z_seq.subspan(0, z_seq.size() - 1));
    const auto& g = model.potential(z_seq.back());
    double total = 0.0;
    for (std::size_t x = 0; x < eta.size(); ++x) {
        eta[x] *= g[x];
        total += eta[x];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw NumericalUnderflow("filter mass vanished or overflowed");
    }
    for (auto& p : eta) p /= total;
    return eta;
}

/// Truncated asymptotic variance of the predictor flow at time n = |z_seq|:
///
///   sum_{m=ell}^{n} eta_m[(Q_{m:n-1}(h - eta_n h))^2] / (eta_m[Q_{m:n-1} 1])^2.
///
/// The backward products are renormalised every step, with the scales
/// accumulated in log space and recombined per term, so long records neither
/// underflow nor overflow. Each summand is a ratio of positives and is
/// computed to full relative precision regardless of its size.
inline ExactVariance exact_asymptotic_variance(const DiscreteModel& model,
                                               std::span<const int> z_seq,
                                               std::span<const double> h,
                                               std::int64_t ell) {
    model.validate();
    const auto n = static_cast<std::int64_t>(z_seq.size());
    const int size = model.state_count();
    if (ell < 0 || ell > n) {
        throw IndexOutOfRange("truncation index must lie in [0, " + std::to_string(n) + "]");
    }
    if (static_cast<int>(h.size()) != size) {
        throw InvalidParams("test vector length must match the state count");
    }

    // Forward pass: predictors eta_0..eta_n.
    std::vector<std::vector<double>> etas(static_cast<std::size_t>(n) + 1);
    etas[0] = model.chi;
    for (std::int64_t m = 0; m < n; ++m) {
        etas[static_cast<std::size_t>(m + 1)] = etas[static_cast<std::size_t>(m)];
        detail::predictor_step(model, z_seq[static_cast<std::size_t>(m)],
                               etas[static_cast<std::size_t>(m + 1)]);
    }

    // Centered test vector.
    std::vector<double> centered(h.begin(), h.end());
    const double h_mean = detail::dot(etas[static_cast<std::size_t>(n)], centered);
    for (auto& value : centered) value -= h_mean;

    // Backward pass from m = n down to ell.
    ExactVariance result;
    result.ell = ell;
    result.terms.assign(static_cast<std::size_t>(n - ell) + 1, 0.0);
    std::vector<double> u = centered;                                  // Q_{m:n-1} (h - eta_n h)
    std::vector<double> w(static_cast<std::size_t>(size), 1.0);        // Q_{m:n-1} 1
    double u_log_scale = 0.0;
    double w_log_scale = 0.0;
    bool u_vanished = false;
    for (std::int64_t m = n; m >= ell; --m) {
        if (m < n) {
            const int symbol = z_seq[static_cast<std::size_t>(m)];
            if (!u_vanished) {
                u = detail::apply_q(model, symbol, u);
                double u_max = 0.0;
                for (double value : u) u_max = std::max(u_max, std::fabs(value));
                if (u_max == 0.0) {
                    u_vanished = true;  // h is constant on the reachable set
                } else {
                    for (auto& value : u) value /= u_max;
                    u_log_scale += std::log(u_max);
                }
            }
            w = detail::apply_q(model, symbol, w);
            double w_max = 0.0;
            for (double value : w) w_max = std::max(w_max, value);
            if (!(w_max > 0.0) || !std::isfinite(w_max)) {
                throw NumericalUnderflow("backward mass vanished or overflowed");
            }
            for (auto& value : w) value /= w_max;
            w_log_scale += std::log(w_max);
        }
        double term = 0.0;
        if (!u_vanished) {
            const auto& eta = etas[static_cast<std::size_t>(m)];
            std::vector<double> u_squared(u.size());
            for (std::size_t x = 0; x < u.size(); ++x) u_squared[x] = u[x] * u[x];
            const double numerator = detail::dot(eta, u_squared);
            const double denominator = detail::dot(eta, w);
            term = numerator / (denominator * denominator) *
                   std::exp(2.0 * (u_log_scale - w_log_scale));
        }
        result.terms[static_cast<std::size_t>(m - ell)] = term;
    }
    // Terms grow with m as a rule; summing in ascending m adds small to large.
    for (double term : result.terms) result.value += term;
    return result;
}

/// Truncated asymptotic variance of the filter flow at time n = |z_seq| - 1:
/// the predictor-flow variance of g<z_n>(h - phi_n h) over z_0..z_{n-1},
/// divided by the squared predictor mass of g<z_n>.
inline ExactVariance exact_filter_variance(const DiscreteModel& model,
                                           std::span<const int> z_seq,
                                           std::span<const double> h,
                                           std::int64_t ell) {
    if (z_seq.empty()) throw IndexOutOfRange("exact_filter_variance needs z_0..z_n");
    const auto prefix = z_seq.subspan(0, z_seq.size() - 1);
    const int last = z_seq.back();
    const std::vector<double> eta = exact_predictor(model, prefix);
    const std::vector<double> phi = exact_filter(model, z_seq);
    const auto& g = model.potential(last);
    if (static_cast<int>(h.size()) != model.state_count()) {
        throw InvalidParams("test vector length must match the state count");
    }

    double phi_h = 0.0;
    for (std::size_t x = 0; x < phi.size(); ++x) phi_h += phi[x] * h[x];
    std::vector<double> transformed(h.size());
    for (std::size_t x = 0; x < h.size(); ++x) transformed[x] = g[x] * (h[x] - phi_h);

    double eta_g = 0.0;
    for (std::size_t x = 0; x < eta.size(); ++x) eta_g += eta[x] * g[x];
    if (!(eta_g > 0.0)) throw NumericalUnderflow("predictor mass of the potential vanished");

    ExactVariance result = exact_asymptotic_variance(model, prefix, transformed, ell);
    const double scale = 1.0 / (eta_g * eta_g);
    result.value *= scale;
    for (auto& term : result.terms) term *= scale;
    return result;
}

/// Lag truncation bias of the predictor-flow variance at time n = |z_seq|:
/// the mass of the summands dropped by rooting the genealogy at
/// (n - lag) v 0. Evaluated as the head sum of the full variance series
/// rather than a difference of two near-equal totals, which would cancel
/// catastrophically for well-mixing models.
inline double exact_bias(const DiscreteModel& model, std::span<const int> z_seq,
                         std::span<const double> h, std::int64_t lag) {
    if (lag < 0) throw IndexOutOfRange("lag must be nonnegative");
    const auto n = static_cast<std::int64_t>(z_seq.size());
    const std::int64_t ell = root_time(n, lag);
    const ExactVariance full = exact_asymptotic_variance(model, z_seq, h, 0);
    double bias = 0.0;
    for (std::int64_t m = 0; m < ell; ++m) bias += full.terms[static_cast<std::size_t>(m)];
    return bias;
}

}  // namespace pfvar
