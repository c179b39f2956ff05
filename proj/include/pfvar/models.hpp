#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pfvar/errors.hpp"
#include "pfvar/gaussian.hpp"
#include "pfvar/model.hpp"
#include "pfvar/rng.hpp"

namespace pfvar {

/// X_{t+1} = phi X_t + sigma_u U_{t+1},  Y_t = X_t + sigma_v V_t,
/// with standard Gaussian noise and stationary initialisation
/// N(0, sigma_u^2 / (1 - phi^2)).
struct LinearGaussianParams {
    double phi = 0.0;
    double sigma_u = 0.0;
    double sigma_v = 0.0;

    void validate() const {
        if (!(std::fabs(phi) < 1.0)) {
            throw InvalidParams("linear Gaussian: |phi| < 1 is required for stationary init");
        }
        if (!(sigma_u >= 0.0)) throw InvalidParams("linear Gaussian: sigma_u must be >= 0");
        if (!(sigma_v > 0.0)) throw InvalidParams("linear Gaussian: sigma_v must be > 0");
    }

    double stationary_variance() const { return sigma_u * sigma_u / (1.0 - phi * phi); }
};

/// X_{t+1} = phi X_t + sigma U_{t+1},  Y_t = beta exp(X_t / 2) V_t.
struct StochasticVolatilityParams {
    double beta = 0.0;
    double phi = 0.0;
    double sigma = 0.0;

    void validate() const {
        if (!(beta > 0.0)) throw InvalidParams("stochastic volatility: beta must be > 0");
        if (!(std::fabs(phi) < 1.0)) {
            throw InvalidParams("stochastic volatility: |phi| < 1 is required");
        }
        if (!(sigma >= 0.0)) throw InvalidParams("stochastic volatility: sigma must be >= 0");
    }

    double stationary_variance() const { return sigma * sigma / (1.0 - phi * phi); }
};

inline std::shared_ptr<const ModelSpec> make_linear_gaussian(const LinearGaussianParams& params) {
    params.validate();
    const double init_sd = std::sqrt(params.stationary_variance());
    const double phi = params.phi;
    const double sigma_u = params.sigma_u;
    const double obs_var = params.sigma_v * params.sigma_v;
    auto spec = std::make_shared<ModelSpec>();
    spec->state_dim = 1;
    spec->initial_sampler = [init_sd](Rng& rng) { return init_sd * rng.normal(); };
    spec->transition_sampler = [phi, sigma_u](double x, Rng& rng) {
        return phi * x + sigma_u * rng.normal();
    };
    spec->log_potential = [obs_var](double y, double x) {
        return log_normal_pdf(y, x, obs_var);
    };
    return spec;
}

inline std::shared_ptr<const ModelSpec> make_stochastic_volatility(
    const StochasticVolatilityParams& params) {
    params.validate();
    const double init_sd = std::sqrt(params.stationary_variance());
    const double phi = params.phi;
    const double sigma = params.sigma;
    const double beta_sq = params.beta * params.beta;
    auto spec = std::make_shared<ModelSpec>();
    spec->state_dim = 1;
    spec->initial_sampler = [init_sd](Rng& rng) { return init_sd * rng.normal(); };
    spec->transition_sampler = [phi, sigma](double x, Rng& rng) {
        return phi * x + sigma * rng.normal();
    };
    spec->log_potential = [beta_sq](double y, double x) {
        // log N(y; 0, beta^2 e^x), expanded so huge |x| stays finite
        return -0.5 * (std::log(2.0 * std::numbers::pi * beta_sq) + x) -
               0.5 * y * y * std::exp(-x) / beta_sq;
    };
    return spec;
}

struct Trajectory {
    std::vector<double> states;
    std::vector<double> observations;
};

namespace detail {

/// Shared simulation loop. Per step t: emit y_t from x_t, then draw x_{t+1}.
template <typename Emit, typename Advance>
Trajectory simulate_scalar(std::int64_t n, double init_sd, std::uint64_t seed, Emit emit,
                           Advance advance) {
    if (n < 1) throw InvalidParams("simulate: n must be at least 1");
    Trajectory trajectory;
    trajectory.states.resize(static_cast<std::size_t>(n));
    trajectory.observations.resize(static_cast<std::size_t>(n));
    Rng rng(seed);
    double x = init_sd * rng.normal();
    for (std::int64_t t = 0; t < n; ++t) {
        trajectory.states[static_cast<std::size_t>(t)] = x;
        trajectory.observations[static_cast<std::size_t>(t)] = emit(x, rng);
        x = advance(x, rng);
    }
    return trajectory;
}

}  // namespace detail

inline Trajectory simulate(const LinearGaussianParams& params, std::int64_t n,
                           std::uint64_t seed) {
    params.validate();
    return detail::simulate_scalar(
        n, std::sqrt(params.stationary_variance()), seed,
        [&params](double x, Rng& rng) { return x + params.sigma_v * rng.normal(); },
        [&params](double x, Rng& rng) { return params.phi * x + params.sigma_u * rng.normal(); });
}

inline Trajectory simulate(const StochasticVolatilityParams& params, std::int64_t n,
                           std::uint64_t seed) {
    params.validate();
    return detail::simulate_scalar(
        n, std::sqrt(params.stationary_variance()), seed,
        [&params](double x, Rng& rng) { return params.beta * std::exp(x / 2.0) * rng.normal(); },
        [&params](double x, Rng& rng) { return params.phi * x + params.sigma * rng.normal(); });
}

/// Predictor means and variances of the scalar Kalman recursion, one entry
/// per time m = 0..n (entry m conditions on y_0..y_{m-1}). Initialised at the
/// stationary prior (0, sigma_u^2 / (1 - phi^2)), matching the particle
/// filter's initial distribution.
struct KalmanTrack {
    std::vector<double> means;
    std::vector<double> variances;
};

inline KalmanTrack kalman_predict(const LinearGaussianParams& params,
                                  std::span<const double> observations) {
    params.validate();
    const std::size_t n = observations.size();
    KalmanTrack track;
    track.means.resize(n + 1);
    track.variances.resize(n + 1);
    double mean = 0.0;
    double variance = params.stationary_variance();
    const double obs_var = params.sigma_v * params.sigma_v;
    track.means[0] = mean;
    track.variances[0] = variance;
    for (std::size_t m = 0; m < n; ++m) {
        const double gain = variance / (variance + obs_var);
        mean = params.phi * (mean + gain * (observations[m] - mean));
        variance = params.phi * params.phi * (1.0 - gain) * variance +
                   params.sigma_u * params.sigma_u;
        track.means[m + 1] = mean;
        track.variances[m + 1] = variance;
    }
    return track;
}

}  // namespace pfvar
