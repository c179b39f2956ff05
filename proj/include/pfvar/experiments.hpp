#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "pfvar/discrete.hpp"
#include "pfvar/errors.hpp"
#include "pfvar/filter.hpp"
#include "pfvar/models.hpp"
#include "pfvar/variance.hpp"

namespace pfvar {

/// Stream tags for seed derivation. Every experiment draws its observation
/// record, its replicate runs and its brute-force reference runs from
/// disjoint streams of the master seed, so the pieces never share
/// randomness and each is reproducible on its own.
enum SeedStream : std::uint64_t {
    kStreamObservations = 0,
    kStreamSweep = 1,
    kStreamReference = 2,
    kStreamLongRun = 3,
    kStreamCi = 4,
    kStreamRun = 5,
};

struct TestFunctionConfig {
    enum class Kind { identity, indicator };
    Kind kind = Kind::identity;
    double lo = 0.0;
    double hi = 0.0;

    TestFunction make() const {
        return kind == Kind::identity ? TestFunction::identity()
                                      : TestFunction::indicator(lo, hi);
    }
};

struct DiscreteModelConfig {
    DiscreteModel model;
};

using ModelConfig =
    std::variant<LinearGaussianParams, StochasticVolatilityParams, DiscreteModelConfig>;

struct ExperimentConfig {
    ModelConfig model;
    int particle_count = 0;                    // N
    std::int64_t time_horizon = 0;             // n
    std::vector<std::int64_t> lags;            // kFullTracing entries mean the CLE
    int replicates = 0;
    std::uint64_t master_seed = 0;
    TestFunctionConfig test_function;
    std::string output_path = ".";
    int thin = 1;
    Flow flow = Flow::predictor;
    int reference_replicates = 0;              // 0 = no brute-force reference
    double ci_level = 0.95;
    QuantileSpec ci_quantile;
    int threads = 0;                           // 0 = hardware concurrency
    std::optional<std::vector<double>> observations;  // fixed record; else simulated

    void validate() const {
        if (particle_count < 1) throw ConfigError("N must be at least 1");
        if (time_horizon < 0) throw ConfigError("n must be nonnegative");
        if (lags.empty()) throw ConfigError("lags must be nonempty");
        for (auto lag : lags) {
            if (lag < 0) throw ConfigError("lags must be nonnegative");
        }
        if (replicates < 1) throw ConfigError("replicates must be at least 1");
        if (thin < 1) throw ConfigError("thin must be at least 1");
        if (!(ci_level > 0.0 && ci_level < 1.0)) {
            throw ConfigError("ci_level must lie strictly inside (0, 1)");
        }
        if (reference_replicates < 0) {
            throw ConfigError("reference_replicates must be nonnegative");
        }
        std::visit([](const auto& params) {
            if constexpr (std::is_same_v<std::decay_t<decltype(params)>, DiscreteModelConfig>) {
                params.model.validate();
            } else {
                params.validate();
            }
        }, model);
    }
};

inline std::shared_ptr<const ModelSpec> build_model(const ModelConfig& config) {
    return std::visit([](const auto& params) -> std::shared_ptr<const ModelSpec> {
        if constexpr (std::is_same_v<std::decay_t<decltype(params)>, DiscreteModelConfig>) {
            return make_discrete(params.model);
        } else if constexpr (std::is_same_v<std::decay_t<decltype(params)>,
                                            LinearGaussianParams>) {
            return make_linear_gaussian(params);
        } else {
            return make_stochastic_volatility(params);
        }
    }, config);
}

/// Observation record used by an experiment: the fixed record from the
/// config when present (checked for length), otherwise simulated from the
/// model on the observation stream of the master seed.
inline std::vector<double> resolve_observations(const ExperimentConfig& config,
                                                std::int64_t length) {
    if (length == 0) return {};
    if (config.observations) {
        if (static_cast<std::int64_t>(config.observations->size()) < length) {
            throw ConfigError("observation record has " +
                              std::to_string(config.observations->size()) +
                              " entries, need " + std::to_string(length));
        }
        return {config.observations->begin(), config.observations->begin() + length};
    }
    const std::uint64_t seed = derive_seed(config.master_seed, kStreamObservations, 0);
    return std::visit([&](const auto& params) -> std::vector<double> {
        if constexpr (std::is_same_v<std::decay_t<decltype(params)>, DiscreteModelConfig>) {
            const auto symbols = simulate_discrete(params.model, length, seed);
            return {symbols.begin(), symbols.end()};
        } else {
            return simulate(params, length, seed).observations;
        }
    }, config.model);
}

/// Runs body(0..count-1) on up to `threads` workers. Results must be written
/// to per-index slots; the caller then reduces in index order, so the output
/// is independent of scheduling. The first exception is rethrown.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace detail {

/// Steps a fresh filter through the record; for the filter flow the final
/// observation is weighed in but not consumed by a step, so the weighted
/// cloud at the terminal time is available to the caller.
inline FilterState run_filter(const std::shared_ptr<const ModelSpec>& model,
                              const ExperimentConfig& config,
                              const std::vector<double>& observations,
                              std::int64_t window_lag, std::uint64_t seed) {
    FilterState state = init_filter(model, config.particle_count, window_lag, seed);
    for (std::int64_t t = 0; t < config.time_horizon; ++t) {
        state.step(observations[static_cast<std::size_t>(t)]);
    }
    if (config.flow == Flow::filter) {
        state.weigh(observations[static_cast<std::size_t>(config.time_horizon)]);
    }
    return state;
}

inline std::int64_t observation_length(const ExperimentConfig& config) {
    return config.flow == Flow::filter ? config.time_horizon + 1 : config.time_horizon;
}

/// Largest finite lag, or 0 when every requested lag is the full tracing.
inline std::int64_t window_lag_for(const std::vector<std::int64_t>& lags) {
    std::int64_t widest = 0;
    for (auto lag : lags) {
        if (lag != kFullTracing) widest = std::max(widest, lag);
    }
    return widest;
}

inline double sample_mean(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

inline double sample_variance(const std::vector<double>& values) {
    const double mean = sample_mean(values);
    double sum = 0.0;
    for (double v : values) sum += (v - mean) * (v - mean);
    return sum / static_cast<double>(values.size() - 1);
}

}  // namespace detail

/// Brute-force variance reference: `replicates` independent filters on the
/// same observation record, N times the sample variance of their terminal
/// estimates. This is the simulation-heavy ground truth the single-run
/// estimators are judged against.
inline double replicate_variance_reference(const ExperimentConfig& config) {
    config.validate();
    if (config.replicates < 2) {
        throw ConfigError("replicate_variance_reference needs at least 2 replicates");
    }
    const auto model = build_model(config.model);
    const auto observations =
        resolve_observations(config, detail::observation_length(config));
    const TestFunction h = config.test_function.make();
    std::vector<double> terminal(static_cast<std::size_t>(config.replicates));
    parallel_for(config.replicates, config.threads, [&](int r) {
        FilterState state = detail::run_filter(
            model, config, observations, 0,
            derive_seed(config.master_seed, kStreamReference, static_cast<std::uint64_t>(r)));
        terminal[static_cast<std::size_t>(r)] = config.flow == Flow::filter
                                                    ? state.filter_estimate(h)
                                                    : state.predictor_estimate(h);
    });
    return config.particle_count * detail::sample_variance(terminal);
}

struct SweepResult {
    std::int64_t lag = 0;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> estimates;  // one per replicate, in replicate order
    double reference = std::numeric_limits<double>::quiet_NaN();
};

/// One filter pass per replicate, evaluating the variance estimate at the
/// terminal time for every requested lag simultaneously: the run traces a
/// window wide enough for the largest finite lag, smaller lags read their
/// root row from inside that window, and full-tracing entries use the eve
/// indices. All lags of a replicate therefore share one genealogy, i.e. they
/// are estimates on the same realisation of the particle cloud.
inline std::vector<SweepResult> lag_sweep(const ExperimentConfig& config) {
    config.validate();
    const auto model = build_model(config.model);
    const auto observations =
        resolve_observations(config, detail::observation_length(config));
    const TestFunction h = config.test_function.make();
    const std::int64_t window_lag = detail::window_lag_for(config.lags);

    std::vector<std::vector<double>> estimates(
        config.lags.size(), std::vector<double>(static_cast<std::size_t>(config.replicates)));
    parallel_for(config.replicates, config.threads, [&](int r) {
        FilterState state = detail::run_filter(
            model, config, observations, window_lag,
            derive_seed(config.master_seed, kStreamSweep, static_cast<std::uint64_t>(r)));
        for (std::size_t k = 0; k < config.lags.size(); ++k) {
            const std::int64_t lag = config.lags[k];
            double value;
            if (config.flow == Flow::filter) {
                value = lag == kFullTracing ? cle_filter_variance(state, h).value
                                            : fixed_lag_filter_variance(state, h, lag).value;
            } else {
                value = lag == kFullTracing ? cle_predictor_variance(state, h).value
                                            : fixed_lag_predictor_variance(state, h, lag).value;
            }
            estimates[k][static_cast<std::size_t>(r)] = value;
        }
    });

    double reference = std::numeric_limits<double>::quiet_NaN();
    if (config.reference_replicates > 0) {
        ExperimentConfig reference_config = config;
        reference_config.replicates = config.reference_replicates;
        reference_config.reference_replicates = 0;
        reference = replicate_variance_reference(reference_config);
    }

    std::vector<SweepResult> results;
    results.reserve(config.lags.size());
    for (std::size_t k = 0; k < config.lags.size(); ++k) {
        SweepResult row;
        row.lag = config.lags[k];
        row.estimates = std::move(estimates[k]);
        row.mean = detail::sample_mean(row.estimates);
        row.stddev = row.estimates.size() > 1 ? std::sqrt(detail::sample_variance(row.estimates))
                                              : 0.0;
        row.reference = reference;
        results.push_back(std::move(row));
    }
    return results;
}

struct LongRunRow {
    std::int64_t time_n = 0;
    double fixed_lag = 0.0;
    double cle = 0.0;
    int eve_count = 0;
    int enoch_count = 0;
};

/// Single filter pass emitting one row per `thin` steps: fixed-lag estimate,
/// CLE, and the unique ancestor counts at the window root and at time zero.
inline std::vector<LongRunRow> long_run(const ExperimentConfig& config) {
    config.validate();
    if (config.lags.size() != 1) throw ConfigError("long_run expects exactly one lag");
    const std::int64_t lag = config.lags[0];
    const auto model = build_model(config.model);
    const std::int64_t length = detail::observation_length(config);
    const auto observations = resolve_observations(config, length);
    const TestFunction h = config.test_function.make();
    const std::int64_t window_lag = lag == kFullTracing ? kFullTracing : lag;

    FilterState state = init_filter(model, config.particle_count, window_lag,
                                    derive_seed(config.master_seed, kStreamLongRun, 0));
    std::vector<LongRunRow> rows;
    rows.reserve(static_cast<std::size_t>(config.time_horizon / config.thin + 2));

    auto emit = [&](FilterState& s) {
        LongRunRow row;
        row.time_n = s.n();
        if (config.flow == Flow::filter) {
            row.fixed_lag = fixed_lag_filter_variance(s, h, lag).value;
            row.cle = cle_filter_variance(s, h).value;
        } else {
            row.fixed_lag = fixed_lag_predictor_variance(s, h, lag).value;
            row.cle = cle_predictor_variance(s, h).value;
        }
        row.eve_count = s.unique_eve_count();
        row.enoch_count = s.unique_ancestor_count(root_time(s.n(), lag));
        rows.push_back(row);
    };

    for (std::int64_t t = 0; t <= config.time_horizon; ++t) {
        if (config.flow == Flow::filter) {
            state.weigh(observations[static_cast<std::size_t>(t)]);
        }
        if (t % config.thin == 0) emit(state);
        if (t < config.time_horizon) {
            if (config.flow == Flow::filter) {
                state.advance();
            } else {
                state.step(observations[static_cast<std::size_t>(t)]);
            }
        }
    }
    return rows;
}

struct CiFailureRow {
    std::int64_t time_n = 0;
    double failure_rate = 0.0;
};

struct CiFailureResult {
    std::vector<CiFailureRow> rows;        // thinned
    double average_failure_rate = 0.0;     // over times 1..n
};

/// Confidence-interval calibration against Kalman prediction: over
/// `replicates` runs on one fixed record, the per-time fraction of runs
/// whose interval around the particle predictor mean misses the exact
/// predictor mean. Only tractable for the linear Gaussian model.
inline CiFailureResult ci_failure_rates(const ExperimentConfig& config) {
    config.validate();
    const auto* params = std::get_if<LinearGaussianParams>(&config.model);
    if (!params) {
        throw ModelNotTractable("ci_failure_rates needs the linear Gaussian model "
                                "(exact predictor means are required)");
    }
    if (config.lags.size() != 1) throw ConfigError("ci_failure_rates expects exactly one lag");
    if (config.test_function.kind != TestFunctionConfig::Kind::identity) {
        throw ConfigError("ci_failure_rates compares against the Kalman predictor mean; "
                          "the test function must be the identity");
    }
    const std::int64_t lag = config.lags[0];
    const auto model = build_model(config.model);
    const auto observations = resolve_observations(config, config.time_horizon);
    const KalmanTrack truth = kalman_predict(*params, observations);
    const TestFunction h = TestFunction::identity();

    const auto times = static_cast<std::size_t>(config.time_horizon) + 1;
    std::vector<std::vector<char>> misses(
        static_cast<std::size_t>(config.replicates), std::vector<char>(times, 0));
    parallel_for(config.replicates, config.threads, [&](int r) {
        FilterState state =
            init_filter(model, config.particle_count, lag == kFullTracing ? kFullTracing : lag,
                        derive_seed(config.master_seed, kStreamCi, static_cast<std::uint64_t>(r)));
        auto& miss = misses[static_cast<std::size_t>(r)];
        for (std::int64_t t = 0; t <= config.time_horizon; ++t) {
            const double mean = state.predictor_estimate(h);
            const VarianceEstimate estimate =
                lag == kFullTracing ? cle_predictor_variance(state, h)
                                    : fixed_lag_predictor_variance(state, h, lag);
            const ConfidenceInterval interval = confidence_interval(
                mean, estimate, config.particle_count, config.ci_level, config.ci_quantile);
            const double target = truth.means[static_cast<std::size_t>(t)];
            miss[static_cast<std::size_t>(t)] = (target < interval.lo || target > interval.hi);
            if (t < config.time_horizon) {
                state.step(observations[static_cast<std::size_t>(t)]);
            }
        }
    });

    CiFailureResult result;
    double total = 0.0;
    for (std::size_t t = 0; t < times; ++t) {
        double failures = 0.0;
        for (int r = 0; r < config.replicates; ++r) {
            failures += misses[static_cast<std::size_t>(r)][t];
        }
        const double rate = failures / config.replicates;
        if (t >= 1) total += rate;
        if (static_cast<std::int64_t>(t) % config.thin == 0) {
            result.rows.push_back({static_cast<std::int64_t>(t), rate});
        }
    }
    result.average_failure_rate =
        config.time_horizon > 0 ? total / static_cast<double>(config.time_horizon) : 0.0;
    return result;
}

struct RunResult {
    std::int64_t time_n = 0;
    double predictor_mean = 0.0;
    std::optional<double> filter_mean;
    std::vector<VarianceEstimate> estimates;  // one per configured lag
    int eve_count = 0;
    int enoch_count = 0;  // at the widest finite-lag root
};

/// One filter pass reporting the terminal estimates for every configured lag.
inline RunResult run_single(const ExperimentConfig& config) {
    config.validate();
    const auto model = build_model(config.model);
    const auto observations =
        resolve_observations(config, detail::observation_length(config));
    const TestFunction h = config.test_function.make();
    const std::int64_t window_lag = detail::window_lag_for(config.lags);
    FilterState state =
        detail::run_filter(model, config, observations, window_lag,
                           derive_seed(config.master_seed, kStreamRun, 0));
    RunResult result;
    result.time_n = state.n();
    result.predictor_mean = state.predictor_estimate(h);
    if (config.flow == Flow::filter) result.filter_mean = state.filter_estimate(h);
    for (auto lag : config.lags) {
        if (config.flow == Flow::filter) {
            result.estimates.push_back(lag == kFullTracing
                                           ? cle_filter_variance(state, h)
                                           : fixed_lag_filter_variance(state, h, lag));
        } else {
            result.estimates.push_back(lag == kFullTracing
                                           ? cle_predictor_variance(state, h)
                                           : fixed_lag_predictor_variance(state, h, lag));
        }
    }
    result.eve_count = state.unique_eve_count();
    result.enoch_count = state.unique_ancestor_count(root_time(state.n(), window_lag));
    return result;
}

}  // namespace pfvar
