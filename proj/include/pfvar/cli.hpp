#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfvar/config.hpp"
#include "pfvar/errors.hpp"
#include "pfvar/exact.hpp"
#include "pfvar/experiments.hpp"
#include "pfvar/io.hpp"

namespace pfvar {

/// Exit codes: 0 success, 2 configuration problems, 3 numeric degeneracy or
/// an intractable request, 4 output I/O failures, 1 anything else.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitNumeric = 3,
    kExitIo = 4,
};

struct CliCommand {
    std::string subcommand;
    std::string config_path;
    std::vector<std::string> overrides;  // key=value, applied in order
    std::string out_dir;                 // overrides the config's output_path
    int threads = -1;                    // overrides the config's threads when >= 0
};

namespace detail {

inline std::string output_dir(const CliCommand& command, const ExperimentConfig& config) {
    const std::string dir = !command.out_dir.empty() ? command.out_dir : config.output_path;
    std::error_code error;
    std::filesystem::create_directories(dir, error);
    if (error) throw IoError("cannot create output directory '" + dir + "': " + error.message());
    return dir;
}

inline nlohmann::json summary_base(const std::string& command, const ExperimentConfig& config) {
    nlohmann::json doc;
    doc["command"] = command;
    doc["config"] = config_to_json(config);
    return doc;
}

/// Observation symbols for the exact oracle; every entry must be integral.
inline std::vector<int> integral_observations(const std::vector<double>& values) {
    std::vector<int> symbols;
    symbols.reserve(values.size());
    for (double value : values) {
        const double rounded = std::nearbyint(value);
        if (std::fabs(value - rounded) > 1e-9) {
            throw ConfigError("discrete observations must be integer symbols, got " +
                              format_double(value));
        }
        symbols.push_back(static_cast<int>(rounded));
    }
    return symbols;
}

inline std::vector<double> state_test_vector(const ExperimentConfig& config, int state_count) {
    const TestFunction h = config.test_function.make();
    std::vector<double> values(static_cast<std::size_t>(state_count));
    for (int x = 0; x < state_count; ++x) values[static_cast<std::size_t>(x)] = h(double(x));
    return values;
}

inline void command_simulate(const CliCommand& command, const ExperimentConfig& config) {
    const std::string dir = output_dir(command, config);
    const std::uint64_t seed = derive_seed(config.master_seed, kStreamObservations, 0);
    std::vector<double> observations;
    std::vector<double> states;
    if (const auto* discrete = std::get_if<DiscreteModelConfig>(&config.model)) {
        std::vector<int> state_path;
        const auto symbols =
            simulate_discrete(discrete->model, config.time_horizon, seed, &state_path);
        observations.assign(symbols.begin(), symbols.end());
        states.assign(state_path.begin(), state_path.end());
    } else if (const auto* lg = std::get_if<LinearGaussianParams>(&config.model)) {
        auto trajectory = simulate(*lg, config.time_horizon, seed);
        observations = std::move(trajectory.observations);
        states = std::move(trajectory.states);
    } else {
        auto trajectory = simulate(std::get<StochasticVolatilityParams>(config.model),
                                   config.time_horizon, seed);
        observations = std::move(trajectory.observations);
        states = std::move(trajectory.states);
    }
    write_observations_csv(dir + "/observations.csv", observations);
    {
        CsvWriter csv(dir + "/states.csv");
        csv.row({"x"});
        for (double x : states) csv.row({format_double(x)});
    }
    nlohmann::json summary = summary_base("simulate", config);
    summary["outputs"] = {{"observations", "observations.csv"}, {"states", "states.csv"}};
    summary["results"] = {{"n", config.time_horizon}, {"simulation_seed", seed}};
    write_json_file(dir + "/simulate_summary.json", summary);
}

inline void command_run(const CliCommand& command, const ExperimentConfig& config) {
    const std::string dir = output_dir(command, config);
    const RunResult result = run_single(config);
    CsvWriter csv(dir + "/run.csv");
    csv.row({"lag", "flow", "estimator", "value"});
    for (const auto& estimate : result.estimates) {
        csv.row({format_lag(estimate.lag), to_string(estimate.flow),
                 to_string(estimate.estimator), format_double(estimate.value)});
    }
    nlohmann::json summary = summary_base("run", config);
    summary["outputs"] = {{"csv", "run.csv"}};
    nlohmann::json estimates = nlohmann::json::array();
    for (const auto& estimate : result.estimates) {
        estimates.push_back({{"lag", lag_to_json(estimate.lag)},
                             {"flow", to_string(estimate.flow)},
                             {"estimator", to_string(estimate.estimator)},
                             {"value", estimate.value}});
    }
    summary["results"] = {{"time_n", result.time_n},
                          {"predictor_mean", result.predictor_mean},
                          {"eve_count", result.eve_count},
                          {"enoch_count", result.enoch_count},
                          {"estimates", estimates}};
    if (result.filter_mean) summary["results"]["filter_mean"] = *result.filter_mean;
    write_json_file(dir + "/run_summary.json", summary);
}

inline void command_sweep(const CliCommand& command, const ExperimentConfig& config) {
    const std::string dir = output_dir(command, config);
    const auto results = lag_sweep(config);
    CsvWriter csv(dir + "/sweep.csv");
    csv.row({"lag", "replicate", "estimate"});
    for (const auto& row : results) {
        for (std::size_t r = 0; r < row.estimates.size(); ++r) {
            csv.row({format_lag(row.lag), std::to_string(r), format_double(row.estimates[r])});
        }
    }
    nlohmann::json summary = summary_base("sweep-lag", config);
    summary["outputs"] = {{"csv", "sweep.csv"}};
    nlohmann::json per_lag = nlohmann::json::array();
    for (const auto& row : results) {
        per_lag.push_back({{"lag", lag_to_json(row.lag)},
                           {"mean", row.mean},
                           {"stddev", row.stddev}});
    }
    summary["results"] = {{"per_lag", per_lag}};
    if (!results.empty() && !std::isnan(results.front().reference)) {
        summary["results"]["reference"] = results.front().reference;
    }
    write_json_file(dir + "/sweep_summary.json", summary);
}

inline void command_long_run(const CliCommand& command, const ExperimentConfig& config) {
    const std::string dir = output_dir(command, config);
    const auto rows = long_run(config);
    CsvWriter csv(dir + "/long_run.csv");
    csv.row({"n", "fixed_lag", "cle", "eve_count", "enoch_count"});
    for (const auto& row : rows) {
        csv.row({std::to_string(row.time_n), format_double(row.fixed_lag),
                 format_double(row.cle), std::to_string(row.eve_count),
                 std::to_string(row.enoch_count)});
    }
    nlohmann::json summary = summary_base("long-run", config);
    summary["outputs"] = {{"csv", "long_run.csv"}};
    std::int64_t collapse_time = -1;
    for (const auto& row : rows) {
        if (row.eve_count == 1) { collapse_time = row.time_n; break; }
    }
    summary["results"] = {{"rows", rows.size()},
                          {"final_eve_count", rows.empty() ? 0 : rows.back().eve_count},
                          {"final_enoch_count", rows.empty() ? 0 : rows.back().enoch_count}};
    if (collapse_time >= 0) summary["results"]["first_reported_eve_collapse"] = collapse_time;
    write_json_file(dir + "/long_run_summary.json", summary);
}

inline void command_ci_failure(const CliCommand& command, const ExperimentConfig& config) {
    const std::string dir = output_dir(command, config);
    const auto result = ci_failure_rates(config);
    CsvWriter csv(dir + "/ci_failure.csv");
    csv.row({"n", "failure_rate"});
    for (const auto& row : result.rows) {
        csv.row({std::to_string(row.time_n), format_double(row.failure_rate)});
    }
    nlohmann::json summary = summary_base("ci-failure", config);
    summary["outputs"] = {{"csv", "ci_failure.csv"}};
    summary["results"] = {{"average_failure_rate", result.average_failure_rate},
                          {"level", config.ci_level}};
    write_json_file(dir + "/ci_failure_summary.json", summary);
}

inline void command_oracle_exact(const CliCommand& command, const ExperimentConfig& config) {
    const auto* discrete = std::get_if<DiscreteModelConfig>(&config.model);
    if (!discrete) {
        throw ModelNotTractable("oracle-exact needs a discrete model");
    }
    const std::string dir = output_dir(command, config);
    const std::int64_t n = config.time_horizon;
    const std::int64_t length = config.flow == Flow::filter ? n + 1 : n;
    const auto symbols = integral_observations(resolve_observations(config, length));
    const auto h = state_test_vector(config, discrete->model.state_count());
    const std::span<const int> z(symbols);

    nlohmann::json summary = summary_base("oracle-exact", config);
    nlohmann::json results;
    results["observations"] = symbols;
    results["h"] = h;

    if (config.flow == Flow::filter) {
        results["filter"] = exact_filter(discrete->model, z);
        nlohmann::json table = nlohmann::json::array();
        for (std::int64_t ell = 0; ell <= n; ++ell) {
            const auto variance = exact_filter_variance(discrete->model, z, h, ell);
            table.push_back({{"ell", ell}, {"value", variance.value}, {"terms", variance.terms}});
        }
        results["filter_variance"] = table;
    } else {
        results["predictor"] = exact_predictor(discrete->model, z);
        nlohmann::json table = nlohmann::json::array();
        for (std::int64_t ell = 0; ell <= n; ++ell) {
            const auto variance = exact_asymptotic_variance(discrete->model, z, h, ell);
            table.push_back({{"ell", ell}, {"value", variance.value}, {"terms", variance.terms}});
        }
        results["variance"] = table;
        nlohmann::json bias_table = nlohmann::json::array();
        for (std::int64_t lag = 0; lag <= n; ++lag) {
            bias_table.push_back({{"lambda", lag},
                                  {"bias", exact_bias(discrete->model, z, h, lag)}});
        }
        results["bias"] = bias_table;
    }
    summary["results"] = results;
    write_json_file(dir + "/oracle_exact.json", summary);
}

inline void command_oracle_replicate(const CliCommand& command, const ExperimentConfig& config) {
    if (config.replicates < 2) {
        throw ConfigError("oracle-replicate needs at least 2 replicates");
    }
    const std::string dir = output_dir(command, config);

    // The reference itself; also keep the raw terminal estimates for the CSV.
    const auto model = build_model(config.model);
    const auto observations = resolve_observations(config, observation_length(config));
    const TestFunction h = config.test_function.make();
    std::vector<double> terminal(static_cast<std::size_t>(config.replicates));
    parallel_for(config.replicates, config.threads, [&](int r) {
        FilterState state = run_filter(
            model, config, observations, 0,
            derive_seed(config.master_seed, kStreamReference, static_cast<std::uint64_t>(r)));
        terminal[static_cast<std::size_t>(r)] = config.flow == Flow::filter
                                                    ? state.filter_estimate(h)
                                                    : state.predictor_estimate(h);
    });
    const double reference = config.particle_count * sample_variance(terminal);

    CsvWriter csv(dir + "/reference.csv");
    csv.row({"replicate", "estimate"});
    for (std::size_t r = 0; r < terminal.size(); ++r) {
        csv.row({std::to_string(r), format_double(terminal[r])});
    }
    nlohmann::json summary = summary_base("oracle-replicate", config);
    summary["outputs"] = {{"csv", "reference.csv"}};
    summary["results"] = {{"reference", reference},
                          {"replicates", config.replicates},
                          {"terminal_mean", sample_mean(terminal)}};
    write_json_file(dir + "/reference_summary.json", summary);
}

}  // namespace detail

/// Parses the config, applies overrides, dispatches the subcommand and maps
/// every failure onto a diagnostic plus a stable exit code. Never throws.
inline int run_command(const CliCommand& command) {
    try {
        ExperimentConfig config = parse_config(command.config_path, command.overrides);
        if (command.threads >= 0) config.threads = command.threads;

        if (command.subcommand == "simulate") {
            detail::command_simulate(command, config);
        } else if (command.subcommand == "run") {
            detail::command_run(command, config);
        } else if (command.subcommand == "sweep-lag") {
            detail::command_sweep(command, config);
        } else if (command.subcommand == "long-run") {
            detail::command_long_run(command, config);
        } else if (command.subcommand == "ci-failure") {
            detail::command_ci_failure(command, config);
        } else if (command.subcommand == "oracle-exact") {
            detail::command_oracle_exact(command, config);
        } else if (command.subcommand == "oracle-replicate") {
            detail::command_oracle_replicate(command, config);
        } else {
            throw ConfigError("unknown subcommand '" + command.subcommand + "'");
        }
        return kExitOk;
    } catch (const ConfigError& error) {
        std::cerr << "config error: " << error.what() << '\n';
        return kExitConfig;
    } catch (const InvalidConfig& error) {
        std::cerr << "config error: " << error.what() << '\n';
        return kExitConfig;
    } catch (const InvalidParams& error) {
        std::cerr << "config error: " << error.what() << '\n';
        return kExitConfig;
    } catch (const InvalidLevel& error) {
        std::cerr << "config error: " << error.what() << '\n';
        return kExitConfig;
    } catch (const DegenerateWeights& error) {
        std::cerr << "numeric error: " << error.what() << '\n';
        return kExitNumeric;
    } catch (const NonFinitePotential& error) {
        std::cerr << "numeric error: " << error.what() << '\n';
        return kExitNumeric;
    } catch (const NumericalUnderflow& error) {
        std::cerr << "numeric error: " << error.what() << '\n';
        return kExitNumeric;
    } catch (const ModelNotTractable& error) {
        std::cerr << "numeric error: " << error.what() << '\n';
        return kExitNumeric;
    } catch (const IndexOutOfRange& error) {
        std::cerr << "numeric error: " << error.what() << '\n';
        return kExitNumeric;
    } catch (const RowNotInWindow& error) {
        std::cerr << "numeric error: " << error.what() << '\n';
        return kExitNumeric;
    } catch (const IoError& error) {
        std::cerr << "io error: " << error.what() << '\n';
        return kExitIo;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace pfvar
