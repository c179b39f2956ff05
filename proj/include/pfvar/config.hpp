#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfvar/errors.hpp"
#include "pfvar/experiments.hpp"
#include "pfvar/io.hpp"

namespace pfvar {

namespace detail {

inline std::int64_t lag_from_json(const nlohmann::json& value) {
    if (value.is_string()) {
        if (value.get<std::string>() == "inf") return kFullTracing;
        throw ConfigError("lags: the only string entry allowed is \"inf\"");
    }
    if (!value.is_number_integer() && !value.is_number_unsigned()) {
        throw ConfigError("lags: entries must be integers or \"inf\"");
    }
    return value.get<std::int64_t>();
}

inline nlohmann::json lag_to_json(std::int64_t lag) {
    if (lag == kFullTracing) return "inf";
    return lag;
}

inline void reject_unknown_keys(const nlohmann::json& object,
                                std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (const auto& [key, value] : object.items()) {
        (void)value;
        bool known = false;
        for (const char* name : allowed) {
            if (key == name) { known = true; break; }
        }
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
T require(const nlohmann::json& object, const char* key, const std::string& where) {
    if (!object.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    try {
        return object.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": key '" + std::string(key) + "' has the wrong type");
    }
}

template <typename T>
T optional_or(const nlohmann::json& object, const char* key, T fallback,
              const std::string& where) {
    if (!object.contains(key)) return fallback;
    try {
        return object.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": key '" + std::string(key) + "' has the wrong type");
    }
}

inline ModelConfig model_from_json(const nlohmann::json& object,
                                   const std::string& base_dir) {
    if (!object.is_object()) throw ConfigError("model: must be an object");
    const auto kind = require<std::string>(object, "kind", "model");
    if (kind == "lg") {
        reject_unknown_keys(object, {"kind", "phi", "sigma_u", "sigma_v"}, "model");
        LinearGaussianParams params;
        params.phi = require<double>(object, "phi", "model");
        params.sigma_u = require<double>(object, "sigma_u", "model");
        params.sigma_v = require<double>(object, "sigma_v", "model");
        params.validate();
        return params;
    }
    if (kind == "sv") {
        reject_unknown_keys(object, {"kind", "beta", "phi", "sigma"}, "model");
        StochasticVolatilityParams params;
        params.beta = require<double>(object, "beta", "model");
        params.phi = require<double>(object, "phi", "model");
        params.sigma = require<double>(object, "sigma", "model");
        params.validate();
        return params;
    }
    if (kind == "discrete") {
        reject_unknown_keys(object, {"kind", "path", "chi", "M", "potentials"}, "model");
        DiscreteModelConfig config;
        if (object.contains("path")) {
            if (object.contains("chi") || object.contains("M") || object.contains("potentials")) {
                throw ConfigError("model: give either 'path' or inline fields, not both");
            }
            std::string path = object.at("path").get<std::string>();
            if (!path.empty() && path.front() != '/' && !base_dir.empty()) {
                path = base_dir + "/" + path;
            }
            std::ifstream in(path);
            if (!in) throw ConfigError("model: cannot read '" + path + "'");
            nlohmann::json doc;
            try {
                in >> doc;
            } catch (const nlohmann::json::exception& error) {
                throw ConfigError("model: '" + path + "': " + error.what());
            }
            config.model = DiscreteModel::from_json(doc);
        } else {
            nlohmann::json doc = object;
            doc.erase("kind");
            config.model = DiscreteModel::from_json(doc);
        }
        return config;
    }
    throw ConfigError("model: unknown kind '" + kind + "' (expected lg, sv or discrete)");
}

inline nlohmann::json model_to_json(const ModelConfig& model) {
    return std::visit([](const auto& params) -> nlohmann::json {
        using T = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<T, LinearGaussianParams>) {
            return {{"kind", "lg"}, {"phi", params.phi}, {"sigma_u", params.sigma_u},
                    {"sigma_v", params.sigma_v}};
        } else if constexpr (std::is_same_v<T, StochasticVolatilityParams>) {
            return {{"kind", "sv"}, {"beta", params.beta}, {"phi", params.phi},
                    {"sigma", params.sigma}};
        } else {
            nlohmann::json doc = params.model.to_json();
            doc["kind"] = "discrete";
            return doc;
        }
    }, model);
}

}  // namespace detail

/// Builds a validated experiment configuration from a JSON document.
/// Unknown keys anywhere are rejected with a field-level message.
/// `base_dir` resolves relative model paths.
inline ExperimentConfig config_from_json(const nlohmann::json& doc,
                                         const std::string& base_dir = "") {
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    detail::reject_unknown_keys(
        doc,
        {"model", "N", "n", "lags", "replicates", "seed", "test_function", "output_path",
         "thin", "flow", "reference_replicates", "ci_level", "ci_quantile", "threads",
         "observations", "observations_csv"},
        "config");

    ExperimentConfig config;
    config.model = detail::model_from_json(
        doc.contains("model") ? doc.at("model") : nlohmann::json(), base_dir);
    config.particle_count = detail::require<int>(doc, "N", "config");
    config.time_horizon = detail::require<std::int64_t>(doc, "n", "config");
    if (!doc.contains("lags") || !doc.at("lags").is_array()) {
        throw ConfigError("config: 'lags' must be an array");
    }
    for (const auto& entry : doc.at("lags")) {
        config.lags.push_back(detail::lag_from_json(entry));
    }
    config.replicates = detail::require<int>(doc, "replicates", "config");
    config.master_seed = detail::require<std::uint64_t>(doc, "seed", "config");

    if (doc.contains("test_function")) {
        const auto& tf = doc.at("test_function");
        detail::reject_unknown_keys(tf, {"kind", "lo", "hi"}, "test_function");
        const auto kind = detail::require<std::string>(tf, "kind", "test_function");
        if (kind == "identity") {
            config.test_function.kind = TestFunctionConfig::Kind::identity;
        } else if (kind == "indicator") {
            config.test_function.kind = TestFunctionConfig::Kind::indicator;
            config.test_function.lo = detail::require<double>(tf, "lo", "test_function");
            config.test_function.hi = detail::require<double>(tf, "hi", "test_function");
        } else {
            throw ConfigError("test_function: unknown kind '" + kind + "'");
        }
    }

    config.output_path = detail::optional_or<std::string>(doc, "output_path", ".", "config");
    config.thin = detail::optional_or<int>(doc, "thin", 1, "config");
    const auto flow = detail::optional_or<std::string>(doc, "flow", "predictor", "config");
    if (flow == "predictor") {
        config.flow = Flow::predictor;
    } else if (flow == "filter") {
        config.flow = Flow::filter;
    } else {
        throw ConfigError("config: flow must be 'predictor' or 'filter'");
    }
    config.reference_replicates =
        detail::optional_or<int>(doc, "reference_replicates", 0, "config");
    config.ci_level = detail::optional_or<double>(doc, "ci_level", 0.95, "config");
    if (doc.contains("ci_quantile")) {
        const auto& cq = doc.at("ci_quantile");
        detail::reject_unknown_keys(cq, {"kind", "dof"}, "ci_quantile");
        const auto kind = detail::require<std::string>(cq, "kind", "ci_quantile");
        if (kind == "gaussian") {
            config.ci_quantile.kind = QuantileSpec::Kind::gaussian;
        } else if (kind == "student_t") {
            config.ci_quantile.kind = QuantileSpec::Kind::student_t;
            config.ci_quantile.dof = detail::require<int>(cq, "dof", "ci_quantile");
            if (config.ci_quantile.dof < 1) {
                throw ConfigError("ci_quantile: dof must be at least 1");
            }
        } else {
            throw ConfigError("ci_quantile: unknown kind '" + kind + "'");
        }
    }
    config.threads = detail::optional_or<int>(doc, "threads", 0, "config");
    if (doc.contains("observations") && doc.contains("observations_csv")) {
        throw ConfigError("config: give either 'observations' or 'observations_csv', not both");
    }
    if (doc.contains("observations")) {
        if (!doc.at("observations").is_array()) {
            throw ConfigError("config: 'observations' must be an array of numbers");
        }
        try {
            config.observations = doc.at("observations").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: 'observations' must be an array of numbers");
        }
    }
    if (doc.contains("observations_csv")) {
        std::string csv_path = detail::require<std::string>(doc, "observations_csv", "config");
        if (!csv_path.empty() && csv_path.front() != '/' && !base_dir.empty()) {
            csv_path = base_dir + "/" + csv_path;
        }
        // Read eagerly and echo inline, so the config echo alone reproduces
        // the run even if the file later changes.
        config.observations = read_observations_csv(csv_path);
    }

    config.validate();
    return config;
}

/// Full echo of a configuration, defaults materialised and the seed resolved.
/// Discrete models are embedded inline even when they were loaded from a
/// separate document, so the echo alone regenerates the run.
inline nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json doc;
    doc["model"] = detail::model_to_json(config.model);
    doc["N"] = config.particle_count;
    doc["n"] = config.time_horizon;
    nlohmann::json lags = nlohmann::json::array();
    for (auto lag : config.lags) lags.push_back(detail::lag_to_json(lag));
    doc["lags"] = lags;
    doc["replicates"] = config.replicates;
    doc["seed"] = config.master_seed;
    if (config.test_function.kind == TestFunctionConfig::Kind::identity) {
        doc["test_function"] = {{"kind", "identity"}};
    } else {
        doc["test_function"] = {{"kind", "indicator"}, {"lo", config.test_function.lo},
                                {"hi", config.test_function.hi}};
    }
    doc["output_path"] = config.output_path;
    doc["thin"] = config.thin;
    doc["flow"] = config.flow == Flow::predictor ? "predictor" : "filter";
    doc["reference_replicates"] = config.reference_replicates;
    doc["ci_level"] = config.ci_level;
    if (config.ci_quantile.kind == QuantileSpec::Kind::gaussian) {
        doc["ci_quantile"] = {{"kind", "gaussian"}};
    } else {
        doc["ci_quantile"] = {{"kind", "student_t"}, {"dof", config.ci_quantile.dof}};
    }
    doc["threads"] = config.threads;
    if (config.observations) doc["observations"] = *config.observations;
    return doc;
}

namespace detail {

inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // unquoted strings like flow=filter

    nlohmann::json* node = &doc;
    std::istringstream keys(path);
    std::string key;
    std::vector<std::string> parts;
    while (std::getline(keys, key, '.')) parts.push_back(key);
    if (parts.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    try {
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            node = &(*node)[parts[i]];
        }
        (*node)[parts.back()] = value;
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("override '" + assignment + "' does not address an object");
    }
}

}  // namespace detail

/// Reads a config file, then layers the PFVAR_SEED environment variable (if
/// set) and the key=value overrides, in that order, so explicit overrides win
/// over the environment which wins over the file.
inline ExperimentConfig parse_config(const std::string& path,
                                     const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& error) {
        throw ConfigError("config file '" + path + "': " + error.what());
    }
    if (const char* env_seed = std::getenv("PFVAR_SEED")) {
        try {
            std::size_t consumed = 0;
            const std::uint64_t seed = std::stoull(env_seed, &consumed);
            if (consumed != std::string(env_seed).size()) throw std::invalid_argument("");
            doc["seed"] = seed;
        } catch (const std::exception&) {
            throw ConfigError("PFVAR_SEED must be an unsigned 64-bit integer");
        }
    }
    for (const auto& assignment : overrides) detail::apply_override(doc, assignment);

    std::string base_dir = ".";
    if (const auto slash = path.find_last_of('/'); slash != std::string::npos) {
        base_dir = path.substr(0, slash);
    }
    return config_from_json(doc, base_dir);
}

}  // namespace pfvar
