#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pfvar/errors.hpp"
#include "pfvar/model.hpp"
#include "pfvar/resampling.hpp"
#include "pfvar/rng.hpp"

namespace pfvar {

/// Finite-state model: initial probability vector, row-stochastic transition
/// matrix and one positive potential vector per observation symbol. Small and
/// dense on purpose; this is the ground-truth side of the toolkit, not the
/// scalable one.
struct DiscreteModel {
    std::vector<double> chi;
    std::vector<std::vector<double>> transition;
    std::map<int, std::vector<double>> potentials;

    int state_count() const { return static_cast<int>(chi.size()); }

    const std::vector<double>& potential(int symbol) const {
        auto it = potentials.find(symbol);
        if (it == potentials.end()) {
            throw IndexOutOfRange("no potential vector for observation symbol " +
                                  std::to_string(symbol));
        }
        return it->second;
    }

    void validate() const {
        const std::size_t size = chi.size();
        if (size < 2) throw InvalidParams("a discrete model needs at least 2 states");
        double sum = 0.0;
        for (double p : chi) {
            if (!(p >= 0.0)) throw InvalidParams("chi entries must be nonnegative");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-12) throw InvalidParams("chi must sum to 1");
        if (transition.size() != size) throw InvalidParams("transition matrix must be square");
        for (const auto& row : transition) {
            if (row.size() != size) throw InvalidParams("transition matrix must be square");
            double row_sum = 0.0;
            for (double p : row) {
                if (!(p >= 0.0)) throw InvalidParams("transition entries must be nonnegative");
                row_sum += p;
            }
            if (std::fabs(row_sum - 1.0) > 1e-12) {
                throw InvalidParams("every transition row must sum to 1");
            }
        }
        if (potentials.empty()) throw InvalidParams("at least one potential vector is required");
        for (const auto& [symbol, g] : potentials) {
            if (g.size() != size) {
                throw InvalidParams("potential vector for symbol " + std::to_string(symbol) +
                                    " has wrong length");
            }
            for (double value : g) {
                if (!(value > 0.0) || !std::isfinite(value)) {
                    throw InvalidParams("potential entries must be positive and finite");
                }
            }
        }
    }

    /// Document format: {"chi": [...], "M": [[...], ...],
    /// "potentials": {"<symbol>": [...], ...}}. Unknown keys are rejected.
    static DiscreteModel from_json(const nlohmann::json& doc) {
        if (!doc.is_object()) throw ConfigError("discrete model document must be an object");
        for (const auto& [key, value] : doc.items()) {
            (void)value;
            if (key != "chi" && key != "M" && key != "potentials") {
                throw ConfigError("discrete model: unknown key '" + key + "'");
            }
        }
        DiscreteModel model;
        try {
            model.chi = doc.at("chi").get<std::vector<double>>();
            model.transition = doc.at("M").get<std::vector<std::vector<double>>>();
            for (const auto& [key, value] : doc.at("potentials").items()) {
                std::size_t consumed = 0;
                const int symbol = std::stoi(key, &consumed);
                if (consumed != key.size()) {
                    throw ConfigError("discrete model: symbol '" + key + "' is not an integer");
                }
                model.potentials[symbol] = value.get<std::vector<double>>();
            }
        } catch (const nlohmann::json::exception& error) {
            throw ConfigError(std::string("discrete model: ") + error.what());
        } catch (const std::invalid_argument&) {
            throw ConfigError("discrete model: potential keys must be integer symbols");
        }
        model.validate();
        return model;
    }

    nlohmann::json to_json() const {
        nlohmann::json doc;
        doc["chi"] = chi;
        doc["M"] = transition;
        nlohmann::json table = nlohmann::json::object();
        for (const auto& [symbol, g] : potentials) table[std::to_string(symbol)] = g;
        doc["potentials"] = table;
        return doc;
    }
};

namespace detail {

inline std::vector<double> prefix_sums(const std::vector<double>& weights) {
    std::vector<double> cumulative(weights.size());
    double running = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        running += weights[i];
        cumulative[i] = running;
    }
    return cumulative;
}

}  // namespace detail

/// Adapter exposing a DiscreteModel through the sampling interface: states
/// are carried as their index values 0, 1, ..., S-1 and perturbations as the
/// observation symbol. Log potentials are precomputed per symbol.
inline std::shared_ptr<const ModelSpec> make_discrete(const DiscreteModel& discrete) {
    discrete.validate();
    auto chi_cdf = std::make_shared<const std::vector<double>>(detail::prefix_sums(discrete.chi));
    auto row_cdfs = std::make_shared<std::vector<std::vector<double>>>();
    for (const auto& row : discrete.transition) row_cdfs->push_back(detail::prefix_sums(row));
    auto log_potentials = std::make_shared<std::map<int, std::vector<double>>>();
    for (const auto& [symbol, g] : discrete.potentials) {
        auto& logs = (*log_potentials)[symbol];
        logs.reserve(g.size());
        for (double value : g) logs.push_back(std::log(value));
    }

    auto spec = std::make_shared<ModelSpec>();
    spec->state_dim = 1;
    spec->initial_sampler = [chi_cdf](Rng& rng) {
        return static_cast<double>(categorical_from_cdf(*chi_cdf, chi_cdf->back(), rng));
    };
    spec->transition_sampler = [row_cdfs](double x, Rng& rng) {
        const auto& cdf = (*row_cdfs)[static_cast<std::size_t>(std::llround(x))];
        return static_cast<double>(categorical_from_cdf(cdf, cdf.back(), rng));
    };
    spec->log_potential = [log_potentials](double z, double x) {
        const int symbol = static_cast<int>(std::llround(z));
        auto it = log_potentials->find(symbol);
        if (it == log_potentials->end()) {
            throw IndexOutOfRange("no potential vector for observation symbol " +
                                  std::to_string(symbol));
        }
        return it->second[static_cast<std::size_t>(std::llround(x))];
    };
    return spec;
}

/// Test function reading out a per-state value vector.
inline TestFunction vector_test_function(std::vector<double> values) {
    return TestFunction::custom([values = std::move(values)](double x) {
        return values[static_cast<std::size_t>(std::llround(x))];
    });
}

/// Samples a state path from (chi, M) and one observation symbol per state,
/// with P(symbol | state) proportional to the potential value at that state.
/// This treats the potential table as an (unnormalised) emission law over the
/// symbols it lists.
inline std::vector<int> simulate_discrete(const DiscreteModel& discrete, std::int64_t n,
                                          std::uint64_t seed,
                                          std::vector<int>* states_out = nullptr) {
    discrete.validate();
    const int size = discrete.state_count();
    std::vector<int> symbols;
    symbols.reserve(discrete.potentials.size());
    for (const auto& [symbol, g] : discrete.potentials) {
        (void)g;
        symbols.push_back(symbol);
    }
    // Per-state emission CDF across the listed symbols.
    std::vector<std::vector<double>> emission_cdfs(static_cast<std::size_t>(size));
    for (int x = 0; x < size; ++x) {
        std::vector<double> weights;
        weights.reserve(symbols.size());
        for (int symbol : symbols) {
            weights.push_back(discrete.potential(symbol)[static_cast<std::size_t>(x)]);
        }
        emission_cdfs[static_cast<std::size_t>(x)] = detail::prefix_sums(weights);
    }
    auto chi_cdf = detail::prefix_sums(discrete.chi);
    std::vector<std::vector<double>> row_cdfs;
    for (const auto& row : discrete.transition) row_cdfs.push_back(detail::prefix_sums(row));

    Rng rng(seed);
    std::vector<int> observations(static_cast<std::size_t>(n));
    if (states_out) states_out->resize(static_cast<std::size_t>(n));
    int state = categorical_from_cdf(chi_cdf, chi_cdf.back(), rng);
    for (std::int64_t t = 0; t < n; ++t) {
        if (states_out) (*states_out)[static_cast<std::size_t>(t)] = state;
        const auto& emission = emission_cdfs[static_cast<std::size_t>(state)];
        observations[static_cast<std::size_t>(t)] =
            symbols[static_cast<std::size_t>(categorical_from_cdf(emission, emission.back(), rng))];
        const auto& row = row_cdfs[static_cast<std::size_t>(state)];
        state = categorical_from_cdf(row, row.back(), rng);
    }
    return observations;
}

}  // namespace pfvar
