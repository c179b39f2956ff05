#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pfvar/errors.hpp"
#include "pfvar/lag.hpp"
#include "pfvar/model.hpp"
#include "pfvar/resampling.hpp"
#include "pfvar/rng.hpp"

namespace pfvar {

/// Ancestor indices drawn during one selection step (0-based).
struct AncestorDraw {
    std::vector<std::int32_t> indices;
};

/// Bootstrap particle filter with online ancestor tracking.
///
/// One update consists of weighting the current cloud by the potential at the
/// incoming observation, multinomial selection, and mutation of the selected
/// parents through the transition kernel. Alongside the particles the filter
/// maintains
///
///   * a window of ancestor-index rows, one row per time m in
///     [(n - lag) v 0, n]; row m holds, for each particle i alive at time n,
///     the index of its time-m ancestor (the "Enoch" indices of that row),
///   * the eve indices, i.e. the time-zero ancestor of every particle,
///     kept unconditionally so the full-tracing estimator stays available
///     next to any finite-lag window.
///
/// The top row of the window is always the identity, each selection permutes
/// every retained row by the drawn ancestor vector, and rows older than the
/// lag are dropped. Storage is therefore bounded by (lag + 1) * N indices
/// plus N for the eve row, independent of n.
///
/// All indices are 0-based. A state is single-threaded but may be moved
/// between threads; concurrent runs should each own their own state.
class FilterState {
public:
    FilterState(std::shared_ptr<const ModelSpec> model, int count, std::int64_t lag,
                std::uint64_t seed)
        : model_(std::move(model)), count_(count), lag_(lag), rng_(seed) {
        if (count_ < 1) throw InvalidConfig("particle count must be at least 1");
        if (lag_ < 0) throw InvalidConfig("lag must be nonnegative");
        if (!model_) throw InvalidConfig("model must not be null");
        if (model_->state_dim != 1) {
            throw InvalidConfig("only scalar states are supported");
        }
        positions_.resize(count_);
        for (auto& x : positions_) x = model_->initial_sampler(rng_);
        weights_.assign(count_, 0.0);
        eve_ = identity_row();
        window_.push_back(identity_row());
    }

    std::int64_t n() const { return n_; }
    int particle_count() const { return count_; }
    std::int64_t lag() const { return lag_; }
    const std::vector<double>& positions() const { return positions_; }
    const std::vector<std::int32_t>& eve() const { return eve_; }

    bool has_weights() const { return has_weights_; }
    const std::vector<double>& weights() const { return weights_; }
    double weight_sum() const { return weight_sum_; }

    /// Oldest time still covered by the ancestor window.
    std::int64_t window_low() const { return window_low_; }
    std::int64_t window_rows() const { return static_cast<std::int64_t>(window_.size()); }

    /// Ancestor-index row for time m; throws RowNotInWindow when m has been
    /// dropped (or never existed).
    const std::vector<std::int32_t>& enoch_row(std::int64_t m) const {
        if (m < window_low_ || m > n_) {
            throw RowNotInWindow("row " + std::to_string(m) + " not in window [" +
                                 std::to_string(window_low_) + ", " +
                                 std::to_string(n_) + "]");
        }
        return window_[static_cast<std::size_t>(m - window_low_)];
    }

    /// Total genealogy storage in index slots: window rows plus the eve row.
    std::int64_t genealogy_slot_count() const {
        return (window_rows() + 1) * static_cast<std::int64_t>(count_);
    }

    /// Computes the weights of the current cloud for perturbation z. Log
    /// potentials are shifted by their maximum before exponentiation; every
    /// consumer downstream only ever uses normalized weights, so the shift
    /// is invisible (and keeps long runs away from underflow).
    void weigh(double z) {
        double max_log = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < count_; ++i) {
            const double lg = model_->log_potential(z, positions_[i]);
            if (std::isnan(lg) || lg == std::numeric_limits<double>::infinity()) {
                throw NonFinitePotential("log potential is NaN or +inf at step " +
                                         std::to_string(n_));
            }
            weights_[i] = lg;
            if (lg > max_log) max_log = lg;
        }
        if (max_log == -std::numeric_limits<double>::infinity()) {
            throw DegenerateWeights("all potentials are zero at step " +
                                    std::to_string(n_));
        }
        weight_sum_ = 0.0;
        for (int i = 0; i < count_; ++i) {
            weights_[i] = std::exp(weights_[i] - max_log);
            weight_sum_ += weights_[i];
        }
        has_weights_ = true;
    }

    /// Selection and mutation. Requires weights for the current positions;
    /// consumes them. Returns the drawn ancestor indices.
    AncestorDraw advance() {
        if (!has_weights_) throw Error("advance() requires weights; call weigh() first");
        AncestorDraw draw{resample_categorical(weights_, count_, rng_)};
        const auto& anc = draw.indices;

        new_positions_.resize(count_);
        for (int i = 0; i < count_; ++i) {
            new_positions_[i] = model_->transition_sampler(positions_[anc[i]], rng_);
        }
        positions_.swap(new_positions_);

        const std::int64_t new_low = root_time(n_ + 1, lag_);
        while (window_low_ < new_low) {
            window_.pop_front();
            ++window_low_;
        }
        scratch_.resize(count_);
        for (auto& row : window_) {
            for (int i = 0; i < count_; ++i) scratch_[i] = row[anc[i]];
            row.swap(scratch_);
        }
        for (int i = 0; i < count_; ++i) scratch_[i] = eve_[anc[i]];
        eve_.swap(scratch_);
        window_.push_back(identity_row());

        ++n_;
        has_weights_ = false;
        weight_sum_ = 0.0;
        return draw;
    }

    /// Full update for one perturbation: weigh, select, mutate.
    AncestorDraw step(double z) {
        weigh(z);
        return advance();
    }

    /// Unweighted cloud mean of h (predictor estimate).
    double predictor_estimate(const TestFunction& h) const {
        double sum = 0.0;
        for (int i = 0; i < count_; ++i) sum += h(positions_[i]);
        return sum / count_;
    }

    /// Self-normalized weighted mean of h (filter estimate). Requires weights
    /// computed for the current positions.
    double filter_estimate(const TestFunction& h) const {
        if (!has_weights_) throw Error("filter_estimate requires weights; call weigh() first");
        if (!(weight_sum_ > 0.0)) throw DegenerateWeights("weight sum is not positive");
        double sum = 0.0;
        for (int i = 0; i < count_; ++i) sum += weights_[i] * h(positions_[i]);
        return sum / weight_sum_;
    }

    /// Number of distinct ancestors at time m. m must be in the window, with
    /// one exception: m = 0 is always answerable through the eve indices.
    int unique_ancestor_count(std::int64_t m) const {
        if (m >= window_low_ && m <= n_) return distinct(enoch_row(m));
        if (m == 0) return distinct(eve_);
        throw RowNotInWindow("time " + std::to_string(m) + " is not traced");
    }

    int unique_eve_count() const { return distinct(eve_); }

private:
    std::vector<std::int32_t> identity_row() const {
        std::vector<std::int32_t> row(static_cast<std::size_t>(count_));
        std::iota(row.begin(), row.end(), 0);
        return row;
    }

    int distinct(const std::vector<std::int32_t>& row) const {
        std::vector<char> seen(static_cast<std::size_t>(count_), 0);
        int unique = 0;
        for (auto index : row) {
            if (!seen[static_cast<std::size_t>(index)]) {
                seen[static_cast<std::size_t>(index)] = 1;
                ++unique;
            }
        }
        return unique;
    }

    std::shared_ptr<const ModelSpec> model_;
    std::int64_t n_ = 0;
    int count_;
    std::int64_t lag_;
    std::vector<double> positions_;
    std::vector<double> weights_;
    double weight_sum_ = 0.0;
    bool has_weights_ = false;
    std::deque<std::vector<std::int32_t>> window_;
    std::int64_t window_low_ = 0;
    std::vector<std::int32_t> eve_;
    Rng rng_;

    std::vector<double> new_positions_;
    std::vector<std::int32_t> scratch_;
};

/// Particle system initialised from the model's initial distribution, with an
/// identity genealogy. Weights stay unset until the first weigh()/step().
inline FilterState init_filter(std::shared_ptr<const ModelSpec> model, int count,
                               std::int64_t lag, std::uint64_t seed) {
    return FilterState(std::move(model), count, lag, seed);
}

}  // namespace pfvar
