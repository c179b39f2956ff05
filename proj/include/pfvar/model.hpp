#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include "pfvar/errors.hpp"
#include "pfvar/rng.hpp"

namespace pfvar {

/// A state-space model in sampling form: an initial distribution, a Markov
/// transition kernel and a family of positive potential (local likelihood)
/// functions indexed by the observation. Potentials are handled in log scale
/// throughout; the filter exponentiates them only after shifting by the
/// per-step maximum over the cloud, so that long runs with tiny likelihoods
/// do not underflow.
///
/// Instances are immutable after construction and may be shared freely across
/// threads. Generators are never stored here; every consumer passes its own.
struct ModelSpec {
    std::function<double(Rng&)> initial_sampler;
    std::function<double(double, Rng&)> transition_sampler;
    std::function<double(double, double)> log_potential;  // (z, x) -> log g<z>(x)
    int state_dim = 1;
};

/// Potential value g<z>(x). Throws NonFinitePotential when the log potential
/// evaluates to NaN or +infinity.
inline double potential(const ModelSpec& model, double z, double x) {
    const double lg = model.log_potential(z, x);
    if (std::isnan(lg) || lg == std::numeric_limits<double>::infinity()) {
        throw NonFinitePotential("log potential is NaN or +inf");
    }
    return std::exp(lg);
}

/// Bounded test function evaluated on particle positions.
class TestFunction {
public:
    enum class Kind { identity, indicator, custom };

    static TestFunction identity() { return TestFunction(Kind::identity, 0, 0, {}); }

    /// Indicator of the half-open interval [lo, hi).
    static TestFunction indicator(double lo, double hi) {
        return TestFunction(Kind::indicator, lo, hi, {});
    }

    static TestFunction custom(std::function<double(double)> fn) {
        return TestFunction(Kind::custom, 0, 0, std::move(fn));
    }

    double operator()(double x) const {
        switch (kind_) {
            case Kind::identity: return x;
            case Kind::indicator: return (lo_ <= x && x < hi_) ? 1.0 : 0.0;
            case Kind::custom: return fn_(x);
        }
        return 0.0;  // unreachable
    }

    Kind kind() const { return kind_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

private:
    TestFunction(Kind kind, double lo, double hi, std::function<double(double)> fn)
        : kind_(kind), lo_(lo), hi_(hi), fn_(std::move(fn)) {}

    Kind kind_;
    double lo_;
    double hi_;
    std::function<double(double)> fn_;
};

}  // namespace pfvar
