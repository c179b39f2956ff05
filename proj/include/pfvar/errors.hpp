#pragma once

#include <stdexcept>

namespace pfvar {

/// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidConfig : Error { using Error::Error; };
struct InvalidParams : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct NonFinitePotential : Error { using Error::Error; };
struct DegenerateWeights : Error { using Error::Error; };
struct RowNotInWindow : Error { using Error::Error; };
struct NumericalUnderflow : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct InvalidLevel : Error { using Error::Error; };
struct ModelNotTractable : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace pfvar
