#pragma once

#include <cstdint>
#include <limits>

namespace pfvar {

/// Lag value meaning "trace the full genealogy back to time zero".
inline constexpr std::int64_t kFullTracing = std::numeric_limits<std::int64_t>::max();

/// Root time of the traced genealogy at time n for a given lag:
/// (n - lag) clamped to zero.
inline std::int64_t root_time(std::int64_t n, std::int64_t lag) {
    return lag >= n ? 0 : n - lag;
}

}  // namespace pfvar
