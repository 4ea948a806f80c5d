#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "safe/result.hpp"

namespace safe {

// UTC instant with integer-second resolution. The canonical text form is
// RFC 3339 with a 'Z' suffix and no fractional seconds
// ("2024-01-22T00:00:00Z"); for that form lexicographic order equals
// chronological order.
struct Timestamp {
  std::int64_t epoch_seconds = 0;

  auto operator<=>(const Timestamp&) const = default;

  Timestamp plus_seconds(std::int64_t s) const { return {epoch_seconds + s}; }
  std::int64_t seconds_since(const Timestamp& other) const {
    return epoch_seconds - other.epoch_seconds;
  }
};

inline constexpr std::int64_t kSecondsPerDay = 86400;

// Accepts exactly "YYYY-MM-DDTHH:MM:SSZ" with a valid proleptic-Gregorian
// calendar date, years 0001..9999.
Result<Timestamp> parse_timestamp(std::string_view text);

std::string render_timestamp(Timestamp ts);

}  // namespace safe
