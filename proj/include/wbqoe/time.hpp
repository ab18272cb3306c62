#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace wbqoe {

// All clocks count integer microseconds since their epoch. Integer time keeps
// the tick grid and the release comparisons exact.
using Micros = std::chrono::microseconds;

constexpr Micros from_ms(std::int64_t ms) { return Micros{ms * 1000}; }

inline Micros from_ms_real(double ms) {
  return Micros{static_cast<std::int64_t>(std::llround(ms * 1000.0))};
}

constexpr double to_ms(Micros t) { return static_cast<double>(t.count()) / 1000.0; }

/// Tick k of a grid with the given rate, counted from the grid origin.
/// floor(k * 1e6 / rate) so consecutive ticks never drift.
inline Micros tick_offset(std::int64_t k, double tick_rate) {
  return Micros{static_cast<std::int64_t>(
      std::floor(static_cast<long double>(k) * 1'000'000.0L / static_cast<long double>(tick_rate)))};
}

/// Index of the first tick at or after `offset` (offset measured from the origin).
inline std::int64_t first_tick_at_or_after(Micros offset, double tick_rate) {
  if (offset.count() <= 0) return 0;
  auto k = static_cast<std::int64_t>(
      std::ceil(static_cast<long double>(offset.count()) * static_cast<long double>(tick_rate) / 1'000'000.0L));
  // Correct for rounding at the boundaries.
  while (k > 0 && tick_offset(k - 1, tick_rate) >= offset) --k;
  while (tick_offset(k, tick_rate) < offset) ++k;
  return k;
}

}  // namespace wbqoe
