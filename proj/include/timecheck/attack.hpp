#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "timecheck/sources.hpp"
#include "timecheck/timebase.hpp"

namespace timecheck {

/// Parameters of a quadratically growing GNSS clock-offset attack that is
/// held constant after `hold_from`.
///
/// Indices are attack-relative: update `start_index` of the trace receives
/// offset_at(1), the next one offset_at(2), and so on.
struct AttackSchedule {
  Duration t_bias;   // offset at the first attacked update
  Duration beta;     // growth rate
  std::int64_t hold_from = INT64_MAX;
  std::int64_t start_index = 1;
  // Replaces the computed held value after hold_from when set.
  std::optional<Duration> hold_value;

  /// t_bias = 5 us, beta = 55 ns, held from update 3492.
  static AttackSchedule reference_ramp();
};

/// of(1) = t_bias, of(2) = of(1) + beta, of(n) = of(n-1) + (n-2)*beta for
/// 3 <= n <= hold_from, then constant. Evaluated in closed form in integer
/// nanoseconds. Throws std::invalid_argument for n < 1 or an invalid
/// schedule, std::overflow_error when the offset leaves the int64 range.
Duration offset_at(std::int64_t n, const AttackSchedule& sched);

/// Adds offset_at(seq - start_index + 1) to gnss_time of every update with
/// seq >= start_index. local_rx and seq are untouched.
std::vector<GnssUpdate> apply_attack(std::span<const GnssUpdate> trace, const AttackSchedule& sched);

}  // namespace timecheck
