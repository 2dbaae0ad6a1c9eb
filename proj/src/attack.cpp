#include "timecheck/attack.hpp"

#include <limits>
#include <stdexcept>

namespace timecheck {

AttackSchedule AttackSchedule::reference_ramp() {
  AttackSchedule s;
  s.t_bias = Duration::microseconds(5);
  s.beta = Duration::nanoseconds(55);
  s.hold_from = 3492;
  s.start_index = 1;
  return s;
}

Duration offset_at(std::int64_t n, const AttackSchedule& sched) {
  if (n < 1) throw std::invalid_argument("offset_at: n must be >= 1");
  if (sched.beta < Duration(0)) throw std::invalid_argument("offset_at: beta must be >= 0");
  if (sched.hold_from < sched.start_index) {
    throw std::invalid_argument("offset_at: hold_from must be >= start_index");
  }
  if (n > sched.hold_from && sched.hold_value) return *sched.hold_value;

  const std::int64_t m = n < sched.hold_from ? n : sched.hold_from;
  if (m < 2) return sched.t_bias;
  // t_bias + beta * (1 + (m-2)(m-1)/2); (m-2)(m-1) is always even.
  __int128 steps = 1 + static_cast<__int128>(m - 2) * (m - 1) / 2;
  __int128 total = static_cast<__int128>(sched.t_bias.nanos()) + steps * sched.beta.nanos();
  if (total > std::numeric_limits<std::int64_t>::max() ||
      total < std::numeric_limits<std::int64_t>::min()) {
    throw std::overflow_error("offset_at: offset exceeds int64 nanoseconds");
  }
  return Duration(static_cast<std::int64_t>(total));
}

std::vector<GnssUpdate> apply_attack(std::span<const GnssUpdate> trace, const AttackSchedule& sched) {
  std::vector<GnssUpdate> out(trace.begin(), trace.end());
  for (auto& u : out) {
    if (u.seq >= sched.start_index) {
      u.gnss_time = u.gnss_time + offset_at(u.seq - sched.start_index + 1, sched);
    }
  }
  return out;
}

}  // namespace timecheck
