#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timecheck/sources.hpp"
#include "timecheck/timebase.hpp"

namespace timecheck {

/// Parameters for synthetic, attack-free traces. Local clock and true time
/// differ by a constant; GNSS updates carry true time exactly, external
/// sources carry true time plus bounded uniform error.
struct SyntheticSetup {
  std::int64_t updates = 4000;
  Duration update_interval = Duration::seconds(1);
  Instant local_start = Instant(1'000'000'000'000'000);
  Duration gnss_minus_local = Duration::seconds(1'600'000'000);

  std::vector<std::string> ntp_servers = {"ntp-1", "ntp-2", "ntp-3"};
  Duration ntp_round_trip = Duration::milliseconds(8);
  // Server clock error, uniform in the open interval (-bound, +bound).
  Duration ntp_error_bound;

  std::vector<std::string> access_points = {"ap-1", "ap-2", "ap-3"};
  Duration beacon_interval = kTimeUnit * 100;
  // Per-beacon AP counter error, uniform in (-bound, +bound) before the
  // counter is truncated to whole microseconds.
  Duration beacon_error_bound;

  std::uint64_t seed = 1;
};

std::vector<GnssUpdate> synth_gnss(const SyntheticSetup& setup);
/// One exchange per server per GNSS update, completing shortly after it.
std::vector<NtpExchange> synth_ntp(const SyntheticSetup& setup);
/// Beacons of every AP from one interval before the first update to one
/// after the last, in local_rx order.
std::vector<BeaconRecord> synth_beacons(const SyntheticSetup& setup);

}  // namespace timecheck
