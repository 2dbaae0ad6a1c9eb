#include "timecheck/simulate.hpp"

#include <algorithm>
#include <random>

namespace timecheck {

namespace {

// Uniform in the open interval (-bound, bound); zero when bound <= 1 ns.
Duration draw_error(std::mt19937_64& rng, Duration bound) {
  if (bound.nanos() <= 1) return Duration(0);
  std::uniform_int_distribution<std::int64_t> dist(-bound.nanos() + 1, bound.nanos() - 1);
  return Duration(dist(rng));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace

std::vector<GnssUpdate> synth_gnss(const SyntheticSetup& setup) {
  std::vector<GnssUpdate> out;
  out.reserve(static_cast<std::size_t>(setup.updates));
  for (std::int64_t i = 0; i < setup.updates; ++i) {
    Instant rx = setup.local_start + setup.update_interval * i;
    out.push_back({i + 1, rx + setup.gnss_minus_local, rx});
  }
  return out;
}

std::vector<NtpExchange> synth_ntp(const SyntheticSetup& setup) {
  std::mt19937_64 rng(setup.seed);
  const Duration processing = Duration::microseconds(20);
  std::vector<NtpExchange> out;
  out.reserve(static_cast<std::size_t>(setup.updates) * setup.ntp_servers.size());
  for (std::int64_t i = 0; i < setup.updates; ++i) {
    Instant update_rx = setup.local_start + setup.update_interval * i;
    for (std::size_t s = 0; s < setup.ntp_servers.size(); ++s) {
      // Even, per-server round trips keep the half-RTT split exact.
      Duration rtt = setup.ntp_round_trip + Duration::microseconds(2 * static_cast<std::int64_t>(s));
      Duration err = draw_error(rng, setup.ntp_error_bound);
      Instant t0 = update_rx + Duration::milliseconds(1);
      Instant t1 = t0 + Duration(rtt.nanos() / 2) + setup.gnss_minus_local + err;
      Instant t2 = t1 + processing;
      Instant t3 = t0 + rtt + processing;
      out.push_back({setup.ntp_servers[s], t0, t1, t2, t3});
    }
  }
  return out;
}

std::vector<BeaconRecord> synth_beacons(const SyntheticSetup& setup) {
  std::mt19937_64 rng(setup.seed ^ 0x9e3779b97f4a7c15ull);
  const Instant first = setup.local_start - setup.update_interval;
  const Instant last = setup.local_start + setup.update_interval * setup.updates;

  std::vector<BeaconRecord> out;
  for (std::size_t a = 0; a < setup.access_points.size(); ++a) {
    const auto idx = static_cast<std::int64_t>(a);
    // Distinct whole-microsecond phases and power-up instants per AP.
    Duration phase = Duration::microseconds(17'000 + 31'013 * idx);
    Instant boot = setup.local_start - Duration::seconds(3600 * (idx + 1)) - Duration::microseconds(idx);
    for (Instant rx = first + phase; rx <= last; rx = rx + setup.beacon_interval) {
      Duration counter = (rx - boot) + draw_error(rng, setup.beacon_error_bound);
      Duration truncated = Duration::microseconds(floor_div(counter.nanos(), 1000));
      if (!out.empty() && out.back().bssid == setup.access_points[a] &&
          truncated < out.back().ap_timestamp) {
        truncated = out.back().ap_timestamp;
      }
      out.push_back({setup.access_points[a], truncated, rx});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& x, const auto& y) { return x.local_rx < y.local_rx; });
  return out;
}

}  // namespace timecheck
