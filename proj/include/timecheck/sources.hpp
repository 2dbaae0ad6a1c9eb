#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "timecheck/timebase.hpp"

namespace timecheck {

/// One receiver PVT time solution.
struct GnssUpdate {
  std::int64_t seq = 0;
  Instant gnss_time;
  Instant local_rx;

  bool operator==(const GnssUpdate&) const = default;
};

/// One 802.11 beacon. ap_timestamp is the AP's elapsed time since radio
/// power-up (1 us resolution on air, held here in ns).
struct BeaconRecord {
  std::string bssid;
  Duration ap_timestamp;
  Instant local_rx;

  bool operator==(const BeaconRecord&) const = default;
};

/// Four-timestamp client/server exchange: client send, server receive,
/// server transmit, client receive.
struct NtpExchange {
  std::string server_id;
  Instant t0, t1, t2, t3;

  /// Round-trip delay: (t3 - t0) - (t2 - t1).
  Duration round_trip() const { return (t3 - t0) - (t2 - t1); }
  /// Server clock minus client clock: ((t1 - t0) + (t2 - t3)) / 2.
  Duration offset() const { return Duration(((t1 - t0) + (t2 - t3)).nanos() / 2); }

  bool operator==(const NtpExchange&) const = default;
};

/// GNSS samples use this source id.
inline constexpr const char* kGnssSourceId = "gnss";

/// IEEE 802.11 time unit.
inline constexpr Duration kTimeUnit = Duration::microseconds(1024);
/// Maximum distance between a paired beacon and its window edge (exclusive).
inline constexpr Duration kBeaconEdgeLimit = kTimeUnit * 100;

enum class TraceKind { kGnss, kBeacon, kNtp };

/// Malformed or out-of-order trace content. line() is 1-based and counts
/// the header; 0 means the error is not tied to a line.
class TraceError : public std::runtime_error {
 public:
  TraceError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// CSV headers, exact.
inline constexpr const char* kGnssHeader = "seq,gnss_time_ns,local_rx_ns";
inline constexpr const char* kBeaconHeader = "bssid,ap_timestamp_us,local_rx_ns";
inline constexpr const char* kNtpHeader = "server_id,t0_ns,t1_ns,t2_ns,t3_ns";

std::vector<GnssUpdate> read_gnss_trace(std::istream& in);
std::vector<BeaconRecord> read_beacon_trace(std::istream& in);
std::vector<NtpExchange> read_ntp_trace(std::istream& in);

std::vector<GnssUpdate> read_gnss_trace(const std::filesystem::path& path);
std::vector<BeaconRecord> read_beacon_trace(const std::filesystem::path& path);
std::vector<NtpExchange> read_ntp_trace(const std::filesystem::path& path);

void write_gnss_trace(std::ostream& out, std::span<const GnssUpdate> updates);
/// ap_timestamp is written in whole microseconds (truncated toward zero).
void write_beacon_trace(std::ostream& out, std::span<const BeaconRecord> beacons);
void write_ntp_trace(std::ostream& out, std::span<const NtpExchange> exchanges);

void write_gnss_trace(const std::filesystem::path& path, std::span<const GnssUpdate> updates);
void write_beacon_trace(const std::filesystem::path& path, std::span<const BeaconRecord> beacons);
void write_ntp_trace(const std::filesystem::path& path, std::span<const NtpExchange> exchanges);

TimeSample to_sample(const GnssUpdate& u);
/// source_time carries the AP counter as an instant on the AP's own axis.
TimeSample to_sample(const BeaconRecord& b);
/// source_time = t2, local_rx = t3, delay_comp = round_trip / 2, so that
/// source_offset() of the result equals the exchange offset.
TimeSample to_sample(const NtpExchange& x);

BeaconRecord to_beacon(const TimeSample& s);

/// Parses a trace file and emits its samples in local_rx order (stable
/// across sources). Throws TraceError on malformed lines or when local_rx
/// does not strictly increase within a source.
std::vector<TimeSample> replay_trace(const std::filesystem::path& path, TraceKind kind);

struct BeaconPair {
  BeaconRecord start;  // B1
  BeaconRecord end;    // B2
};

/// Picks the beacons nearest to each window edge with
/// |local_rx - edge| < 100 TU. Equidistant candidates resolve to the
/// earlier beacon. Returns nullopt when either edge has no qualifying
/// beacon or the two edges resolve to the same beacon.
///
/// Beacons must come from one bssid and be sorted by local_rx; throws
/// std::invalid_argument otherwise.
std::optional<BeaconPair> pair_beacons(std::span<const BeaconRecord> beacons,
                                       Instant window_start, Instant window_end);

/// Beacons of one AP, indexed by local_rx for repeated pairing. The
/// constructor enforces the pair_beacons preconditions.
class BeaconTrack {
 public:
  explicit BeaconTrack(std::vector<BeaconRecord> beacons);

  std::optional<BeaconPair> pair(Instant window_start, Instant window_end) const;

  const std::string& bssid() const { return bssid_; }
  std::span<const BeaconRecord> beacons() const { return beacons_; }

 private:
  std::string bssid_;
  std::vector<BeaconRecord> beacons_;
  std::vector<Instant> rx_;
};

std::map<std::string, std::vector<BeaconRecord>> group_by_bssid(
    std::span<const BeaconRecord> beacons);

/// Median spacing of consecutive local_rx values; 1 s when fewer than two
/// updates are given.
Duration nominal_update_interval(std::span<const GnssUpdate> updates);

/// Number of GNSS updates a window spans: window / interval rounded to the
/// nearest integer, at least 1. Window edges always sit on GNSS updates.
std::int64_t window_span_updates(Duration window, Duration update_interval);

/// Elapsed GNSS time between two local instants, each extrapolated from
/// the GNSS update it was paired with along the local clock.
Duration gnss_elapsed_between(const GnssUpdate& start, const GnssUpdate& end, Instant rx_start,
                              Instant rx_end);

}  // namespace timecheck
