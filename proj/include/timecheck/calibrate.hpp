#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timecheck/sources.hpp"
#include "timecheck/timebase.hpp"

namespace timecheck {

/// Minimum per-source sample count for a trustworthy 99% quantile.
inline constexpr std::int64_t kMinConfidentSamples = 100;

/// Calibrated accuracy of one technology (and, for relative checking, one
/// observation window).
struct AccuracyProfile {
  Technology technology = Technology::kNtp;
  std::optional<Duration> window;  // WiFi windows; absent for NTP
  Duration epsilon;                // max over per_source_quantiles
  // Smallest per-source sample count; 0 for shipped constants.
  std::int64_t sample_count = 0;
  std::map<std::string, Duration> per_source_quantiles;
  std::map<std::string, std::int64_t> per_source_counts;
  // WiFi window coverage: windows where a beacon pair was available.
  std::int64_t windows_attempted = 0;
  std::int64_t windows_paired = 0;

  bool low_confidence() const { return sample_count > 0 && sample_count < kMinConfidentSamples; }

  bool operator==(const AccuracyProfile&) const = default;
};

/// Nearest-rank 99th percentile of |errors|: element ceil(0.99 N) - 1 of
/// the ascending sort. Throws std::invalid_argument on an empty list.
Duration quantile99(std::span<const Duration> errors);

/// Per-server |ntp offset - reference offset| at GNSS updates aligned to
/// each exchange's receive time; epsilon is the largest server quantile.
/// Throws std::invalid_argument when no exchange aligns with the reference.
AccuracyProfile profile_ntp(std::span<const NtpExchange> exchanges,
                            std::span<const GnssUpdate> reference,
                            Duration align_tolerance = kDefaultAlignTolerance);

/// Per-AP |(T_AP(B2) - T_AP(B1)) - GNSS elapsed| over every window of
/// `window` length whose edges sit on reference updates; epsilon is the
/// largest AP quantile. Windows without a beacon pair are skipped and
/// counted in windows_attempted only.
AccuracyProfile profile_wifi(std::span<const BeaconRecord> beacons,
                             std::span<const GnssUpdate> reference, Duration window);

/// Shipped thresholds: NTP 2.046 ms; WiFi 46.064 / 35.021 / 23.942 us for
/// 1024 / 3072 / 5120 ms windows.
std::vector<AccuracyProfile> builtin_profiles();

/// Standard WiFi observation windows (1000, 3000, 5000 TU).
std::vector<Duration> standard_windows();

/// Profile that applies to `technology` at `window`: an exact window match
/// first, otherwise a window-less profile of that technology.
std::optional<AccuracyProfile> find_profile(std::span<const AccuracyProfile> profiles,
                                            Technology technology,
                                            std::optional<Duration> window);

/// Stanza text format, stanzas separated by blank lines:
///   technology = wifi
///   window_ms = 1024
///   epsilon_ns = 46064
///   sample_count = 0
/// plus optional source_quantile_ns.<id>, windows_attempted and
/// windows_paired keys. '#' starts a comment line.
void write_profiles(std::ostream& out, std::span<const AccuracyProfile> profiles);
void write_profiles(const std::filesystem::path& path, std::span<const AccuracyProfile> profiles);
/// Throws ConfigError naming the offending line.
std::vector<AccuracyProfile> read_profiles(std::istream& in);
std::vector<AccuracyProfile> read_profiles(const std::filesystem::path& path);

/// Descriptive entry for a candidate time technology. Only NTP and WiFi
/// beacons have adapters; the rest exist as reference metadata.
struct TechnologyInfo {
  std::string name;
  std::string timing;
  std::optional<Duration> nominal_accuracy;
  std::string weakness;
  bool has_adapter = false;
};

const std::vector<TechnologyInfo>& technology_catalog();

}  // namespace timecheck
