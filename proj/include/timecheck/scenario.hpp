#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "timecheck/attack.hpp"
#include "timecheck/calibrate.hpp"
#include "timecheck/detect.hpp"
#include "timecheck/rational.hpp"
#include "timecheck/sources.hpp"

namespace timecheck {

// Process exit codes of the scenario runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitAlarm = 2;
inline constexpr int kExitConfigError = 3;
inline constexpr int kExitInputError = 4;

struct ScenarioConfig {
  std::filesystem::path gnss_trace;
  std::vector<std::filesystem::path> beacon_traces;
  std::vector<std::filesystem::path> ntp_traces;
  CheckMode::Kind mode = CheckMode::Kind::kAbsolute;
  std::vector<Duration> windows;  // relative mode; defaults to the standard set
  std::string profiles = "builtin";
  std::optional<AttackSchedule> attack;
  int q = 1;
  FusionPolicy fusion = FusionPolicy::kMajorityTech;
  std::map<Technology, Rational> weights;
  Reduction reduction = Reduction::kMean;
  Rational vote_bar{1, 2};
  Duration align_tolerance = kDefaultAlignTolerance;
  std::map<std::string, Duration> source_epsilon;
  std::filesystem::path out_dir = ".";
};

/// Applies one `key = value` setting. Keys: gnss_trace, beacon_trace,
/// ntp_trace, mode, window_ms, profiles, q, fusion, weight.<tech>,
/// reduction, vote_bar, align_tolerance_ns, epsilon_ns.<source>, attack
/// (none|reference), attack.t_bias_ns, attack.beta_ns, attack.hold_from,
/// attack.start_index, attack.hold_value_ns, out_dir. Repeatable list keys
/// (traces, window_ms) append and accept comma-separated values. Throws
/// ConfigError naming `where`.
void set_config_value(ScenarioConfig& config, std::string_view key, std::string_view value,
                      const std::string& where);

/// Reads a key-value config document. Relative paths resolve against
/// `base_dir`.
ScenarioConfig parse_scenario_config(std::istream& in, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

/// Throws ConfigError with the offending field path.
void validate(const ScenarioConfig& config);

struct RunSummary {
  CheckMode mode;
  std::vector<std::pair<Technology, std::size_t>> technologies;  // with source counts
  std::int64_t consistent = 0;
  std::int64_t discrepant = 0;
  std::int64_t insufficient = 0;
  std::optional<std::int64_t> first_detection_seq;
  std::optional<Instant> first_detection_at;
  // Inclusive seq ranges during which the aggregation alarm was raised.
  std::vector<std::pair<std::int64_t, std::int64_t>> alarm_timeline;
  std::vector<std::filesystem::path> csv_files;
  std::vector<Verdict> verdicts;
};

struct ScenarioReport {
  std::vector<RunSummary> runs;
  std::vector<std::string> warnings;
  std::int64_t gnss_updates = 0;

  bool any_alarm() const;
  std::string text(const ScenarioConfig& config) const;
};

/// Traces already in memory. Empty vectors mean the technology is absent.
struct ScenarioData {
  std::vector<GnssUpdate> gnss;
  std::vector<BeaconRecord> beacons;
  std::vector<NtpExchange> ntp;
};

/// Loads every trace named by the config (concurrently). A failing external
/// trace is dropped with a warning; a failing GNSS trace throws TraceError.
ScenarioData load_scenario_data(const ScenarioConfig& config, std::vector<std::string>& warnings);

/// Runs one detection pass per configured window (one for absolute mode),
/// writes verdict CSVs per technology (and "fused" when several
/// technologies take part) and report.txt into out_dir.
ScenarioReport run_scenario(const ScenarioConfig& config);
ScenarioReport run_scenario(const ScenarioConfig& config, ScenarioData data,
                            std::vector<std::string> warnings = {});

/// Builtin profiles, or profiles calibrated from attack-free traces.
struct CalibrationRequest {
  std::filesystem::path reference;
  std::vector<std::filesystem::path> ntp_traces;
  std::vector<std::filesystem::path> beacon_traces;
  std::vector<Duration> windows;  // defaults to the standard set
  Duration align_tolerance = kDefaultAlignTolerance;
  bool builtin = false;
};

std::vector<AccuracyProfile> calibrate_traces(const CalibrationRequest& request);

}  // namespace timecheck
