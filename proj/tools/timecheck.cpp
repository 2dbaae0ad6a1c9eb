// Command-line front end: calibrate, synth, run, generate, query.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "timecheck/attack.hpp"
#include "timecheck/calibrate.hpp"
#include "timecheck/errors.hpp"
#include "timecheck/scenario.hpp"
#include "timecheck/simulate.hpp"
#include "timecheck/sntp.hpp"
#include "timecheck/sources.hpp"

namespace {

using namespace timecheck;

struct RunFlags {
  std::string config;
  std::string gnss;
  std::vector<std::string> beacons;
  std::vector<std::string> ntp;
  std::string mode;
  std::vector<std::int64_t> windows_ms;
  std::optional<int> q;
  std::string fusion;
  std::vector<std::string> weights;
  std::string profiles;
  std::string out_dir;
  std::string reduction;
  std::string vote_bar;
  std::string attack;
  std::optional<std::int64_t> t_bias_ns, beta_ns, hold_from, start_index, hold_value_ns;
  std::optional<std::int64_t> align_tolerance_ns;
  bool quiet = false;
};

ScenarioConfig build_config(const RunFlags& f) {
  ScenarioConfig c = f.config.empty() ? ScenarioConfig{} : load_scenario_config(f.config);
  auto set = [&](const char* key, const std::string& value, const char* flag) {
    set_config_value(c, key, value, flag);
  };
  if (!f.gnss.empty()) set("gnss_trace", f.gnss, "--gnss");
  if (!f.beacons.empty()) {
    c.beacon_traces.clear();
    for (const auto& p : f.beacons) set("beacon_trace", p, "--beacons");
  }
  if (!f.ntp.empty()) {
    c.ntp_traces.clear();
    for (const auto& p : f.ntp) set("ntp_trace", p, "--ntp");
  }
  if (!f.mode.empty()) set("mode", f.mode, "--mode");
  if (!f.windows_ms.empty()) {
    c.windows.clear();
    for (auto ms : f.windows_ms) set("window_ms", std::to_string(ms), "--window-ms");
  }
  if (f.q) set("q", std::to_string(*f.q), "--q");
  if (!f.fusion.empty()) set("fusion", f.fusion, "--fusion");
  if (!f.weights.empty()) {
    c.weights.clear();
    for (const auto& w : f.weights) {
      auto eq = w.find('=');
      if (eq == std::string::npos) throw ConfigError("--weight", "expected tech=value, got '" + w + "'");
      set(("weight." + w.substr(0, eq)).c_str(), w.substr(eq + 1), "--weight");
    }
  }
  if (!f.profiles.empty()) set("profiles", f.profiles, "--profiles");
  if (!f.out_dir.empty()) set("out_dir", f.out_dir, "--out-dir");
  if (!f.reduction.empty()) set("reduction", f.reduction, "--reduction");
  if (!f.vote_bar.empty()) set("vote_bar", f.vote_bar, "--vote-bar");
  if (!f.attack.empty()) set("attack", f.attack, "--attack");
  if (f.t_bias_ns) set("attack.t_bias_ns", std::to_string(*f.t_bias_ns), "--t-bias-ns");
  if (f.beta_ns) set("attack.beta_ns", std::to_string(*f.beta_ns), "--beta-ns");
  if (f.hold_from) set("attack.hold_from", std::to_string(*f.hold_from), "--hold-from");
  if (f.start_index) set("attack.start_index", std::to_string(*f.start_index), "--start-index");
  if (f.hold_value_ns) set("attack.hold_value_ns", std::to_string(*f.hold_value_ns), "--hold-value-ns");
  if (f.align_tolerance_ns) {
    set("align_tolerance_ns", std::to_string(*f.align_tolerance_ns), "--align-tolerance-ns");
  }
  return c;
}

// Maps library exceptions onto exit codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const TraceError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const SntpError& e) {
    std::cerr << "sntp error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNSS time offset validation against external time sources"};
  app.require_subcommand(1);

  // run
  RunFlags rf;
  auto* run = app.add_subcommand("run", "Run a detection scenario over recorded traces");
  run->add_option("--config", rf.config, "Scenario config file (key = value)");
  run->add_option("--gnss", rf.gnss, "GNSS trace CSV");
  run->add_option("--beacons", rf.beacons, "Beacon trace CSV (repeatable)");
  run->add_option("--ntp", rf.ntp, "NTP trace CSV (repeatable)");
  run->add_option("--mode", rf.mode, "absolute | relative");
  run->add_option("--window-ms", rf.windows_ms, "Relative observation window(s) in ms");
  run->add_option("--q", rf.q, "Consecutive negative decisions needed to raise an alarm");
  run->add_option("--fusion", rf.fusion, "majority | weighted");
  run->add_option("--weight", rf.weights, "Technology weight, e.g. ntp=0.6 (repeatable)");
  run->add_option("--profiles", rf.profiles, "builtin | path to a profile file");
  run->add_option("--out-dir", rf.out_dir, "Directory for verdict CSVs and report.txt");
  run->add_option("--reduction", rf.reduction, "mean | median | max (fusion input per technology)");
  run->add_option("--vote-bar", rf.vote_bar, "Majority bar, e.g. 1/2 or 2/3");
  run->add_option("--attack", rf.attack, "none | reference");
  run->add_option("--t-bias-ns", rf.t_bias_ns, "Attack initial offset");
  run->add_option("--beta-ns", rf.beta_ns, "Attack growth rate");
  run->add_option("--hold-from", rf.hold_from, "Attack index after which the offset is held");
  run->add_option("--start-index", rf.start_index, "First attacked GNSS update");
  run->add_option("--hold-value-ns", rf.hold_value_ns, "Explicit held offset");
  run->add_option("--align-tolerance-ns", rf.align_tolerance_ns, "Sample alignment tolerance");
  run->add_flag("--quiet", rf.quiet, "Do not print the report");

  // calibrate
  CalibrationRequest cal;
  std::vector<std::string> cal_ntp, cal_beacons;
  std::vector<std::int64_t> cal_windows_ms;
  std::string cal_reference, cal_out = "-";
  auto* calibrate = app.add_subcommand("calibrate", "Derive accuracy thresholds (99% quantiles)");
  calibrate->add_option("--reference", cal_reference, "Attack-free GNSS trace CSV");
  calibrate->add_option("--ntp", cal_ntp, "NTP trace CSV (repeatable)");
  calibrate->add_option("--beacons", cal_beacons, "Beacon trace CSV (repeatable)");
  calibrate->add_option("--window-ms", cal_windows_ms, "WiFi window(s) in ms");
  calibrate->add_flag("--builtin", cal.builtin, "Emit the shipped default profiles");
  calibrate->add_option("--out", cal_out, "Profile file to write, '-' for stdout");

  // synth
  std::string synth_in, synth_out;
  AttackSchedule sched = AttackSchedule::reference_ramp();
  std::int64_t t_bias_ns = sched.t_bias.nanos(), beta_ns = sched.beta.nanos();
  std::optional<std::int64_t> synth_hold_value;
  bool no_hold = false;
  auto* synth = app.add_subcommand("synth", "Apply the offset ramp attack to a clean GNSS trace");
  synth->add_option("--in", synth_in, "Clean GNSS trace CSV")->required();
  synth->add_option("--out", synth_out, "Attacked GNSS trace CSV")->required();
  synth->add_option("--t-bias-ns", t_bias_ns, "Initial offset")->capture_default_str();
  synth->add_option("--beta-ns", beta_ns, "Growth rate")->capture_default_str();
  synth->add_option("--hold-from", sched.hold_from, "Index after which the offset is held")->capture_default_str();
  synth->add_option("--start-index", sched.start_index, "First attacked update")->capture_default_str();
  synth->add_option("--hold-value-ns", synth_hold_value, "Explicit held offset");
  synth->add_flag("--no-hold", no_hold, "Never hold the offset constant");

  // generate
  SyntheticSetup setup;
  std::string gen_dir = ".";
  std::int64_t ntp_err_ns = 0, beacon_err_ns = 0;
  std::size_t n_servers = setup.ntp_servers.size(), n_aps = setup.access_points.size();
  auto* generate = app.add_subcommand("generate", "Write synthetic attack-free traces");
  generate->add_option("--out-dir", gen_dir, "Output directory")->capture_default_str();
  generate->add_option("--updates", setup.updates, "GNSS updates at 1 Hz")->capture_default_str();
  generate->add_option("--seed", setup.seed, "Random seed")->capture_default_str();
  generate->add_option("--ntp-error-ns", ntp_err_ns, "NTP error bound (uniform, open)")->capture_default_str();
  generate->add_option("--beacon-error-ns", beacon_err_ns, "Beacon error bound (uniform, open)")->capture_default_str();
  generate->add_option("--ntp-servers", n_servers, "Number of NTP servers")->capture_default_str();
  generate->add_option("--aps", n_aps, "Number of access points")->capture_default_str();

  // query
  std::string server;
  std::int64_t timeout_ms = 2000;
  auto* query = app.add_subcommand("query", "One live SNTP exchange");
  query->add_option("--server", server, "host[:port]")->required();
  query->add_option("--timeout-ms", timeout_ms, "Reply timeout")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;
  }

  if (*run) {
    return guarded([&] {
      ScenarioConfig config = build_config(rf);
      ScenarioReport report = run_scenario(config);
      if (!rf.quiet) std::cout << report.text(config);
      else for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      return report.any_alarm() ? kExitAlarm : kExitOk;
    });
  }

  if (*calibrate) {
    return guarded([&] {
      cal.reference = cal_reference;
      for (const auto& p : cal_ntp) cal.ntp_traces.emplace_back(p);
      for (const auto& p : cal_beacons) cal.beacon_traces.emplace_back(p);
      for (auto ms : cal_windows_ms) cal.windows.push_back(Duration::milliseconds(ms));
      auto profiles = calibrate_traces(cal);
      for (const auto& p : profiles) {
        if (p.low_confidence()) {
          std::cerr << "warning: " << to_string(p.technology) << " profile is low-confidence ("
                    << p.sample_count << " samples per source)\n";
        }
      }
      if (cal_out == "-") write_profiles(std::cout, profiles);
      else write_profiles(std::filesystem::path(cal_out), profiles);
      return kExitOk;
    });
  }

  if (*synth) {
    return guarded([&] {
      sched.t_bias = Duration(t_bias_ns);
      sched.beta = Duration(beta_ns);
      if (no_hold) sched.hold_from = INT64_MAX;
      if (synth_hold_value) sched.hold_value = Duration(*synth_hold_value);
      if (sched.beta < Duration(0)) throw ConfigError("--beta-ns", "must be >= 0");
      if (sched.start_index < 1) throw ConfigError("--start-index", "must be >= 1");
      if (sched.hold_from < sched.start_index) throw ConfigError("--hold-from", "must be >= start index");
      auto clean = read_gnss_trace(std::filesystem::path(synth_in));
      write_gnss_trace(std::filesystem::path(synth_out), apply_attack(clean, sched));
      return kExitOk;
    });
  }

  if (*generate) {
    return guarded([&] {
      if (setup.updates < 1) throw ConfigError("--updates", "must be >= 1");
      setup.ntp_error_bound = Duration(ntp_err_ns);
      setup.beacon_error_bound = Duration(beacon_err_ns);
      setup.ntp_servers.clear();
      for (std::size_t i = 1; i <= n_servers; ++i) setup.ntp_servers.push_back("ntp-" + std::to_string(i));
      setup.access_points.clear();
      for (std::size_t i = 1; i <= n_aps; ++i) setup.access_points.push_back("ap-" + std::to_string(i));
      std::filesystem::path dir(gen_dir);
      std::filesystem::create_directories(dir);
      write_gnss_trace(dir / "gnss.csv", synth_gnss(setup));
      if (n_servers > 0) write_ntp_trace(dir / "ntp.csv", synth_ntp(setup));
      if (n_aps > 0) write_beacon_trace(dir / "beacons.csv", synth_beacons(setup));
      return kExitOk;
    });
  }

  if (*query) {
    return guarded([&] {
      SntpClient client;
      NtpExchange x = client.query(server, Duration::milliseconds(timeout_ms));
      std::cout << kNtpHeader << '\n';
      std::cout << x.server_id << ',' << x.t0.nanos() << ',' << x.t1.nanos() << ',' << x.t2.nanos()
                << ',' << x.t3.nanos() << '\n';
      std::cerr << "offset_ns=" << x.offset().nanos() << " round_trip_ns=" << x.round_trip().nanos()
                << '\n';
      return kExitOk;
    });
  }
  return kExitFailure;
}
