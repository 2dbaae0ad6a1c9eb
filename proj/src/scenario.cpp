#include "timecheck/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <future>
#include <istream>
#include <set>
#include <sstream>

#include "timecheck/errors.hpp"

namespace timecheck {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::int64_t to_int(std::string_view v, const std::string& where) {
  v = trim(v);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where, "expected integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    auto comma = v.find(',', start);
    auto item = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Technology to_technology(std::string_view v, const std::string& where) {
  auto t = parse_technology(trim(v));
  if (!t || *t == Technology::kGnss) {
    throw ConfigError(where, "expected ntp or wifi, got '" + std::string(v) + "'");
  }
  return *t;
}

AttackSchedule& attack_of(ScenarioConfig& c) {
  if (!c.attack) {
    c.attack.emplace();
    c.attack->t_bias = Duration(0);
    c.attack->beta = Duration(0);
  }
  return *c.attack;
}

std::string ms_label(Duration d) {
  if (d.nanos() % 1'000'000 == 0) return std::to_string(d.nanos() / 1'000'000) + " ms";
  return std::to_string(d.nanos()) + " ns";
}

Rational equal_share(std::size_t n) { return Rational(1, static_cast<std::int64_t>(n)); }

}  // namespace

void set_config_value(ScenarioConfig& c, std::string_view key, std::string_view value,
                      const std::string& where) {
  key = trim(key);
  value = trim(value);
  const std::string field = where.empty() ? std::string(key) : where;

  if (key == "gnss_trace") {
    c.gnss_trace = std::string(value);
  } else if (key == "beacon_trace") {
    for (auto item : split_list(value)) c.beacon_traces.emplace_back(std::string(item));
  } else if (key == "ntp_trace") {
    for (auto item : split_list(value)) c.ntp_traces.emplace_back(std::string(item));
  } else if (key == "mode") {
    if (value == "absolute") c.mode = CheckMode::Kind::kAbsolute;
    else if (value == "relative") c.mode = CheckMode::Kind::kRelative;
    else throw ConfigError(field, "expected absolute or relative, got '" + std::string(value) + "'");
  } else if (key == "window_ms") {
    for (auto item : split_list(value)) {
      std::int64_t ms = to_int(item, field);
      if (ms <= 0) throw ConfigError(field, "window must be positive");
      c.windows.push_back(Duration::milliseconds(ms));
    }
  } else if (key == "profiles") {
    if (value.empty()) throw ConfigError(field, "expected builtin or a path");
    c.profiles = std::string(value);
  } else if (key == "q") {
    std::int64_t q = to_int(value, field);
    if (q < 1 || q > 1'000'000) throw ConfigError(field, "must be in [1, 1000000]");
    c.q = static_cast<int>(q);
  } else if (key == "fusion") {
    if (value == "majority") c.fusion = FusionPolicy::kMajorityTech;
    else if (value == "weighted") c.fusion = FusionPolicy::kWeighted;
    else throw ConfigError(field, "expected majority or weighted, got '" + std::string(value) + "'");
  } else if (key.starts_with("weight.")) {
    Technology t = to_technology(key.substr(7), field);
    try {
      c.weights[t] = parse_rational(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field, e.what());
    }
  } else if (key == "reduction") {
    if (value == "mean") c.reduction = Reduction::kMean;
    else if (value == "median") c.reduction = Reduction::kMedian;
    else if (value == "max") c.reduction = Reduction::kMax;
    else throw ConfigError(field, "expected mean, median or max");
  } else if (key == "vote_bar") {
    try {
      c.vote_bar = parse_rational(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field, e.what());
    }
  } else if (key == "align_tolerance_ns") {
    c.align_tolerance = Duration(to_int(value, field));
  } else if (key.starts_with("epsilon_ns.")) {
    std::string id(key.substr(11));
    if (id.empty()) throw ConfigError(field, "missing source id");
    c.source_epsilon[id] = Duration(to_int(value, field));
  } else if (key == "attack") {
    if (value == "none") c.attack.reset();
    else if (value == "reference") c.attack = AttackSchedule::reference_ramp();
    else throw ConfigError(field, "expected none or reference");
  } else if (key == "attack.t_bias_ns") {
    attack_of(c).t_bias = Duration(to_int(value, field));
  } else if (key == "attack.beta_ns") {
    attack_of(c).beta = Duration(to_int(value, field));
  } else if (key == "attack.hold_from") {
    attack_of(c).hold_from = to_int(value, field);
  } else if (key == "attack.start_index") {
    attack_of(c).start_index = to_int(value, field);
  } else if (key == "attack.hold_value_ns") {
    attack_of(c).hold_value = Duration(to_int(value, field));
  } else if (key == "out_dir") {
    c.out_dir = std::string(value);
  } else {
    throw ConfigError(field, "unknown key '" + std::string(key) + "'");
  }
}

ScenarioConfig parse_scenario_config(std::istream& in, const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto eq = view.find('=');
    std::string_view key = trim(view.substr(0, eq));
    const std::string where = std::string(key) + " (line " + std::to_string(line_no) + ")";
    if (eq == std::string_view::npos) throw ConfigError(where, "expected 'key = value'");
    set_config_value(c, key, view.substr(eq + 1), where);
  }
  if (!base_dir.empty()) {
    auto resolve = [&](std::filesystem::path& p) {
      if (!p.empty() && p.is_relative()) p = base_dir / p;
    };
    resolve(c.gnss_trace);
    for (auto& p : c.beacon_traces) resolve(p);
    for (auto& p : c.ntp_traces) resolve(p);
    if (c.profiles != "builtin") {
      std::filesystem::path p = c.profiles;
      resolve(p);
      c.profiles = p.string();
    }
  }
  return c;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  return parse_scenario_config(in, path.parent_path());
}

namespace {

// Settings that do not depend on which traces are named.
void validate_settings(const ScenarioConfig& c) {
  if (c.q < 1) throw ConfigError("q", "must be >= 1");
  if (c.vote_bar < Rational(1, 2) || c.vote_bar >= 1) throw ConfigError("vote_bar", "must lie in [1/2, 1)");
  if (c.align_tolerance <= Duration(0)) throw ConfigError("align_tolerance_ns", "must be positive");
  for (const auto& [id, eps] : c.source_epsilon) {
    if (eps <= Duration(0)) throw ConfigError("epsilon_ns." + id, "must be positive");
  }
  if (c.fusion == FusionPolicy::kWeighted) {
    if (c.weights.empty()) throw ConfigError("weight", "required when fusion = weighted");
    Rational sum = 0;
    for (const auto& [t, w] : c.weights) {
      if (w < 0) throw ConfigError("weight." + std::string(to_string(t)), "must be non-negative");
      sum += w;
    }
    if (abs(sum - 1) > Rational(1, 1'000'000'000)) {
      throw ConfigError("weight", "weights sum to " + to_string(sum) + ", expected 1");
    }
  } else if (!c.weights.empty()) {
    throw ConfigError("weight." + std::string(to_string(c.weights.begin()->first)),
                      "weights require fusion = weighted");
  }
  if (c.attack) {
    const auto& a = *c.attack;
    if (a.beta < Duration(0)) throw ConfigError("attack.beta_ns", "must be >= 0");
    if (a.start_index < 1) throw ConfigError("attack.start_index", "must be >= 1");
    if (a.hold_from < a.start_index) throw ConfigError("attack.hold_from", "must be >= start_index");
  }
}

}  // namespace

void validate(const ScenarioConfig& c) {
  if (c.gnss_trace.empty()) throw ConfigError("gnss_trace", "required");
  if (c.beacon_traces.empty() && c.ntp_traces.empty()) {
    throw ConfigError("ntp_trace", "at least one ntp_trace or beacon_trace is required");
  }
  validate_settings(c);
  if (c.fusion == FusionPolicy::kWeighted) {
    for (const auto& [t, w] : c.weights) {
      const bool has_traces = t == Technology::kNtp ? !c.ntp_traces.empty() : !c.beacon_traces.empty();
      if (!has_traces) throw ConfigError("weight." + std::string(to_string(t)), "no traces for this technology");
    }
    if (!c.ntp_traces.empty() && !c.weights.count(Technology::kNtp)) {
      throw ConfigError("weight.ntp", "missing");
    }
    if (!c.beacon_traces.empty() && !c.weights.count(Technology::kWifiBeacon)) {
      throw ConfigError("weight.wifi", "missing");
    }
  }
}

bool ScenarioReport::any_alarm() const {
  return std::any_of(runs.begin(), runs.end(),
                     [](const RunSummary& r) { return !r.alarm_timeline.empty(); });
}

std::string ScenarioReport::text(const ScenarioConfig& config) const {
  std::ostringstream os;
  os << "time offset validation report\n";
  os << "mode: " << (config.mode == CheckMode::Kind::kRelative ? "relative" : "absolute")
     << "  fusion: " << (config.fusion == FusionPolicy::kWeighted ? "weighted" : "majority")
     << "  q: " << config.q << "  vote bar: " << to_string(config.vote_bar) << '\n';
  os << "gnss updates: " << gnss_updates;
  if (config.attack) {
    const auto& a = *config.attack;
    os << "  attack: t_bias=" << a.t_bias.nanos() << "ns beta=" << a.beta.nanos()
       << "ns start_index=" << a.start_index;
    if (a.hold_from != INT64_MAX) os << " hold_from=" << a.hold_from;
    if (a.hold_value) os << " hold_value=" << a.hold_value->nanos() << "ns";
  } else {
    os << "  attack: none";
  }
  os << '\n';
  for (const auto& w : warnings) os << "warning: " << w << '\n';

  for (const auto& r : runs) {
    os << '\n' << '[' << r.mode.label() << "] technologies:";
    for (const auto& [t, n] : r.technologies) os << ' ' << to_string(t) << '(' << n << ')';
    os << '\n';
    os << "  verdicts: " << r.verdicts.size() << "  consistent: " << r.consistent
       << "  discrepant: " << r.discrepant << "  insufficient: " << r.insufficient << '\n';
    os << "  first detection: ";
    if (r.first_detection_seq) {
      os << "seq " << *r.first_detection_seq << " (at_ns " << r.first_detection_at->nanos() << ")\n";
    } else {
      os << "none\n";
    }
    os << "  alarm timeline:";
    if (r.alarm_timeline.empty()) os << " none";
    for (const auto& [a, b] : r.alarm_timeline) os << ' ' << a << '-' << b;
    os << '\n';
    os << "  files:";
    for (const auto& f : r.csv_files) os << ' ' << f.filename().string();
    os << '\n';
  }
  return os.str();
}

ScenarioData load_scenario_data(const ScenarioConfig& config, std::vector<std::string>& warnings) {
  auto gnss = std::async(std::launch::async, [p = config.gnss_trace] { return read_gnss_trace(p); });
  std::vector<std::future<std::vector<BeaconRecord>>> beacon_jobs;
  for (const auto& p : config.beacon_traces) {
    beacon_jobs.push_back(std::async(std::launch::async, [p] { return read_beacon_trace(p); }));
  }
  std::vector<std::future<std::vector<NtpExchange>>> ntp_jobs;
  for (const auto& p : config.ntp_traces) {
    ntp_jobs.push_back(std::async(std::launch::async, [p] { return read_ntp_trace(p); }));
  }

  ScenarioData data;
  // Collected in config order so warnings and merged data are deterministic.
  for (std::size_t i = 0; i < beacon_jobs.size(); ++i) {
    try {
      auto v = beacon_jobs[i].get();
      data.beacons.insert(data.beacons.end(), v.begin(), v.end());
    } catch (const std::exception& e) {
      warnings.push_back("beacon trace '" + config.beacon_traces[i].string() + "' dropped: " + e.what());
    }
  }
  for (std::size_t i = 0; i < ntp_jobs.size(); ++i) {
    try {
      auto v = ntp_jobs[i].get();
      data.ntp.insert(data.ntp.end(), v.begin(), v.end());
    } catch (const std::exception& e) {
      warnings.push_back("ntp trace '" + config.ntp_traces[i].string() + "' dropped: " + e.what());
    }
  }
  try {
    data.gnss = gnss.get();
  } catch (const TraceError& e) {
    throw TraceError(e.line(), "gnss trace '" + config.gnss_trace.string() + "': " + e.what());
  }
  return data;
}

ScenarioReport run_scenario(const ScenarioConfig& config) {
  validate(config);
  std::vector<std::string> warnings;
  ScenarioData data = load_scenario_data(config, warnings);
  return run_scenario(config, std::move(data), std::move(warnings));
}

ScenarioReport run_scenario(const ScenarioConfig& config, ScenarioData data,
                            std::vector<std::string> warnings) {
  validate_settings(config);
  const bool relative = config.mode == CheckMode::Kind::kRelative;
  if (!relative && !data.beacons.empty()) {
    warnings.push_back("beacon traces ignored: beacon timestamps support relative checking only");
    data.beacons.clear();
  }
  if (data.beacons.empty() && data.ntp.empty()) {
    throw TraceError(0, "no usable external time source");
  }
  if (data.gnss.empty()) throw TraceError(0, "gnss trace has no updates");
  if (config.attack) data.gnss = apply_attack(data.gnss, *config.attack);

  const auto accuracy = config.profiles == "builtin" ? builtin_profiles()
                                                     : read_profiles(std::filesystem::path(config.profiles));

  std::vector<Technology> techs;
  std::vector<TimeSample> samples;
  std::map<Technology, std::set<std::string>> source_ids;
  if (!data.ntp.empty()) {
    techs.push_back(Technology::kNtp);
    for (const auto& x : data.ntp) {
      samples.push_back(to_sample(x));
      source_ids[Technology::kNtp].insert(x.server_id);
    }
  }
  if (!data.beacons.empty()) {
    techs.push_back(Technology::kWifiBeacon);
    for (const auto& b : data.beacons) {
      samples.push_back(to_sample(b));
      source_ids[Technology::kWifiBeacon].insert(b.bssid);
    }
  }

  // Weights of technologies that survived loading, renormalized if needed.
  std::map<Technology, Rational> weights;
  if (config.fusion == FusionPolicy::kWeighted) {
    Rational sum = 0;
    for (Technology t : techs) {
      auto it = config.weights.find(t);
      if (it == config.weights.end()) throw ConfigError("weight." + std::string(to_string(t)), "missing");
      weights[t] = it->second;
      sum += weights[t];
    }
    if (sum == 0) {
      for (Technology t : techs) weights[t] = equal_share(techs.size());
      warnings.push_back("remaining technologies have zero weight; using equal weights");
    } else if (abs(sum - 1) > Rational(1, 1'000'000'000)) {
      for (auto& [t, w] : weights) w /= sum;
      warnings.push_back("weights renormalized over the remaining technologies");
    }
  }

  std::vector<std::optional<Duration>> windows;
  if (relative) {
    auto list = config.windows.empty() ? standard_windows() : config.windows;
    windows.assign(list.begin(), list.end());
  } else {
    windows.push_back(std::nullopt);
  }

  std::filesystem::create_directories(config.out_dir);
  ScenarioReport report;
  report.gnss_updates = static_cast<std::int64_t>(data.gnss.size());

  for (const auto& window : windows) {
    EngineConfig engine;
    engine.mode = window ? CheckMode::relative(*window) : CheckMode::absolute();
    engine.q = config.q;
    engine.fusion = config.fusion;
    engine.reduction = config.reduction;
    engine.vote_bar = config.vote_bar;
    engine.align_tolerance = config.align_tolerance;

    std::vector<TechnologyProfile> profiles;
    RunSummary run;
    run.mode = engine.mode;
    for (Technology t : techs) {
      auto ap = find_profile(accuracy, t, window);
      if (!ap) {
        throw ConfigError(window ? "window_ms" : "profiles",
                          "no " + std::string(to_string(t)) + " profile" +
                              (window ? " for window " + ms_label(*window) : std::string()) +
                              " in '" + config.profiles + "'");
      }
      if (ap->low_confidence()) {
        warnings.push_back(std::string(to_string(t)) + " profile" +
                           (window ? " (" + ms_label(*window) + ")" : std::string()) +
                           " is low-confidence: " + std::to_string(ap->sample_count) + " samples");
      }
      TechnologyProfile tp;
      tp.technology = t;
      tp.epsilon = ap->epsilon;
      if (config.fusion == FusionPolicy::kWeighted) tp.weight = weights.at(t);
      for (const auto& [id, eps] : config.source_epsilon) {
        if (source_ids[t].count(id)) tp.source_epsilon[id] = eps;
      }
      profiles.push_back(std::move(tp));
      run.technologies.emplace_back(t, source_ids[t].size());
    }

    run.verdicts = run_detection(data.gnss, samples, profiles, engine);

    bool in_alarm = false;
    for (const auto& v : run.verdicts) {
      switch (v.final) {
        case FinalState::kConsistent:
          ++run.consistent;
          break;
        case FinalState::kDiscrepant:
          ++run.discrepant;
          if (!run.first_detection_seq) {
            run.first_detection_seq = v.seq;
            run.first_detection_at = v.at;
          }
          break;
        case FinalState::kInsufficientData:
          ++run.insufficient;
          break;
      }
      if (v.alarm && !in_alarm) run.alarm_timeline.emplace_back(v.seq, v.seq);
      if (v.alarm) run.alarm_timeline.back().second = v.seq;
      in_alarm = v.alarm;
    }

    const std::string label = engine.mode.label();
    auto write = [&](std::optional<Technology> t) {
      auto path = config.out_dir / ("verdicts_" + std::string(t ? to_string(*t) : "fused") + "_" +
                                    label + ".csv");
      std::ofstream out(path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
      write_verdict_csv(out, run.verdicts, engine.mode, t);
      run.csv_files.push_back(path);
    };
    for (Technology t : techs) write(t);
    if (techs.size() > 1) write(std::nullopt);

    report.runs.push_back(std::move(run));
  }
  report.warnings = std::move(warnings);

  std::ofstream out(config.out_dir / "report.txt", std::ios::binary);
  out << report.text(config);
  return report;
}

std::vector<AccuracyProfile> calibrate_traces(const CalibrationRequest& request) {
  if (request.builtin) return builtin_profiles();
  if (request.reference.empty()) throw ConfigError("reference", "required unless --builtin");
  if (request.ntp_traces.empty() && request.beacon_traces.empty()) {
    throw ConfigError("traces", "at least one ntp or beacon trace is required");
  }
  const auto reference = read_gnss_trace(request.reference);
  std::vector<AccuracyProfile> out;
  if (!request.ntp_traces.empty()) {
    std::vector<NtpExchange> exchanges;
    for (const auto& p : request.ntp_traces) {
      auto v = read_ntp_trace(p);
      exchanges.insert(exchanges.end(), v.begin(), v.end());
    }
    out.push_back(profile_ntp(exchanges, reference, request.align_tolerance));
  }
  if (!request.beacon_traces.empty()) {
    std::vector<BeaconRecord> beacons;
    for (const auto& p : request.beacon_traces) {
      auto v = read_beacon_trace(p);
      beacons.insert(beacons.end(), v.begin(), v.end());
    }
    auto windows = request.windows.empty() ? standard_windows() : request.windows;
    for (Duration w : windows) out.push_back(profile_wifi(beacons, reference, w));
  }
  return out;
}

}  // namespace timecheck
