#include "timecheck/calibrate.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "timecheck/errors.hpp"

namespace timecheck {

namespace {

// Fills quantiles, counts, sample_count and epsilon from per-source errors.
void summarize(AccuracyProfile& p, const std::map<std::string, std::vector<Duration>>& errors) {
  std::int64_t min_count = 0;
  bool first = true;
  for (const auto& [id, errs] : errors) {
    auto n = static_cast<std::int64_t>(errs.size());
    p.per_source_counts[id] = n;
    if (first || n < min_count) min_count = n;
    first = false;
    if (errs.empty()) continue;
    Duration q = quantile99(errs);
    p.per_source_quantiles[id] = q;
    if (q > p.epsilon) p.epsilon = q;
  }
  p.sample_count = min_count;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::int64_t parse_int(std::string_view v, const std::string& where) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where, "expected integer, got '" + std::string(v) + "'");
  }
  return out;
}

}  // namespace

Duration quantile99(std::span<const Duration> errors) {
  if (errors.empty()) throw std::invalid_argument("quantile99: empty error list");
  std::vector<Duration> sorted;
  sorted.reserve(errors.size());
  for (Duration e : errors) sorted.push_back(abs(e));
  const std::size_t n = sorted.size();
  const std::size_t rank = (99 * n + 99) / 100;  // ceil(0.99 n)
  auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return *nth;
}

AccuracyProfile profile_ntp(std::span<const NtpExchange> exchanges,
                            std::span<const GnssUpdate> reference, Duration align_tolerance) {
  std::vector<Instant> ref_rx;
  ref_rx.reserve(reference.size());
  for (const auto& u : reference) ref_rx.push_back(u.local_rx);

  std::map<std::string, std::vector<Duration>> errors;
  std::size_t aligned = 0;
  for (const auto& x : exchanges) {
    auto& errs = errors[x.server_id];
    TimeSample s = to_sample(x);
    auto idx = nearest_within(ref_rx, s.local_rx, align_tolerance);
    if (!idx) continue;
    const auto& ref = reference[*idx];
    errs.push_back(abs(source_offset(s) - (ref.gnss_time - ref.local_rx)));
    ++aligned;
  }
  if (aligned == 0) throw std::invalid_argument("profile_ntp: no exchange aligns with the reference");

  AccuracyProfile p;
  p.technology = Technology::kNtp;
  summarize(p, errors);
  return p;
}

AccuracyProfile profile_wifi(std::span<const BeaconRecord> beacons,
                             std::span<const GnssUpdate> reference, Duration window) {
  AccuracyProfile p;
  p.technology = Technology::kWifiBeacon;
  p.window = window;

  const auto span = static_cast<std::size_t>(
      window_span_updates(window, nominal_update_interval(reference)));
  std::map<std::string, std::vector<Duration>> errors;
  for (auto& [bssid, group] : group_by_bssid(beacons)) {
    BeaconTrack track(std::move(group));
    auto& errs = errors[bssid];
    for (std::size_t i = 0; i + span < reference.size(); ++i) {
      const auto& start = reference[i];
      const auto& end = reference[i + span];
      ++p.windows_attempted;
      auto pair = track.pair(start.local_rx, end.local_rx);
      if (!pair) continue;
      ++p.windows_paired;
      Duration dt_ext = pair->end.ap_timestamp - pair->start.ap_timestamp;
      Duration dt_gnss = gnss_elapsed_between(start, end, pair->start.local_rx, pair->end.local_rx);
      errs.push_back(abs(dt_ext - dt_gnss));
    }
  }
  summarize(p, errors);
  return p;
}

std::vector<AccuracyProfile> builtin_profiles() {
  auto make = [](Technology t, std::optional<Duration> window, std::int64_t eps_ns) {
    AccuracyProfile p;
    p.technology = t;
    p.window = window;
    p.epsilon = Duration(eps_ns);
    return p;
  };
  return {
      make(Technology::kNtp, std::nullopt, 2'046'000),
      make(Technology::kWifiBeacon, Duration::milliseconds(1024), 46'064),
      make(Technology::kWifiBeacon, Duration::milliseconds(3072), 35'021),
      make(Technology::kWifiBeacon, Duration::milliseconds(5120), 23'942),
  };
}

std::vector<Duration> standard_windows() {
  return {kTimeUnit * 1000, kTimeUnit * 3000, kTimeUnit * 5000};
}

std::optional<AccuracyProfile> find_profile(std::span<const AccuracyProfile> profiles,
                                            Technology technology,
                                            std::optional<Duration> window) {
  const AccuracyProfile* fallback = nullptr;
  for (const auto& p : profiles) {
    if (p.technology != technology) continue;
    if (window && p.window == window) return p;
    if (!window && !p.window) return p;
    if (!p.window && !fallback) fallback = &p;
  }
  if (fallback) return *fallback;
  return std::nullopt;
}

void write_profiles(std::ostream& out, std::span<const AccuracyProfile> profiles) {
  bool first = true;
  for (const auto& p : profiles) {
    if (!first) out << '\n';
    first = false;
    out << "technology = " << to_string(p.technology) << '\n';
    if (p.window) {
      if (p.window->nanos() % 1'000'000 != 0) {
        throw std::invalid_argument("write_profiles: window is not a whole number of ms");
      }
      out << "window_ms = " << p.window->nanos() / 1'000'000 << '\n';
    }
    out << "epsilon_ns = " << p.epsilon.nanos() << '\n';
    out << "sample_count = " << p.sample_count << '\n';
    for (const auto& [id, q] : p.per_source_quantiles) {
      out << "source_quantile_ns." << id << " = " << q.nanos() << '\n';
    }
    if (p.windows_attempted > 0) {
      out << "windows_attempted = " << p.windows_attempted << '\n';
      out << "windows_paired = " << p.windows_paired << '\n';
    }
  }
}

void write_profiles(const std::filesystem::path& path, std::span<const AccuracyProfile> profiles) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_profiles(out, profiles);
}

std::vector<AccuracyProfile> read_profiles(std::istream& in) {
  std::vector<AccuracyProfile> out;
  std::optional<AccuracyProfile> cur;
  bool have_eps = false;
  std::size_t stanza_line = 0;

  auto finish = [&] {
    if (!cur) return;
    const std::string where = "profiles:" + std::to_string(stanza_line);
    if (!have_eps) throw ConfigError(where, "stanza missing epsilon_ns");
    if (cur->epsilon < Duration(0)) throw ConfigError(where, "epsilon_ns must be >= 0");
    if (cur->technology == Technology::kGnss) {
      throw ConfigError(where, "gnss is the checked technology, not a reference");
    }
    out.push_back(*cur);
    cur.reset();
    have_eps = false;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) {
      finish();
      continue;
    }
    if (view.front() == '#') continue;
    const std::string where = "profiles:" + std::to_string(line_no);
    auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where, "expected 'key = value'");
    std::string_view key = trim(view.substr(0, eq));
    std::string_view value = trim(view.substr(eq + 1));

    if (key == "technology") {
      finish();
      auto t = parse_technology(value);
      if (!t) throw ConfigError(where, "unknown technology '" + std::string(value) + "'");
      cur.emplace();
      cur->technology = *t;
      stanza_line = line_no;
      continue;
    }
    if (!cur) throw ConfigError(where, "stanza must start with 'technology'");
    if (key == "window_ms") {
      std::int64_t ms = parse_int(value, where);
      if (ms <= 0) throw ConfigError(where, "window_ms must be positive");
      cur->window = Duration::milliseconds(ms);
    } else if (key == "epsilon_ns") {
      cur->epsilon = Duration(parse_int(value, where));
      have_eps = true;
    } else if (key == "sample_count") {
      cur->sample_count = parse_int(value, where);
    } else if (key == "windows_attempted") {
      cur->windows_attempted = parse_int(value, where);
    } else if (key == "windows_paired") {
      cur->windows_paired = parse_int(value, where);
    } else if (key.starts_with("source_quantile_ns.")) {
      std::string id(key.substr(std::string_view("source_quantile_ns.").size()));
      cur->per_source_quantiles[id] = Duration(parse_int(value, where));
    } else {
      throw ConfigError(where, "unknown key '" + std::string(key) + "'");
    }
  }
  finish();
  return out;
}

std::vector<AccuracyProfile> read_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("profiles", "cannot open '" + path.string() + "'");
  return read_profiles(in);
}

const std::vector<TechnologyInfo>& technology_catalog() {
  static const std::vector<TechnologyInfo> catalog = {
      {"ntp", "four-timestamp exchange with an NTP server", std::nullopt,
       "path asymmetry; unauthenticated unless NTS/NTPsec is used", true},
      {"wifi-beacon", "802.11 beacon timestamp, 1 us resolution, 100 TU interval",
       Duration::microseconds(1), "beacons are unauthenticated and can be forged", true},
      {"cellular-ta", "timing advance against the serving base station, 3.69 us steps",
       Duration::nanoseconds(3690), "base stations may themselves be GNSS-disciplined", false},
      {"cellular-ntp", "NTP over a cellular data link", Duration::milliseconds(10),
       "radio idle transitions add latency; base stations may be GNSS-disciplined", false},
      {"lte-sib16", "SIB16 broadcast time with TA correction", Duration::nanoseconds(250),
       "base stations may themselves be GNSS-disciplined", false},
      {"5g-urllc", "low latency 5G links", std::nullopt,
       "little deployed infrastructure; base stations may be GNSS-disciplined", false},
      {"lora-rbs", "beacon-based reference broadcast synchronization", Duration::microseconds(1),
       "beacons can be forged", false},
      {"local-oscillator", "CPU time stamp counter or PMU registers", std::nullopt,
       "drifts with temperature and voltage (about 0.1 ppm at best)", false},
  };
  return catalog;
}

}  // namespace timecheck
