#include "timecheck/detect.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "timecheck/errors.hpp"

namespace timecheck {

std::string CheckMode::label() const {
  if (!is_relative()) return "absolute";
  if (window.nanos() % 1'000'000 == 0) {
    return "relative-" + std::to_string(window.nanos() / 1'000'000) + "ms";
  }
  return "relative-" + std::to_string(window.nanos()) + "ns";
}

Duration f_absolute(Instant t_ext, Instant t_gnss) { return abs(t_ext - t_gnss); }

Duration f_relative(Duration dt_ext, Duration dt_gnss) { return abs(dt_ext - dt_gnss); }

bool majority_pass(std::int64_t m, std::int64_t k, const Rational& bar) {
  return k > 0 && Rational(m, k) > bar;
}

namespace {

void check_bar(const Rational& bar) {
  if (bar < Rational(1, 2) || bar >= Rational(1)) {
    throw std::invalid_argument("vote bar must lie in [1/2, 1), got " + to_string(bar));
  }
}

}  // namespace

VoteResult vote(std::span<const Duration> f_values, Duration epsilon, const Rational& bar) {
  check_bar(bar);
  VoteResult r;
  r.k = static_cast<std::int64_t>(f_values.size());
  r.m = std::count_if(f_values.begin(), f_values.end(), [&](Duration f) { return f < epsilon; });
  r.pass = majority_pass(r.m, r.k, bar);
  return r;
}

FusionResult fuse_weighted(std::span<const FusionEntry> entries) {
  Rational g = 0;
  Rational weight_sum = 0;
  for (const auto& e : entries) {
    if (e.epsilon <= Duration(0)) throw ConfigError("epsilon", "must be positive for fusion");
    if (e.weight < 0) throw ConfigError("weight", "must be non-negative");
    weight_sum += e.weight;
    g += e.weight * e.f_ns / Rational(e.epsilon.nanos());
  }
  if (abs(weight_sum - 1) > Rational(1, 1'000'000'000)) {
    throw ConfigError("weight", "weights sum to " + to_string(weight_sum) + ", expected 1");
  }
  return {g, g < 1};
}

AggregatorState::AggregatorState(int q) : q_(q) {
  if (q < 1) throw std::invalid_argument("aggregator q must be >= 1");
}

AggregatorState aggregate(AggregatorState state, bool decision_negative) {
  state.recent_.push_back(decision_negative);
  while (state.recent_.size() > static_cast<std::size_t>(state.q_)) state.recent_.pop_front();
  state.alarm_ = state.recent_.size() == static_cast<std::size_t>(state.q_) &&
                 std::all_of(state.recent_.begin(), state.recent_.end(), [](bool b) { return b; });
  return state;
}

Duration TechnologyProfile::epsilon_for(const std::string& source_id) const {
  auto it = source_epsilon.find(source_id);
  return it == source_epsilon.end() ? epsilon : it->second;
}

std::string_view to_string(FinalState s) {
  switch (s) {
    case FinalState::kConsistent:
      return "CONSISTENT";
    case FinalState::kDiscrepant:
      return "DISCREPANT";
    case FinalState::kInsufficientData:
      return "INSUFFICIENT_DATA";
  }
  return "UNKNOWN";
}

namespace {

// Samples of one non-beacon source, indexed by local_rx.
struct SampleTrack {
  std::vector<TimeSample> samples;
  std::vector<Instant> rx;
};

struct TechnologyInput {
  const TechnologyProfile* profile = nullptr;
  std::vector<std::string> roster;
  std::map<std::string, SampleTrack> tracks;   // NTP and similar
  std::map<std::string, BeaconTrack> beacons;  // WiFi
};

Rational reduce(std::vector<Duration> values, Reduction how) {
  std::sort(values.begin(), values.end());
  switch (how) {
    case Reduction::kMax:
      return Rational(values.back().nanos());
    case Reduction::kMedian: {
      std::size_t n = values.size();
      if (n % 2 == 1) return Rational(values[n / 2].nanos());
      return Rational(values[n / 2 - 1].nanos() + values[n / 2].nanos(), 2);
    }
    case Reduction::kMean:
      break;
  }
  Rational sum = 0;
  for (Duration v : values) sum += v.nanos();
  return sum / static_cast<std::int64_t>(values.size());
}

std::vector<TechnologyInput> build_inputs(std::span<const TimeSample> sources,
                                          std::span<const TechnologyProfile> profiles,
                                          const EngineConfig& config) {
  std::vector<TechnologyInput> inputs;
  std::set<Technology> seen;
  for (const auto& p : profiles) {
    const std::string where = "profile." + std::string(to_string(p.technology));
    if (p.technology == Technology::kGnss) throw ConfigError(where, "gnss cannot check itself");
    if (!seen.insert(p.technology).second) throw ConfigError(where, "duplicate profile");
    if (p.epsilon <= Duration(0)) throw ConfigError(where + ".epsilon", "must be positive");
    for (const auto& [id, eps] : p.source_epsilon) {
      if (eps <= Duration(0)) throw ConfigError(where + ".epsilon." + id, "must be positive");
    }
    if (p.weight < 0) throw ConfigError(where + ".weight", "must be non-negative");
    if (p.technology == Technology::kWifiBeacon && !config.mode.is_relative()) {
      throw ConfigError(where, "beacon timestamps support relative checking only");
    }
    TechnologyInput in;
    in.profile = &p;
    inputs.push_back(std::move(in));
  }

  std::map<Technology, std::map<std::string, std::vector<TimeSample>>> grouped;
  for (const auto& s : sources) {
    if (s.technology == Technology::kGnss) continue;
    if (!seen.count(s.technology)) {
      throw ConfigError("profiles", "no profile for technology '" +
                                        std::string(to_string(s.technology)) + "'");
    }
    grouped[s.technology][s.source_id].push_back(s);
  }

  for (auto& in : inputs) {
    auto& by_source = grouped[in.profile->technology];
    if (in.profile->sources.empty()) {
      for (const auto& [id, v] : by_source) in.roster.push_back(id);
    } else {
      in.roster = in.profile->sources;
      std::sort(in.roster.begin(), in.roster.end());
      in.roster.erase(std::unique(in.roster.begin(), in.roster.end()), in.roster.end());
    }
    for (const auto& id : in.roster) {
      auto it = by_source.find(id);
      if (it == by_source.end()) continue;
      auto& samples = it->second;
      std::stable_sort(samples.begin(), samples.end(),
                       [](const auto& a, const auto& b) { return a.local_rx < b.local_rx; });
      if (in.profile->technology == Technology::kWifiBeacon) {
        std::vector<BeaconRecord> records;
        records.reserve(samples.size());
        for (const auto& s : samples) records.push_back(to_beacon(s));
        in.beacons.emplace(id, BeaconTrack(std::move(records)));
      } else {
        SampleTrack track;
        for (const auto& s : samples) track.rx.push_back(s.local_rx);
        track.samples = std::move(samples);
        in.tracks.emplace(id, std::move(track));
      }
    }
  }
  return inputs;
}

std::optional<Duration> absolute_f(const SampleTrack& track, const GnssUpdate& at,
                                   Duration tolerance) {
  auto idx = nearest_within(track.rx, at.local_rx, tolerance);
  if (!idx) return std::nullopt;
  const TimeSample& s = track.samples[*idx];
  // External clock carried from its reception to the GNSS update along the local clock.
  Instant t_ext = compensated_source_time(s) + (at.local_rx - s.local_rx);
  return f_absolute(t_ext, at.gnss_time);
}

std::optional<Duration> relative_f(const SampleTrack& track, const GnssUpdate& start,
                                   const GnssUpdate& end, Duration tolerance) {
  auto a = nearest_within(track.rx, start.local_rx, tolerance);
  auto b = nearest_within(track.rx, end.local_rx, tolerance);
  if (!a || !b || *b <= *a) return std::nullopt;
  const TimeSample& s1 = track.samples[*a];
  const TimeSample& s2 = track.samples[*b];
  Duration dt_ext = compensated_source_time(s2) - compensated_source_time(s1);
  return f_relative(dt_ext, gnss_elapsed_between(start, end, s1.local_rx, s2.local_rx));
}

std::optional<Duration> relative_f(const BeaconTrack& track, const GnssUpdate& start,
                                   const GnssUpdate& end) {
  auto pair = track.pair(start.local_rx, end.local_rx);
  if (!pair) return std::nullopt;
  Duration dt_ext = pair->end.ap_timestamp - pair->start.ap_timestamp;
  return f_relative(dt_ext,
                    gnss_elapsed_between(start, end, pair->start.local_rx, pair->end.local_rx));
}

TechnologyVerdict check_technology(const TechnologyInput& in, std::span<const GnssUpdate> gnss,
                                   std::size_t end_idx, std::size_t span,
                                   const EngineConfig& config) {
  TechnologyVerdict tv;
  tv.technology = in.profile->technology;
  const GnssUpdate& end = gnss[end_idx];
  std::vector<Duration> fs;
  for (const auto& id : in.roster) {
    SourceCheck check;
    if (config.mode.is_relative()) {
      const GnssUpdate& start = gnss[end_idx - span];
      if (auto it = in.beacons.find(id); it != in.beacons.end()) {
        check.f = relative_f(it->second, start, end);
      } else if (auto jt = in.tracks.find(id); jt != in.tracks.end()) {
        check.f = relative_f(jt->second, start, end, config.align_tolerance);
      }
    } else if (auto jt = in.tracks.find(id); jt != in.tracks.end()) {
      check.f = absolute_f(jt->second, end, config.align_tolerance);
    }
    if (check.f) {
      check.pass = *check.f < in.profile->epsilon_for(id);
      fs.push_back(*check.f);
      ++tv.vote.k;
      if (check.pass) ++tv.vote.m;
    }
    tv.per_source.emplace(id, check);
  }
  tv.vote.pass = majority_pass(tv.vote.m, tv.vote.k, config.vote_bar);
  if (tv.vote.k == 0) {
    tv.state = FinalState::kInsufficientData;
  } else {
    tv.state = tv.vote.pass ? FinalState::kConsistent : FinalState::kDiscrepant;
    tv.reduced_f = reduce(std::move(fs), config.reduction);
  }
  return tv;
}

void decide(Verdict& v, const std::vector<TechnologyInput>& inputs, const EngineConfig& config) {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < v.technologies.size(); ++i) {
    const auto& tv = v.technologies[i];
    if (tv.state == FinalState::kInsufficientData) continue;
    active.push_back(i);
    if (tv.vote.pass) ++v.tech_passing;
  }
  v.tech_active = static_cast<std::int64_t>(active.size());
  if (active.empty()) {
    v.final = FinalState::kInsufficientData;
    return;
  }
  if (active.size() == 1) {
    v.final = v.technologies[active.front()].state;
    return;
  }
  if (config.fusion == FusionPolicy::kMajorityTech) {
    v.final = majority_pass(v.tech_passing, v.tech_active, config.vote_bar)
                  ? FinalState::kConsistent
                  : FinalState::kDiscrepant;
    return;
  }
  Rational active_weight = 0;
  for (std::size_t i : active) active_weight += inputs[i].profile->weight;
  if (active_weight == 0) {
    v.final = FinalState::kInsufficientData;
    return;
  }
  std::vector<FusionEntry> entries;
  for (std::size_t i : active) {
    const auto& p = *inputs[i].profile;
    entries.emplace_back(*v.technologies[i].reduced_f, p.epsilon, p.weight / active_weight);
  }
  auto fused = fuse_weighted(entries);
  v.g_value = fused.g;
  v.final = fused.pass ? FinalState::kConsistent : FinalState::kDiscrepant;
}

}  // namespace

std::vector<Verdict> run_detection(std::span<const GnssUpdate> gnss,
                                   std::span<const TimeSample> sources,
                                   std::span<const TechnologyProfile> profiles,
                                   const EngineConfig& config) {
  if (config.q < 1) throw ConfigError("q", "must be >= 1");
  try {
    check_bar(config.vote_bar);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("vote_bar", e.what());
  }
  if (config.align_tolerance <= Duration(0)) throw ConfigError("align_tolerance", "must be positive");
  if (config.mode.is_relative() && config.mode.window <= Duration(0)) {
    throw ConfigError("window", "must be positive");
  }
  if (profiles.empty()) throw ConfigError("profiles", "no technology profiles");
  if (config.fusion == FusionPolicy::kWeighted) {
    Rational sum = 0;
    for (const auto& p : profiles) sum += p.weight;
    if (abs(sum - 1) > Rational(1, 1'000'000'000)) {
      throw ConfigError("weights", "sum to " + to_string(sum) + ", expected 1");
    }
  }
  for (std::size_t i = 1; i < gnss.size(); ++i) {
    if (gnss[i].local_rx <= gnss[i - 1].local_rx) {
      throw std::invalid_argument("run_detection: GNSS updates not ordered by local_rx");
    }
  }

  const auto inputs = build_inputs(sources, profiles, config);
  std::size_t span = 0;
  if (config.mode.is_relative()) {
    Duration interval = config.update_interval.value_or(nominal_update_interval(gnss));
    span = static_cast<std::size_t>(window_span_updates(config.mode.window, interval));
  }

  std::vector<Verdict> out;
  AggregatorState agg(config.q);
  for (std::size_t i = span; i < gnss.size(); ++i) {
    Verdict v;
    v.seq = gnss[i].seq;
    v.at = gnss[i].local_rx;
    for (const auto& in : inputs) v.technologies.push_back(check_technology(in, gnss, i, span, config));
    decide(v, inputs, config);
    if (v.final != FinalState::kInsufficientData) {
      agg = aggregate(std::move(agg), v.final == FinalState::kDiscrepant);
    }
    v.alarm = agg.alarm();
    out.push_back(std::move(v));
  }
  return out;
}

void write_verdict_csv(std::ostream& out, std::span<const Verdict> verdicts, const CheckMode& mode,
                       std::optional<Technology> technology) {
  out << kVerdictHeader << '\n';
  const std::string label = mode.label();
  for (const auto& v : verdicts) {
    if (!technology) {
      out << v.at.nanos() << ",fused," << label << ",\"[]\"," << v.tech_passing << ','
          << v.tech_active << ',';
      if (v.g_value) out << numerator_string(*v.g_value) << ',' << denominator_string(*v.g_value);
      else out << ',';
      out << ',' << to_string(v.final) << '\n';
      continue;
    }
    auto it = std::find_if(v.technologies.begin(), v.technologies.end(),
                           [&](const auto& tv) { return tv.technology == *technology; });
    if (it == v.technologies.end()) continue;
    nlohmann::json fs = nlohmann::json::array();
    for (const auto& [id, check] : it->per_source) {
      if (check.f) fs.push_back(check.f->nanos());
      else fs.push_back(nullptr);
    }
    // Single-technology runs report the overall decision on the technology row.
    const bool sole = v.technologies.size() == 1;
    out << v.at.nanos() << ',' << to_string(*technology) << ',' << label << ",\"" << fs.dump()
        << "\"," << it->vote.m << ',' << it->vote.k << ',';
    if (sole && v.g_value) out << numerator_string(*v.g_value) << ',' << denominator_string(*v.g_value);
    else out << ',';
    out << ',' << to_string(sole ? v.final : it->state) << '\n';
  }
}

}  // namespace timecheck
