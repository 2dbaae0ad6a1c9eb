// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "properties.hpp"
#include "timecheck/attack.hpp"
#include "timecheck/calibrate.hpp"
#include "timecheck/scenario.hpp"
#include "timecheck/simulate.hpp"

using namespace timecheck;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail << what;
    ok = ok && cond;
  }
};

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("timecheck_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string opt(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : "none"; }

const std::int64_t kEpsNtp = 2'046'000;
const std::int64_t kEpsWifi[] = {46'064, 35'021, 23'942};
const std::int64_t kSpans[] = {1, 3, 5};

void criterion1(Check& c) {
  auto ps = builtin_profiles();
  auto ntp = find_profile(ps, Technology::kNtp, std::nullopt);
  c.expect(ntp && ntp->epsilon == Duration(kEpsNtp), "ntp epsilon");
  auto windows = standard_windows();
  const std::int64_t ms[] = {1024, 3072, 5120};
  c.expect(windows.size() == 3, "window count");
  for (std::size_t i = 0; i < 3 && i < windows.size(); ++i) {
    c.expect(windows[i] == Duration::milliseconds(ms[i]), "window " + std::to_string(ms[i]));
    auto w = find_profile(ps, Technology::kWifiBeacon, windows[i]);
    c.expect(w && w->epsilon == Duration(kEpsWifi[i]), "wifi epsilon " + std::to_string(ms[i]));
  }
  // The shipped file form must carry the same numbers.
  std::stringstream io;
  write_profiles(io, ps);
  auto back = read_profiles(io);
  c.expect(back.size() == ps.size(), "file round trip size");
  for (std::size_t i = 0; i < back.size() && i < ps.size(); ++i) {
    c.expect(back[i].epsilon == ps[i].epsilon && back[i].window == ps[i].window, "file round trip");
  }
  c.detail << "ntp=" << kEpsNtp << "ns wifi=46064/35021/23942ns";
}

void criterion2(Check& c) {
  const std::int64_t n_max = 1'000'000;
  AttackSchedule held = AttackSchedule::reference_ramp();
  AttackSchedule open = held;
  open.hold_from = INT64_MAX;
  for (const auto* s : {&held, &open}) {
    auto of = oracle::ramp_by_recurrence(n_max, *s);
    std::int64_t mismatches = 0;
    for (std::int64_t n = 1; n <= n_max; ++n) {
      mismatches += offset_at(n, *s).nanos() != of[static_cast<std::size_t>(n)];
    }
    c.expect(mismatches == 0, std::to_string(mismatches) + " mismatches");
  }
  c.expect(offset_at(1, held) == Duration(5'000), "of(1)");
  c.expect(offset_at(2, held) == Duration(5'055), "of(2)");
  c.detail << "n=1..1e6 held and unheld; of(1)=5000ns of(2)=5055ns of(3492)="
           << offset_at(3492, held).nanos() << "ns";
}

void criterion3(Check& c) {
  SyntheticSetup s;
  s.updates = 4000;
  ScenarioData d;
  d.gnss = synth_gnss(s);
  d.ntp = synth_ntp(s);
  ScenarioConfig cfg;
  cfg.attack = AttackSchedule::reference_ramp();
  cfg.out_dir = scratch("c3");
  auto report = run_scenario(cfg, d);
  auto of = oracle::ramp_by_recurrence(s.updates, *cfg.attack);
  auto expect = oracle::absolute_onset(of, kEpsNtp);
  auto got = report.runs.at(0).first_detection_seq;
  c.expect(expect.has_value() && got == expect, "onset mismatch");
  c.detail << "onset=" << opt(got) << " oracle=" << opt(expect);
}

void criterion4(Check& c) {
  SyntheticSetup s;
  s.updates = 4000;
  const AttackSchedule ramp = AttackSchedule::reference_ramp();
  auto of = oracle::ramp_by_recurrence(s.updates, ramp);

  ScenarioData wifi;
  wifi.gnss = synth_gnss(s);
  wifi.beacons = synth_beacons(s);
  ScenarioConfig rel;
  rel.mode = CheckMode::Kind::kRelative;
  rel.attack = ramp;
  rel.out_dir = scratch("c4_rel");
  auto rep = run_scenario(rel, wifi);
  c.expect(rep.runs.size() == 3, "expected three windows");

  std::optional<std::int64_t> onset[3];
  for (std::size_t i = 0; i < 3 && i < rep.runs.size(); ++i) {
    onset[i] = rep.runs[i].first_detection_seq;
    auto expect = oracle::relative_onset(of, kSpans[i], kEpsWifi[i]);
    c.expect(expect.has_value() && onset[i] == expect, "window " + std::to_string(i) + " onset");
    c.detail << rep.runs[i].mode.label() << " onset=" << opt(onset[i]) << " oracle=" << opt(expect)
             << "; ";
    // Once a whole window lies in the held region the check is clean again.
    for (const auto& v : rep.runs[i].verdicts) {
      if (v.seq - kSpans[i] >= ramp.hold_from) {
        c.expect(v.final == FinalState::kConsistent,
                 "relative verdict at seq " + std::to_string(v.seq) + " not consistent");
      }
    }
  }
  c.expect(onset[0] && onset[1] && onset[2] && *onset[2] < *onset[1] && *onset[1] < *onset[0],
           "ordering 5120 < 3072 < 1024 violated");

  ScenarioData ntp;
  ntp.gnss = synth_gnss(s);
  ntp.ntp = synth_ntp(s);
  ScenarioConfig abs_cfg;
  abs_cfg.attack = ramp;
  abs_cfg.out_dir = scratch("c4_abs");
  auto abs_rep = run_scenario(abs_cfg, ntp);
  std::int64_t held_checked = 0;
  for (const auto& v : abs_rep.runs.at(0).verdicts) {
    if (v.seq >= ramp.hold_from) {
      ++held_checked;
      c.expect(v.final == FinalState::kDiscrepant,
               "absolute verdict at seq " + std::to_string(v.seq) + " not discrepant");
    }
  }
  c.expect(held_checked > 0, "no held updates");
  c.detail << "held region: relative CONSISTENT, absolute ntp DISCREPANT over " << held_checked
           << " updates";
}

void criterion5(Check& c) {
  SyntheticSetup s;
  s.updates = 10'000;
  s.seed = 20'241;
  s.ntp_error_bound = Duration(kEpsNtp / 2);
  // Elapsed beacon error is the difference of two per-beacon errors plus
  // microsecond truncation of each counter, so |err| < 2 * 5 us + 1 us,
  // inside half the tightest window threshold.
  s.beacon_error_bound = Duration::microseconds(5);
  ScenarioData d;
  d.gnss = synth_gnss(s);
  d.ntp = synth_ntp(s);
  d.beacons = synth_beacons(s);

  std::int64_t discrepant = 0, verdicts = 0;
  ScenarioConfig abs_cfg;
  abs_cfg.out_dir = scratch("c5_abs");
  for (const auto& r : run_scenario(abs_cfg, d).runs) {
    discrepant += r.discrepant;
    verdicts += r.consistent + r.discrepant + r.insufficient;
  }
  ScenarioConfig rel;
  rel.mode = CheckMode::Kind::kRelative;
  rel.out_dir = scratch("c5_rel");
  for (const auto& r : run_scenario(rel, d).runs) {
    discrepant += r.discrepant;
    verdicts += r.consistent + r.discrepant + r.insufficient;
    for (const auto& v : r.verdicts) {
      for (const auto& t : v.technologies) {
        if (t.state == FinalState::kDiscrepant) ++discrepant;
      }
    }
  }
  c.expect(discrepant == 0, "false alarms");
  c.detail << "updates=10000 verdicts=" << verdicts << " discrepant=" << discrepant;
}

void criterion6(Check& c) {
  auto outcomes = props::all(0xC0FFEE, 1000);
  int cases = 0;
  for (const auto& o : outcomes) {
    cases += o.cases;
    c.expect(o.ok() && o.cases >= 1000, o.name + ": " + o.first_failure);
  }
  c.detail << outcomes.size() << " suites, " << cases << " cases";
}

void criterion7(Check& c) {
  auto dir = scratch("c7");
  SyntheticSetup s;
  s.updates = 1500;
  s.ntp_error_bound = Duration(800'000);
  s.beacon_error_bound = Duration::microseconds(8);
  write_gnss_trace(dir / "gnss.csv", synth_gnss(s));
  write_ntp_trace(dir / "ntp.csv", synth_ntp(s));
  write_beacon_trace(dir / "beacons.csv", synth_beacons(s));

  std::size_t files = 0;
  for (auto kind : {CheckMode::Kind::kAbsolute, CheckMode::Kind::kRelative}) {
    for (auto fusion : {FusionPolicy::kMajorityTech, FusionPolicy::kWeighted}) {
      ScenarioConfig cfg;
      cfg.gnss_trace = dir / "gnss.csv";
      cfg.ntp_traces = {dir / "ntp.csv"};
      cfg.beacon_traces = {dir / "beacons.csv"};
      cfg.mode = kind;
      cfg.fusion = fusion;
      if (fusion == FusionPolicy::kWeighted) {
        cfg.weights = {{Technology::kNtp, Rational(3, 5)}, {Technology::kWifiBeacon, Rational(2, 5)}};
      }
      cfg.attack = AttackSchedule::reference_ramp();
      cfg.q = 2;
      cfg.out_dir = dir / "a";
      fs::remove_all(cfg.out_dir);
      auto a = run_scenario(cfg);
      cfg.out_dir = dir / "b";
      fs::remove_all(cfg.out_dir);
      auto b = run_scenario(cfg);
      for (std::size_t r = 0; r < a.runs.size(); ++r) {
        for (std::size_t f = 0; f < a.runs[r].csv_files.size(); ++f) {
          ++files;
          c.expect(slurp(a.runs[r].csv_files[f]) == slurp(b.runs[r].csv_files[f]),
                   a.runs[r].csv_files[f].filename().string() + " differs");
        }
      }
      c.expect(slurp(dir / "a" / "report.txt") == slurp(dir / "b" / "report.txt"), "report differs");
    }
  }
  c.expect(files > 0, "no csv files");
  c.detail << files << " csv pairs compared";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<void(Check&)> body;
  };
  const Criterion criteria[] = {
      {1, "threshold constants", 1, criterion1},
      {2, "attack ramp matches recurrence", 5, criterion2},
      {3, "ntp absolute detection onset", 10, criterion3},
      {4, "wifi relative onset ordering and held offset", 30, criterion4},
      {5, "no false alarms on clean traces", 30, criterion5},
      {6, "property suites", 60, criterion6},
      {7, "byte-identical reruns", 60, criterion7},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("threw: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs < cr.budget_s, " over time budget");
    failed += !c.ok;
    std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << cr.id << ": " << cr.title << " ("
              << static_cast<long long>(secs * 1000) << " ms) " << c.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
