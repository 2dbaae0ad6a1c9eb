#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timecheck/rational.hpp"
#include "timecheck/sources.hpp"
#include "timecheck/timebase.hpp"

namespace timecheck {

/// Absolute checking compares instantaneous clock readings; relative
/// checking compares time elapsed over a window.
struct CheckMode {
  enum class Kind { kAbsolute, kRelative };

  Kind kind = Kind::kAbsolute;
  Duration window;  // relative only

  static CheckMode absolute() { return {}; }
  static CheckMode relative(Duration window) { return {Kind::kRelative, window}; }

  bool is_relative() const { return kind == Kind::kRelative; }
  /// "absolute" or "relative-<ms>ms".
  std::string label() const;
};

/// |t_ext - t_gnss|
Duration f_absolute(Instant t_ext, Instant t_gnss);
/// |dt_ext - dt_gnss|
Duration f_relative(Duration dt_ext, Duration dt_gnss);

struct VoteResult {
  std::int64_t m = 0;  // sources with f < epsilon
  std::int64_t k = 0;  // sources voting
  bool pass = false;   // m/k > bar; false when k == 0

  Rational ratio() const { return k == 0 ? Rational(0) : Rational(m, k); }
};

/// True iff k > 0 and m/k > bar.
bool majority_pass(std::int64_t m, std::int64_t k, const Rational& bar);

/// Counts f < epsilon (strict) and tests m/k > bar (strict). An empty list
/// yields k == 0 and no pass; callers treat that as insufficient data.
/// Throws std::invalid_argument unless 1/2 <= bar < 1.
VoteResult vote(std::span<const Duration> f_values, Duration epsilon,
                const Rational& bar = Rational(1, 2));

struct FusionEntry {
  Rational f_ns;
  Duration epsilon;
  Rational weight;

  FusionEntry(Rational f, Duration eps, Rational w)
      : f_ns(std::move(f)), epsilon(eps), weight(std::move(w)) {}
  FusionEntry(Duration f, Duration eps, Rational w)
      : f_ns(f.nanos()), epsilon(eps), weight(std::move(w)) {}
};

struct FusionResult {
  Rational g;
  bool pass = false;  // g < 1
};

/// g = sum(w_i * f_i / eps_i), exact. Throws ConfigError when an epsilon is
/// not positive, a weight is negative, or the weights do not sum to 1
/// within 1e-9.
FusionResult fuse_weighted(std::span<const FusionEntry> entries);

/// Sliding record of the last q non-deferred decisions. The alarm is raised
/// exactly when all q most recent decisions were negative.
class AggregatorState {
 public:
  explicit AggregatorState(int q = 1);

  int q() const { return q_; }
  bool alarm() const { return alarm_; }
  const std::deque<bool>& recent_negative() const { return recent_; }

 private:
  friend AggregatorState aggregate(AggregatorState state, bool decision_negative);

  int q_;
  std::deque<bool> recent_;
  bool alarm_ = false;
};

AggregatorState aggregate(AggregatorState state, bool decision_negative);

/// Engine-side description of one external time technology.
struct TechnologyProfile {
  Technology technology = Technology::kNtp;
  Duration epsilon;
  Rational weight{1};
  // Roster; when empty, every source seen in the data takes part.
  std::vector<std::string> sources;
  std::map<std::string, Duration> source_epsilon;

  Duration epsilon_for(const std::string& source_id) const;
};

enum class FinalState { kConsistent, kDiscrepant, kInsufficientData };
std::string_view to_string(FinalState s);

enum class FusionPolicy { kMajorityTech, kWeighted };
/// How a technology's per-source f values collapse into one fusion input.
enum class Reduction { kMean, kMedian, kMax };

struct SourceCheck {
  std::optional<Duration> f;  // absent: no aligned sample / no beacon pair
  bool pass = false;
};

struct TechnologyVerdict {
  Technology technology = Technology::kNtp;
  std::map<std::string, SourceCheck> per_source;
  VoteResult vote;
  FinalState state = FinalState::kInsufficientData;
  std::optional<Rational> reduced_f;  // fusion input, ns
};

struct Verdict {
  std::int64_t seq = 0;  // triggering GNSS update
  Instant at;            // its local_rx
  std::vector<TechnologyVerdict> technologies;
  // Technologies with data / passing; the cross-technology vote.
  std::int64_t tech_active = 0;
  std::int64_t tech_passing = 0;
  std::optional<Rational> g_value;  // weighted fusion over >1 technology
  FinalState final = FinalState::kInsufficientData;
  bool alarm = false;  // aggregator state after this verdict
};

struct EngineConfig {
  CheckMode mode;
  int q = 1;
  FusionPolicy fusion = FusionPolicy::kMajorityTech;
  Reduction reduction = Reduction::kMean;
  Rational vote_bar{1, 2};
  Duration align_tolerance = kDefaultAlignTolerance;
  // GNSS update spacing used to size relative windows; derived from the
  // trace when absent.
  std::optional<Duration> update_interval;
};

/// Runs the decision pipeline over a GNSS trace.
///
/// Absolute mode yields one verdict per GNSS update. Relative mode yields
/// one verdict per window-end update, the window starting
/// window_span_updates() updates earlier. Each technology votes over its
/// sources; with more than one active technology, the final decision is
/// either a vote across technologies or the weighted fusion (weights
/// renormalized over the active technologies). Verdicts without data do
/// not feed the aggregator.
///
/// Throws ConfigError for inconsistent profiles or configuration.
std::vector<Verdict> run_detection(std::span<const GnssUpdate> gnss,
                                   std::span<const TimeSample> sources,
                                   std::span<const TechnologyProfile> profiles,
                                   const EngineConfig& config);

inline constexpr const char* kVerdictHeader =
    "at_ns,technology,mode,f_ns_per_source,m,k,g_num,g_den,final";

/// One row per verdict. With `technology` set, rows carry that
/// technology's votes (f values ordered by source id, null where missing);
/// without it, rows carry the cross-technology decision under the
/// technology name "fused".
void write_verdict_csv(std::ostream& out, std::span<const Verdict> verdicts, const CheckMode& mode,
                       std::optional<Technology> technology);

}  // namespace timecheck
