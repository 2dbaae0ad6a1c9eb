#pragma once

#include <compare>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace timecheck {

/// Signed span of time in integer nanoseconds.
class Duration {
 public:
  constexpr Duration() = default;
  constexpr explicit Duration(std::int64_t nanos) : nanos_(nanos) {}

  static constexpr Duration nanoseconds(std::int64_t n) { return Duration(n); }
  static constexpr Duration microseconds(std::int64_t us) { return Duration(us * 1'000); }
  static constexpr Duration milliseconds(std::int64_t ms) { return Duration(ms * 1'000'000); }
  static constexpr Duration seconds(std::int64_t s) { return Duration(s * 1'000'000'000); }

  constexpr std::int64_t nanos() const { return nanos_; }

  constexpr Duration operator-() const { return Duration(-nanos_); }
  constexpr Duration operator+(Duration o) const { return Duration(nanos_ + o.nanos_); }
  constexpr Duration operator-(Duration o) const { return Duration(nanos_ - o.nanos_); }
  constexpr Duration operator*(std::int64_t k) const { return Duration(nanos_ * k); }
  constexpr Duration& operator+=(Duration o) {
    nanos_ += o.nanos_;
    return *this;
  }
  constexpr Duration& operator-=(Duration o) {
    nanos_ -= o.nanos_;
    return *this;
  }

  constexpr auto operator<=>(const Duration&) const = default;

 private:
  std::int64_t nanos_ = 0;
};

constexpr Duration abs(Duration d) { return d.nanos() < 0 ? -d : d; }

/// Point on a nanosecond time axis. The epoch is whatever the producing
/// clock uses; only differences between instants of one axis are meaningful.
class Instant {
 public:
  constexpr Instant() = default;
  constexpr explicit Instant(std::int64_t nanos) : nanos_(nanos) {}

  constexpr std::int64_t nanos() const { return nanos_; }

  constexpr Instant operator+(Duration d) const { return Instant(nanos_ + d.nanos()); }
  constexpr Instant operator-(Duration d) const { return Instant(nanos_ - d.nanos()); }
  constexpr Duration operator-(Instant o) const { return Duration(nanos_ - o.nanos_); }

  constexpr auto operator<=>(const Instant&) const = default;

 private:
  std::int64_t nanos_ = 0;
};

enum class Technology { kGnss, kNtp, kWifiBeacon };

std::string_view to_string(Technology t);
std::optional<Technology> parse_technology(std::string_view s);

/// One observation from one time source, stamped with the local clock.
struct TimeSample {
  std::string source_id;
  Technology technology = Technology::kGnss;
  Instant source_time;  // the source's claimed time (or beacon counter)
  Instant local_rx;     // local monotonic clock at reception
  Duration delay_comp;  // delay compensation to add to source_time

  bool operator==(const TimeSample&) const = default;
};

/// source_time + delay_comp.
constexpr Instant compensated_source_time(const TimeSample& s) {
  return s.source_time + s.delay_comp;
}

/// Source clock minus local clock at reception, after delay compensation.
constexpr Duration source_offset(const TimeSample& s) {
  return compensated_source_time(s) - s.local_rx;
}

/// Half the GNSS update interval at 1 Hz.
inline constexpr Duration kDefaultAlignTolerance = Duration::milliseconds(500);

/// Index of the element of `rx` (sorted ascending) nearest to `anchor` and
/// no farther than `tolerance`. Equidistant candidates resolve to the
/// earlier one.
std::optional<std::size_t> nearest_within(std::span<const Instant> rx, Instant anchor,
                                          Duration tolerance);

/// For each source_id, the sample whose local_rx is nearest to `anchor`
/// within `tolerance`. Sources with no such sample are absent from the
/// result. Output is ordered by source_id.
///
/// Samples must be sorted by local_rx within each source. Throws
/// std::invalid_argument when tolerance is not positive.
std::vector<TimeSample> align(std::span<const TimeSample> samples, Instant anchor,
                              Duration tolerance = kDefaultAlignTolerance);

}  // namespace timecheck
