#include "timecheck/timebase.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace timecheck {

std::string_view to_string(Technology t) {
  switch (t) {
    case Technology::kGnss:
      return "gnss";
    case Technology::kNtp:
      return "ntp";
    case Technology::kWifiBeacon:
      return "wifi";
  }
  return "unknown";
}

std::optional<Technology> parse_technology(std::string_view s) {
  if (s == "gnss" || s == "gps") return Technology::kGnss;
  if (s == "ntp") return Technology::kNtp;
  if (s == "wifi" || s == "wifi_beacon" || s == "beacon") return Technology::kWifiBeacon;
  return std::nullopt;
}

std::optional<std::size_t> nearest_within(std::span<const Instant> rx, Instant anchor,
                                          Duration tolerance) {
  auto it = std::lower_bound(rx.begin(), rx.end(), anchor);
  std::optional<std::size_t> best;
  Duration best_dist;
  if (it != rx.begin()) {
    auto prev = std::prev(it);
    best = static_cast<std::size_t>(prev - rx.begin());
    best_dist = anchor - *prev;
  }
  if (it != rx.end()) {
    Duration d = *it - anchor;
    // Strictly closer only: ties stay with the earlier sample.
    if (!best || d < best_dist) {
      best = static_cast<std::size_t>(it - rx.begin());
      best_dist = d;
    }
  }
  if (!best || best_dist > tolerance) return std::nullopt;
  return best;
}

std::vector<TimeSample> align(std::span<const TimeSample> samples, Instant anchor,
                              Duration tolerance) {
  if (tolerance <= Duration(0)) {
    throw std::invalid_argument("align: tolerance must be positive");
  }
  std::map<std::string, std::vector<const TimeSample*>> by_source;
  for (const auto& s : samples) by_source[s.source_id].push_back(&s);

  std::vector<TimeSample> out;
  std::vector<Instant> rx;
  for (auto& [id, group] : by_source) {
    std::stable_sort(group.begin(), group.end(),
                     [](const auto* a, const auto* b) { return a->local_rx < b->local_rx; });
    rx.clear();
    for (const auto* s : group) rx.push_back(s->local_rx);
    if (auto idx = nearest_within(rx, anchor, tolerance)) out.push_back(*group[*idx]);
  }
  return out;
}

}  // namespace timecheck
