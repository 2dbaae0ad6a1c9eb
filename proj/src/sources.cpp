#include "timecheck/sources.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

namespace timecheck {

TraceError::TraceError(std::size_t line, const std::string& what)
    : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
      line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::int64_t parse_int(std::string_view field, std::size_t line, std::string_view name) {
  std::int64_t v = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && field.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw TraceError(line, "field '" + std::string(name) + "': expected base-10 integer, got '" +
                               std::string(field) + "'");
  }
  return v;
}

// Calls row(fields, line_no) for every data line after validating the header.
template <typename RowFn>
void for_each_row(std::istream& in, std::string_view header, std::size_t columns, RowFn&& row) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    if (!have_header) {
      if (view != header) {
        throw TraceError(line_no, "expected header '" + std::string(header) + "', got '" +
                                      std::string(view) + "'");
      }
      have_header = true;
      continue;
    }
    auto fields = split_fields(view);
    if (fields.size() != columns) {
      throw TraceError(line_no, "expected " + std::to_string(columns) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    row(fields, line_no);
  }
  if (!have_header) throw TraceError(0, "empty trace: missing header '" + std::string(header) + "'");
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError(0, "cannot open trace '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::vector<GnssUpdate> read_gnss_trace(std::istream& in) {
  std::vector<GnssUpdate> out;
  for_each_row(in, kGnssHeader, 3, [&](const auto& f, std::size_t ln) {
    GnssUpdate u{parse_int(f[0], ln, "seq"), Instant(parse_int(f[1], ln, "gnss_time_ns")),
                 Instant(parse_int(f[2], ln, "local_rx_ns"))};
    if (!out.empty()) {
      if (u.seq <= out.back().seq) throw TraceError(ln, "seq does not strictly increase");
      if (u.local_rx <= out.back().local_rx) throw TraceError(ln, "local_rx out of order");
    }
    out.push_back(u);
  });
  return out;
}

std::vector<BeaconRecord> read_beacon_trace(std::istream& in) {
  std::vector<BeaconRecord> out;
  std::map<std::string, std::size_t, std::less<>> last;
  for_each_row(in, kBeaconHeader, 3, [&](const auto& f, std::size_t ln) {
    if (f[0].empty()) throw TraceError(ln, "empty bssid");
    std::int64_t ts_us = parse_int(f[1], ln, "ap_timestamp_us");
    if (ts_us < 0) throw TraceError(ln, "negative ap_timestamp_us");
    BeaconRecord b{std::string(f[0]), Duration::microseconds(ts_us),
                   Instant(parse_int(f[2], ln, "local_rx_ns"))};
    if (auto it = last.find(b.bssid); it != last.end()) {
      const auto& prev = out[it->second];
      if (b.local_rx <= prev.local_rx) throw TraceError(ln, "local_rx out of order for " + b.bssid);
      if (b.ap_timestamp < prev.ap_timestamp) {
        throw TraceError(ln, "ap_timestamp decreases for " + b.bssid);
      }
    }
    last[b.bssid] = out.size();
    out.push_back(std::move(b));
  });
  return out;
}

std::vector<NtpExchange> read_ntp_trace(std::istream& in) {
  std::vector<NtpExchange> out;
  std::map<std::string, Instant, std::less<>> last_rx;
  for_each_row(in, kNtpHeader, 5, [&](const auto& f, std::size_t ln) {
    if (f[0].empty()) throw TraceError(ln, "empty server_id");
    NtpExchange x{std::string(f[0]), Instant(parse_int(f[1], ln, "t0_ns")),
                  Instant(parse_int(f[2], ln, "t1_ns")), Instant(parse_int(f[3], ln, "t2_ns")),
                  Instant(parse_int(f[4], ln, "t3_ns"))};
    if (x.t3 < x.t0) throw TraceError(ln, "t3 precedes t0");
    if (x.t2 < x.t1) throw TraceError(ln, "t2 precedes t1");
    if (x.round_trip() < Duration(0)) throw TraceError(ln, "negative round-trip delay");
    if (auto it = last_rx.find(x.server_id); it != last_rx.end() && x.t3 <= it->second) {
      throw TraceError(ln, "local_rx (t3) out of order for " + x.server_id);
    }
    last_rx[x.server_id] = x.t3;
    out.push_back(std::move(x));
  });
  return out;
}

std::vector<GnssUpdate> read_gnss_trace(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_gnss_trace(in);
}

std::vector<BeaconRecord> read_beacon_trace(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_beacon_trace(in);
}

std::vector<NtpExchange> read_ntp_trace(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_ntp_trace(in);
}

void write_gnss_trace(std::ostream& out, std::span<const GnssUpdate> updates) {
  out << kGnssHeader << '\n';
  for (const auto& u : updates) {
    out << u.seq << ',' << u.gnss_time.nanos() << ',' << u.local_rx.nanos() << '\n';
  }
}

void write_beacon_trace(std::ostream& out, std::span<const BeaconRecord> beacons) {
  out << kBeaconHeader << '\n';
  for (const auto& b : beacons) {
    out << b.bssid << ',' << b.ap_timestamp.nanos() / 1000 << ',' << b.local_rx.nanos() << '\n';
  }
}

void write_ntp_trace(std::ostream& out, std::span<const NtpExchange> exchanges) {
  out << kNtpHeader << '\n';
  for (const auto& x : exchanges) {
    out << x.server_id << ',' << x.t0.nanos() << ',' << x.t1.nanos() << ',' << x.t2.nanos() << ','
        << x.t3.nanos() << '\n';
  }
}

void write_gnss_trace(const std::filesystem::path& path, std::span<const GnssUpdate> updates) {
  auto out = open_output(path);
  write_gnss_trace(out, updates);
}

void write_beacon_trace(const std::filesystem::path& path, std::span<const BeaconRecord> beacons) {
  auto out = open_output(path);
  write_beacon_trace(out, beacons);
}

void write_ntp_trace(const std::filesystem::path& path, std::span<const NtpExchange> exchanges) {
  auto out = open_output(path);
  write_ntp_trace(out, exchanges);
}

TimeSample to_sample(const GnssUpdate& u) {
  return TimeSample{kGnssSourceId, Technology::kGnss, u.gnss_time, u.local_rx, Duration(0)};
}

TimeSample to_sample(const BeaconRecord& b) {
  return TimeSample{b.bssid, Technology::kWifiBeacon, Instant(b.ap_timestamp.nanos()), b.local_rx,
                    Duration(0)};
}

TimeSample to_sample(const NtpExchange& x) {
  return TimeSample{x.server_id, Technology::kNtp, x.t2, x.t3,
                    Duration(x.round_trip().nanos() / 2)};
}

BeaconRecord to_beacon(const TimeSample& s) {
  return BeaconRecord{s.source_id, Duration(s.source_time.nanos()), s.local_rx};
}

std::vector<TimeSample> replay_trace(const std::filesystem::path& path, TraceKind kind) {
  std::vector<TimeSample> out;
  switch (kind) {
    case TraceKind::kGnss:
      for (const auto& u : read_gnss_trace(path)) out.push_back(to_sample(u));
      break;
    case TraceKind::kBeacon:
      for (const auto& b : read_beacon_trace(path)) out.push_back(to_sample(b));
      break;
    case TraceKind::kNtp:
      for (const auto& x : read_ntp_trace(path)) out.push_back(to_sample(x));
      break;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TimeSample& a, const TimeSample& b) { return a.local_rx < b.local_rx; });
  return out;
}

BeaconTrack::BeaconTrack(std::vector<BeaconRecord> beacons) : beacons_(std::move(beacons)) {
  rx_.reserve(beacons_.size());
  for (const auto& b : beacons_) {
    if (b.bssid != beacons_.front().bssid) {
      throw std::invalid_argument("pair_beacons: beacons from more than one bssid");
    }
    if (!rx_.empty() && b.local_rx < rx_.back()) {
      throw std::invalid_argument("pair_beacons: beacons not sorted by local_rx");
    }
    rx_.push_back(b.local_rx);
  }
  if (!beacons_.empty()) bssid_ = beacons_.front().bssid;
}

std::optional<BeaconPair> BeaconTrack::pair(Instant window_start, Instant window_end) const {
  // Strict bound: a beacon exactly 100 TU away does not qualify.
  const Duration tol = kBeaconEdgeLimit - Duration(1);
  auto first = nearest_within(rx_, window_start, tol);
  auto last = nearest_within(rx_, window_end, tol);
  if (!first || !last || *last <= *first) return std::nullopt;
  return BeaconPair{beacons_[*first], beacons_[*last]};
}

std::optional<BeaconPair> pair_beacons(std::span<const BeaconRecord> beacons, Instant window_start,
                                       Instant window_end) {
  return BeaconTrack({beacons.begin(), beacons.end()}).pair(window_start, window_end);
}

std::map<std::string, std::vector<BeaconRecord>> group_by_bssid(
    std::span<const BeaconRecord> beacons) {
  std::map<std::string, std::vector<BeaconRecord>> out;
  for (const auto& b : beacons) out[b.bssid].push_back(b);
  for (auto& [id, group] : out) {
    std::stable_sort(group.begin(), group.end(),
                     [](const auto& a, const auto& b) { return a.local_rx < b.local_rx; });
  }
  return out;
}

Duration nominal_update_interval(std::span<const GnssUpdate> updates) {
  if (updates.size() < 2) return Duration::seconds(1);
  std::vector<Duration> gaps;
  gaps.reserve(updates.size() - 1);
  for (std::size_t i = 1; i < updates.size(); ++i) {
    gaps.push_back(updates[i].local_rx - updates[i - 1].local_rx);
  }
  auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  return *mid;
}

std::int64_t window_span_updates(Duration window, Duration update_interval) {
  if (window <= Duration(0) || update_interval <= Duration(0)) {
    throw std::invalid_argument("window and update interval must be positive");
  }
  std::int64_t w = (window.nanos() + update_interval.nanos() / 2) / update_interval.nanos();
  return w < 1 ? 1 : w;
}

Duration gnss_elapsed_between(const GnssUpdate& start, const GnssUpdate& end, Instant rx_start,
                              Instant rx_end) {
  return (end.gnss_time - start.gnss_time) + (rx_end - end.local_rx) - (rx_start - start.local_rx);
}

}  // namespace timecheck
