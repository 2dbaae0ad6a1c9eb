#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "timecheck/sources.hpp"

using namespace timecheck;

namespace {

const std::int64_t kTu = kTimeUnit.nanos();

std::vector<BeaconRecord> beacons_at(std::initializer_list<std::int64_t> rx_tu) {
  std::vector<BeaconRecord> out;
  std::int64_t i = 0;
  for (auto t : rx_tu) out.push_back({"ap", Duration::microseconds(1'000 * i++), Instant(t * kTu)});
  return out;
}

template <typename Fn>
std::size_t error_line(const std::string& text, Fn read) {
  std::istringstream in(text);
  try {
    read(in);
  } catch (const TraceError& e) {
    return e.line();
  }
  return SIZE_MAX;
}

}  // namespace

TEST(GnssTrace, ParsesThreeUpdates) {
  std::istringstream in(
      "seq,gnss_time_ns,local_rx_ns\n"
      "1,1000000000,10\n"
      "2,2000000000,1000000010\n"
      "3,3000000000,2000000010\n");
  auto us = read_gnss_trace(in);
  ASSERT_EQ(us.size(), 3u);
  for (std::int64_t i = 0; i < 3; ++i) EXPECT_EQ(us[static_cast<std::size_t>(i)].seq, i + 1);
  EXPECT_EQ(us[2].gnss_time, Instant(3'000'000'000));
}

TEST(GnssTrace, ErrorsCarryLineNumbers) {
  auto read = [](std::istream& in) { read_gnss_trace(in); };
  EXPECT_EQ(error_line("seq,gnss_time_ns,local_rx_ns\n1,5,6\n2,x,7\n", read), 3u);
  EXPECT_EQ(error_line("seq,gnss_time_ns,local_rx_ns\n1,5,6\n1,6,7\n", read), 3u);
  EXPECT_EQ(error_line("seq,gnss_time_ns,local_rx_ns\n1,5\n", read), 2u);
  EXPECT_EQ(error_line("seq,gnss,rx\n", read), 1u);
  EXPECT_EQ(error_line("", read), 0u);
}

TEST(NtpTrace, FourTimestampArithmetic) {
  std::istringstream in("server_id,t0_ns,t1_ns,t2_ns,t3_ns\ns,0,5000000,5000000,10000000\n");
  auto xs = read_ntp_trace(in);
  ASSERT_EQ(xs.size(), 1u);
  EXPECT_EQ(xs[0].offset(), Duration(0));
  EXPECT_EQ(xs[0].round_trip(), Duration::milliseconds(10));
  TimeSample s = to_sample(xs[0]);
  EXPECT_EQ(s.delay_comp, Duration::milliseconds(5));
  EXPECT_EQ(source_offset(s), Duration(0));
}

TEST(NtpTrace, HalfRoundTripCompensation) {
  NtpExchange x{"s", Instant(0), Instant(7'000'000), Instant(7'000'000), Instant(8'000'000)};
  TimeSample s = to_sample(x);
  EXPECT_EQ(s.delay_comp, Duration::milliseconds(4));
  EXPECT_EQ(compensated_source_time(s), s.source_time + Duration::milliseconds(4));
  EXPECT_EQ(source_offset(s), x.offset());
}

TEST(NtpTrace, RejectsInconsistentTimestamps) {
  auto read = [](std::istream& in) { read_ntp_trace(in); };
  EXPECT_EQ(error_line("server_id,t0_ns,t1_ns,t2_ns,t3_ns\ns,10,5,6,9\n", read), 2u);
  EXPECT_EQ(error_line("server_id,t0_ns,t1_ns,t2_ns,t3_ns\ns,0,6,5,9\n", read), 2u);
}

TEST(BeaconTrace, MicrosecondConversion) {
  std::istringstream in("bssid,ap_timestamp_us,local_rx_ns\naa:bb,102400,5\n");
  auto bs = read_beacon_trace(in);
  ASSERT_EQ(bs.size(), 1u);
  EXPECT_EQ(bs[0].ap_timestamp.nanos(), 102'400'000);
}

TEST(BeaconTrace, CounterMustNotDecrease) {
  auto read = [](std::istream& in) { read_beacon_trace(in); };
  EXPECT_EQ(error_line("bssid,ap_timestamp_us,local_rx_ns\na,10,1\nb,1,2\na,9,3\n", read), 4u);
  EXPECT_EQ(error_line("bssid,ap_timestamp_us,local_rx_ns\na,-1,1\n", read), 2u);
}

TEST(Traces, WriteReadRoundTrip) {
  std::vector<GnssUpdate> g{{1, Instant(10), Instant(20)}, {2, Instant(1'000'000'010), Instant(1'000'000'020)}};
  std::vector<BeaconRecord> b{{"ap", Duration::microseconds(3), Instant(5)}};
  std::vector<NtpExchange> n{{"s", Instant(1), Instant(2), Instant(3), Instant(4)}};
  std::stringstream gs, bs, ns;
  write_gnss_trace(gs, g);
  write_beacon_trace(bs, b);
  write_ntp_trace(ns, n);
  EXPECT_EQ(read_gnss_trace(gs), g);
  EXPECT_EQ(read_beacon_trace(bs), b);
  EXPECT_EQ(read_ntp_trace(ns), n);
}

TEST(Traces, ReplayIsDeterministic) {
  auto path = std::filesystem::temp_directory_path() / "timecheck_replay_beacons.csv";
  std::vector<BeaconRecord> b{{"x", Duration::microseconds(9), Instant(30)},
                              {"y", Duration::microseconds(3), Instant(10)},
                              {"x", Duration::microseconds(10), Instant(40)}};
  write_beacon_trace(path, b);
  auto first = replay_trace(path, TraceKind::kBeacon);
  auto second = replay_trace(path, TraceKind::kBeacon);
  EXPECT_EQ(first, second);
  ASSERT_EQ(first.size(), 3u);
  EXPECT_EQ(first[0].source_id, "y");
  EXPECT_EQ(to_beacon(first[1]), b[0]);
  std::filesystem::remove(path);
}

TEST(PairBeacons, ExactlyAtEdges) {
  auto bs = beacons_at({0, 100, 200, 300});
  auto p = pair_beacons(bs, Instant(100 * kTu), Instant(300 * kTu));
  ASSERT_TRUE(p);
  EXPECT_EQ(p->start, bs[1]);
  EXPECT_EQ(p->end, bs[3]);
}

TEST(PairBeacons, TooFarFromStartEdge) {
  auto bs = beacons_at({0, 1000});
  EXPECT_FALSE(pair_beacons(bs, Instant(150 * kTu), Instant(1000 * kTu)));
}

TEST(PairBeacons, HundredTuIsOutside) {
  auto bs = beacons_at({0, 1000});
  EXPECT_FALSE(pair_beacons(bs, Instant(100 * kTu), Instant(1000 * kTu)));
  EXPECT_TRUE(pair_beacons(bs, Instant(100 * kTu - 1), Instant(1000 * kTu)));
}

TEST(PairBeacons, TieGoesToEarlier) {
  auto bs = beacons_at({450, 550, 1000});
  auto p = pair_beacons(bs, Instant(500 * kTu), Instant(1000 * kTu));
  ASSERT_TRUE(p);
  EXPECT_EQ(p->start, bs[0]);
}

// Exhaustive over small layouts: beacons on a 10-TU grid within [0, 60] TU,
// edges on a 5-TU grid.
TEST(PairBeacons, MatchesExhaustiveOracle) {
  std::size_t checked = 0;
  for (unsigned mask = 1; mask < (1u << 7); ++mask) {
    std::vector<BeaconRecord> bs;
    for (int slot = 0; slot < 7; ++slot) {
      if (mask & (1u << slot)) {
        bs.push_back({"ap", Duration::microseconds(slot), Instant(slot * 50 * kTu)});
      }
    }
    for (int s = -4; s <= 70; ++s) {
      for (int e = s; e <= 70; ++e) {
        Instant start(s * 5 * kTu), end(e * 5 * kTu);
        auto got = pair_beacons(bs, start, end);
        auto i1 = oracle::nearest_beacon(bs, start);
        auto i2 = oracle::nearest_beacon(bs, end);
        const bool expect = i1 && i2 && *i2 > *i1;
        ASSERT_EQ(got.has_value(), expect) << "mask " << mask << " s " << s << " e " << e;
        if (got) {
          ASSERT_EQ(got->start, bs[*i1]);
          ASSERT_EQ(got->end, bs[*i2]);
        }
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 100'000u);
}

TEST(BeaconTrack, RejectsMixedAccessPoints) {
  std::vector<BeaconRecord> bs{{"a", Duration(0), Instant(0)}, {"b", Duration(0), Instant(1)}};
  EXPECT_THROW(BeaconTrack{bs}, std::invalid_argument);
}

TEST(GnssHelpers, WindowSpans) {
  const Duration tau = Duration::seconds(1);
  EXPECT_EQ(window_span_updates(Duration::milliseconds(1024), tau), 1);
  EXPECT_EQ(window_span_updates(Duration::milliseconds(3072), tau), 3);
  EXPECT_EQ(window_span_updates(Duration::milliseconds(5120), tau), 5);
  EXPECT_EQ(window_span_updates(Duration::milliseconds(100), tau), 1);
}

TEST(GnssHelpers, ElapsedBetweenBeacons) {
  GnssUpdate a{1, Instant(1'000'000'000), Instant(0)};
  GnssUpdate b{2, Instant(2'000'000'500), Instant(1'000'000'000)};
  // Beacons received 1 ms after the first update and 2 ms after the second.
  Duration dt = gnss_elapsed_between(a, b, Instant(1'000'000), Instant(1'002'000'000));
  EXPECT_EQ(dt, Duration(1'000'000'500 + 1'000'000));
}
