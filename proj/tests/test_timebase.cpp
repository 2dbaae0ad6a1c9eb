#include <gtest/gtest.h>

#include "timecheck/rational.hpp"
#include "timecheck/timebase.hpp"

using namespace timecheck;

namespace {

const Instant kAnchor(1'000'000'000'000);

TimeSample at(const std::string& id, Instant rx) {
  return {id, Technology::kNtp, rx + Duration::seconds(5), rx, Duration(0)};
}

}  // namespace

TEST(Duration, UnitFactories) {
  EXPECT_EQ(Duration::microseconds(102'400).nanos(), 102'400'000);
  EXPECT_EQ(Duration::milliseconds(3).nanos(), 3'000'000);
  EXPECT_EQ(Duration::seconds(2).nanos(), 2'000'000'000);
  EXPECT_EQ(abs(Duration(-7)), Duration(7));
}

TEST(Instant, DifferenceRoundTrip) {
  Instant a(123'456'789), b(-987'654'321);
  EXPECT_EQ(b + (a - b), a);
  EXPECT_EQ((a + Duration(5)) - Duration(5), a);
}

TEST(Technology, NamesRoundTrip) {
  for (auto t : {Technology::kGnss, Technology::kNtp, Technology::kWifiBeacon}) {
    EXPECT_EQ(parse_technology(to_string(t)), t);
  }
  EXPECT_EQ(parse_technology("beacon"), Technology::kWifiBeacon);
  EXPECT_FALSE(parse_technology("lora"));
}

TEST(CompensatedTime, AddsDelay) {
  TimeSample s{"x", Technology::kNtp, Instant(1'000), Instant(0), Duration(0)};
  EXPECT_EQ(compensated_source_time(s), Instant(1'000));
  s.delay_comp = Duration::milliseconds(3);
  EXPECT_EQ(compensated_source_time(s), Instant(1'000) + Duration::milliseconds(3));
  EXPECT_EQ(source_offset(s), Duration(1'000) + Duration::milliseconds(3));
}

TEST(Align, NearestWithinTolerance) {
  std::vector<TimeSample> xs{at("a", kAnchor - Duration::milliseconds(1)),
                             at("a", kAnchor + Duration::milliseconds(2))};
  auto out = align(xs, kAnchor, Duration::milliseconds(5));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].local_rx, kAnchor - Duration::milliseconds(1));
}

TEST(Align, EquidistantPicksEarlier) {
  std::vector<TimeSample> xs{at("a", kAnchor + Duration::milliseconds(1)),
                             at("a", kAnchor - Duration::milliseconds(1))};
  auto out = align(xs, kAnchor, Duration::milliseconds(5));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].local_rx, kAnchor - Duration::milliseconds(1));
}

TEST(Align, OutsideToleranceIsEmpty) {
  std::vector<TimeSample> xs{at("a", kAnchor + Duration::milliseconds(200))};
  EXPECT_TRUE(align(xs, kAnchor, Duration::milliseconds(100)).empty());
}

TEST(Align, ToleranceBoundIsInclusive) {
  std::vector<TimeSample> xs{at("a", kAnchor + Duration::milliseconds(100))};
  EXPECT_EQ(align(xs, kAnchor, Duration::milliseconds(100)).size(), 1u);
}

TEST(Align, SilentSourceDropsOut) {
  std::vector<TimeSample> xs{at("b", kAnchor), at("a", kAnchor + Duration(10)),
                             at("c", kAnchor + Duration::seconds(3))};
  auto out = align(xs, kAnchor);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].source_id, "a");
  EXPECT_EQ(out[1].source_id, "b");
}

TEST(Align, RejectsNonPositiveTolerance) {
  std::vector<TimeSample> xs{at("a", kAnchor)};
  EXPECT_THROW(align(xs, kAnchor, Duration(0)), std::invalid_argument);
}

TEST(Rational, Parsing) {
  EXPECT_EQ(parse_rational("3/5"), Rational(3, 5));
  EXPECT_EQ(parse_rational("0.6"), Rational(3, 5));
  EXPECT_EQ(parse_rational("1"), Rational(1));
  EXPECT_EQ(parse_rational("-2.25"), Rational(-9, 4));
  EXPECT_THROW(parse_rational("abc"), std::invalid_argument);
  EXPECT_THROW(parse_rational("1/0"), std::invalid_argument);
}
