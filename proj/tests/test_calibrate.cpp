#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "timecheck/calibrate.hpp"
#include "timecheck/errors.hpp"
#include "timecheck/simulate.hpp"

using namespace timecheck;

TEST(Quantile99, UniformRanks) {
  std::vector<Duration> xs;
  for (int i = 1; i <= 100; ++i) xs.push_back(Duration::milliseconds(i));
  EXPECT_EQ(quantile99(xs), Duration::milliseconds(99));
}

TEST(Quantile99, SingleElement) {
  std::vector<Duration> xs{Duration::microseconds(7)};
  EXPECT_EQ(quantile99(xs), Duration::microseconds(7));
}

TEST(Quantile99, ThousandRandomValues) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::int64_t> d(-1'000'000, 1'000'000);
  std::vector<Duration> xs(1000);
  for (auto& x : xs) x = Duration(d(rng));
  EXPECT_EQ(quantile99(xs), oracle::quantile99_by_sort(xs));
}

TEST(Quantile99, EmptyThrows) {
  std::vector<Duration> xs;
  EXPECT_THROW(quantile99(xs), std::invalid_argument);
}

TEST(Builtin, ShippedThresholds) {
  auto ps = builtin_profiles();
  auto ntp = find_profile(ps, Technology::kNtp, std::nullopt);
  ASSERT_TRUE(ntp);
  EXPECT_EQ(ntp->epsilon, Duration(2'046'000));
  const std::int64_t expect[] = {46'064, 35'021, 23'942};
  auto windows = standard_windows();
  ASSERT_EQ(windows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    auto w = find_profile(ps, Technology::kWifiBeacon, windows[i]);
    ASSERT_TRUE(w);
    EXPECT_EQ(w->epsilon, Duration(expect[i]));
    if (i > 0) EXPECT_LT(w->epsilon, find_profile(ps, Technology::kWifiBeacon, windows[i - 1])->epsilon);
  }
  EXPECT_EQ(windows[0], Duration::milliseconds(1024));
  EXPECT_EQ(windows[2], Duration::milliseconds(5120));
}

TEST(ProfileNtp, IdealExchangesGiveZero) {
  SyntheticSetup s;
  s.updates = 200;
  auto p = profile_ntp(synth_ntp(s), synth_gnss(s));
  EXPECT_EQ(p.epsilon, Duration(0));
  EXPECT_EQ(p.sample_count, 200);
  EXPECT_FALSE(p.low_confidence());
}

TEST(ProfileNtp, EpsilonIsMaxOverServers) {
  std::vector<GnssUpdate> ref;
  std::vector<NtpExchange> xs;
  for (std::int64_t i = 0; i < 10; ++i) {
    Instant rx(1'000'000'000 * (i + 1));
    ref.push_back({i + 1, rx + Duration::seconds(100), rx});
    for (std::int64_t s = 1; s <= 3; ++s) {
      // Symmetric exchange with server error of s ms.
      Instant t0 = rx;
      Instant t1 = t0 + Duration::seconds(100) + Duration::milliseconds(s);
      xs.push_back({"s" + std::to_string(s), t0, t1, t1, t0});
    }
  }
  auto p = profile_ntp(xs, ref);
  EXPECT_EQ(p.per_source_quantiles.at("s1"), Duration::milliseconds(1));
  EXPECT_EQ(p.per_source_quantiles.at("s3"), Duration::milliseconds(3));
  EXPECT_EQ(p.epsilon, Duration::milliseconds(3));
  EXPECT_EQ(p.sample_count, 10);
  EXPECT_TRUE(p.low_confidence());
}

TEST(ProfileWifi, IdealBeaconsGiveZero) {
  SyntheticSetup s;
  s.updates = 150;
  auto p = profile_wifi(synth_beacons(s), synth_gnss(s), Duration::milliseconds(3072));
  EXPECT_EQ(p.epsilon, Duration(0));
  EXPECT_EQ(p.windows_paired, p.windows_attempted);
  EXPECT_EQ(p.per_source_quantiles.size(), 3u);
}

TEST(ProfileWifi, JitteredMatchesOracle) {
  SyntheticSetup s;
  s.updates = 300;
  s.beacon_error_bound = Duration::microseconds(10);
  auto gnss = synth_gnss(s);
  auto beacons = synth_beacons(s);
  const Duration window = Duration::milliseconds(5120);
  auto p = profile_wifi(beacons, gnss, window);

  std::map<std::string, std::vector<BeaconRecord>> per_ap;
  for (const auto& b : beacons) per_ap[b.bssid].push_back(b);
  Duration worst(0);
  for (const auto& [id, bs] : per_ap) {
    std::vector<Duration> errs;
    for (std::size_t i = 0; i + 5 < gnss.size(); ++i) {
      auto a = oracle::nearest_beacon(bs, gnss[i].local_rx);
      auto b = oracle::nearest_beacon(bs, gnss[i + 5].local_rx);
      if (!a || !b || *b <= *a) continue;
      // Elapsed truth: local clock runs at true rate in this setup.
      Duration truth = bs[*b].local_rx - bs[*a].local_rx;
      errs.push_back(abs((bs[*b].ap_timestamp - bs[*a].ap_timestamp) - truth));
    }
    Duration q = oracle::quantile99_by_sort(errs);
    EXPECT_EQ(p.per_source_quantiles.at(id), q) << id;
    worst = std::max(worst, q);
  }
  EXPECT_EQ(p.epsilon, worst);
  EXPECT_GT(p.epsilon, Duration(0));
}

TEST(ProfileFile, RoundTrip) {
  SyntheticSetup s;
  s.updates = 50;
  s.ntp_error_bound = Duration::microseconds(300);
  std::vector<AccuracyProfile> ps{profile_ntp(synth_ntp(s), synth_gnss(s))};
  for (const auto& p : builtin_profiles()) ps.push_back(p);
  std::stringstream io;
  write_profiles(io, ps);
  auto back = read_profiles(io);
  ASSERT_EQ(back.size(), ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(back[i].technology, ps[i].technology);
    EXPECT_EQ(back[i].window, ps[i].window);
    EXPECT_EQ(back[i].epsilon, ps[i].epsilon);
    EXPECT_EQ(back[i].sample_count, ps[i].sample_count);
    EXPECT_EQ(back[i].per_source_quantiles, ps[i].per_source_quantiles);
  }
}

TEST(ProfileFile, ErrorsNameTheLine) {
  std::istringstream in("technology = ntp\nepsilon_ns = 5\nbogus = 1\n");
  try {
    read_profiles(in);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "profiles:3");
  }
  std::istringstream gnss("technology = gnss\nepsilon_ns = 5\n");
  EXPECT_THROW(read_profiles(gnss), ConfigError);
}

TEST(Catalog, OnlyNtpAndWifiHaveAdapters) {
  int adapters = 0;
  for (const auto& t : technology_catalog()) adapters += t.has_adapter;
  EXPECT_EQ(adapters, 2);
}
