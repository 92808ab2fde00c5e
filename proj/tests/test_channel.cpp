#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rssiloc/channel.hpp"

using namespace rssiloc;

namespace {

const SensorInfo kAt0{1, {0, 0, 0}, -40.0, -95.0};

}  // namespace

TEST(Angle, Examples) {
  EXPECT_DOUBLE_EQ(antenna_angle({1, 0, 0}, {0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(antenna_angle({0, 1, 0}, {0, 0, 0}), std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(antenna_angle({-1, 0, 0}, {0, 0, 0}), std::numbers::pi);
  EXPECT_THROW(antenna_angle({1, 1, 1}, {1, 1, 1}), DomainError);
}

TEST(Pattern, Bands) {
  const auto p = AntennaPattern::directional();
  EXPECT_EQ(pattern_gain(p, 0.5), 0.0);
  EXPECT_EQ(pattern_gain(p, 2.0), -6.0);
  EXPECT_EQ(pattern_gain(p, 3.0), -10.0);
  EXPECT_EQ(pattern_gain(p, std::numbers::pi / 3), -6.0);
  EXPECT_EQ(pattern_gain(p, 3 * std::numbers::pi / 4), -10.0);
  EXPECT_EQ(pattern_gain(p, std::numbers::pi), -10.0);
  EXPECT_THROW(pattern_gain(p, -0.1), DomainError);
  EXPECT_THROW(pattern_gain(p, 3.2), DomainError);
}

TEST(Pattern, RejectsBadBands) {
  EXPECT_THROW(AntennaPattern(std::vector<PatternBand>{}), ConfigError);
  EXPECT_THROW(AntennaPattern({{2.0, 0.0}, {1.0, -1.0}}), ConfigError);
  EXPECT_THROW(AntennaPattern({{1.0, 0.0}}), ConfigError);
}

TEST(PathGain, Examples) {
  const ChannelParams c;
  EXPECT_NEAR(path_gain({1, 0, 0}, {0, 0, 0}, kAt0, c), -40.0, 1e-12);
  EXPECT_NEAR(path_gain({10, 0, 0}, {0, 0, 0}, kAt0, c), -60.0, 1e-12);
  EXPECT_NEAR(path_gain({-1, 0, 0}, {0, 0, 0}, kAt0, c), -50.0, 1e-12);
  try {
    path_gain({0, 0, 0}, {0, 0, 0}, kAt0, c);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("zero distance"), std::string::npos);
  }
}

TEST(PathGain, DecreasesWithDistanceAtFixedAngle) {
  const ChannelParams c;
  double prev = 1e9;
  for (double d = 0.5; d < 100; d *= 1.3) {
    const double g = path_gain({d, 0, 0}, {0, 0, 0}, kAt0, c);
    EXPECT_LT(g, prev);
    prev = g;
  }
}

TEST(Likelihood, PeakAndOffset) {
  const ChannelParams c;
  const Vec3 p{10, 0, 0};
  const double mu = expected_rssi(p, kAt0, c);
  const double peak = -0.5 * std::log(2 * std::numbers::pi * 9.0);
  EXPECT_NEAR(rssi_log_likelihood(mu, p, kAt0, c), peak, 1e-12);
  EXPECT_NEAR(rssi_log_likelihood(mu + 3.0, p, kAt0, c), peak - 0.5, 1e-12);
}

TEST(Likelihood, FloorClampActive) {
  ChannelParams c;
  // 10^(80/20) m away on boresight: path gain -120 dBm.
  const Vec3 p{1e4, 0, 0};
  EXPECT_NEAR(path_gain(p, kAt0.position, kAt0, c), -120.0, 1e-9);
  const double peak = -0.5 * std::log(2 * std::numbers::pi * 9.0);
  EXPECT_NEAR(rssi_log_likelihood(-95.0, p, kAt0, c), peak, 1e-12);
}

TEST(Likelihood, IntegratesToOne) {
  const ChannelParams c;
  const Vec3 p{3, 1, 0};
  const double mu = expected_rssi(p, kAt0, c);
  // Composite Simpson over mu +- 12 sigma.
  const int n = 4000;
  const double a = mu - 36, b = mu + 36, h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    s += w * std::exp(rssi_log_likelihood(a + i * h, p, kAt0, c));
  }
  EXPECT_NEAR(s * h / 3, 1.0, 1e-6);
}

TEST(Likelihood, MatchesLinearDensity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-20, 20), rx(-100, -30);
  const ChannelParams c;
  for (int i = 0; i < 100; ++i) {
    const Vec3 p{u(rng), u(rng) / 4, 0.5};
    const SensorInfo s{1, {u(rng), u(rng) / 4, 1.0}, -45.0, -90.0};
    const double r = rx(rng);
    const double dx = p.x - s.position.x, dy = p.y - s.position.y, dz = p.z - s.position.z;
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double alpha = std::acos(dx / d);
    const double g = alpha < std::numbers::pi / 3 ? 0.0 : alpha < 3 * std::numbers::pi / 4 ? -6.0 : -10.0;
    const double mu = std::max(-90.0, -45.0 - 20.0 * std::log10(d) + g);
    const double direct = std::exp(-(r - mu) * (r - mu) / 18.0) / std::sqrt(2 * std::numbers::pi * 9.0);
    EXPECT_NEAR(std::exp(rssi_log_likelihood(r, p, s, c)) / direct, 1.0, 1e-10);
  }
}

TEST(Calibrate, MaxAndPercentile) {
  const SensorArray a({{1, {}, -40, -95}});
  MeasurementSeries s;
  for (double v : {-60.0, -50.0, -70.0}) s.frames.push_back({static_cast<std::int64_t>(s.frames.size()), {v}});
  EXPECT_EQ(calibrate(s, a)[0].ref_power_dbm, -50.0);

  MeasurementSeries lin;
  for (int i = 0; i < 100; ++i) lin.frames.push_back({i, {-95.0 + 50.0 * i / 99.0}});
  const auto cal = calibrate(lin, a);
  EXPECT_NEAR(cal[0].floor_dbm, -92.5, 1e-9);
  EXPECT_NEAR(cal[0].ref_power_dbm, -45.0, 1e-9);
}

TEST(Calibrate, UniformSampleFloorNearTarget) {
  const SensorArray a({{1, {}, -40, -95}});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-95, -45);
  MeasurementSeries s;
  for (int i = 0; i < 100; ++i) s.frames.push_back({i, {u(rng)}});
  EXPECT_NEAR(calibrate(s, a)[0].floor_dbm, -92.5, 1.5);
}

TEST(Calibrate, ConstantReadingsFail) {
  const SensorArray a({{1, {}, -40, -95}});
  MeasurementSeries s;
  for (int i = 0; i < 10; ++i) s.frames.push_back({i, {-80.0}});
  EXPECT_THROW(calibrate(s, a), ConfigError);
}

TEST(Calibrate, SensorWithoutReadingsFails) {
  const SensorArray a({{1, {}, -40, -95}, {2, {1, 0, 0}, -40, -95}});
  MeasurementSeries s;
  s.frames.push_back({0, {-60.0, std::nullopt}});
  s.frames.push_back({1, {-61.0, std::nullopt}});
  EXPECT_THROW(calibrate(s, a), ConfigError);
}

TEST(Percentile, MatchesLinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 100), 4.0);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 25), 2.0);
}
