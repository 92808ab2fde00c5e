#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "rssiloc/pf.hpp"
#include "rssiloc/synth.hpp"

using namespace rssiloc;

namespace {

ParticleSet uniform_set(std::vector<CarState> states, std::uint64_t seed = 1) {
  ParticleSet s;
  s.states = std::move(states);
  s.log_weights.assign(s.states.size(), -std::log(static_cast<double>(s.states.size())));
  s.rng.seed(seed);
  return s;
}

std::vector<double> linear_weights(const ParticleSet& s) {
  std::vector<double> w;
  for (double lw : s.log_weights) w.push_back(std::exp(lw));
  return w;
}

}  // namespace

TEST(Init, DefaultsAndDeterminism) {
  const FilterConfig c;
  const auto a = init(c);
  ASSERT_EQ(a.size(), 300u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_GE(a.states[i].p_x, -25.0);
    EXPECT_LE(a.states[i].p_x, 25.0);
    EXPECT_GE(a.states[i].v_x, -3.0);
    EXPECT_LE(a.states[i].v_x, 3.0);
    EXPECT_NEAR(std::exp(a.log_weights[i]), 1.0 / 300, 1e-15);
  }
  const auto b = init(c);
  EXPECT_EQ(a.states, b.states);
}

TEST(Init, LargeSampleMean) {
  FilterConfig c;
  c.n_particles = 100000;
  const auto s = init(c);
  double m = 0.0;
  for (const auto& x : s.states) m += x.p_x;
  EXPECT_LE(std::abs(m / 1e5), 1.0);
}

TEST(Config, RejectsInvalid) {
  FilterConfig c;
  c.n_particles = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.driving_cov = {1, 2, 2, 1};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.init_pos_range = {1, 1};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Predict, ZeroNoiseIsMotionModel) {
  FilterConfig c;
  c.driving_cov = {0, 0, 0, 0};
  auto s = uniform_set({{1.0, 2.0}});
  predict(s, c);
  EXPECT_EQ(s.states[0].p_x, 3.0);
  EXPECT_EQ(s.states[0].v_x, 2.0);
}

TEST(Predict, IncrementCovariance) {
  FilterConfig c;
  auto s = uniform_set(std::vector<CarState>(100000, CarState{0, 0}));
  predict(s, c);
  double spp = 0, svv = 0, spv = 0;
  for (const auto& x : s.states) {
    spp += x.p_x * x.p_x;
    svv += x.v_x * x.v_x;
    spv += x.p_x * x.v_x;
  }
  EXPECT_NEAR(spp / 1e5, 4.0, 0.2);
  EXPECT_NEAR(svv / 1e5, 4.0, 0.2);
  EXPECT_NEAR(spv / 1e5, 0.0, 0.2);
}

TEST(Predict, CorrelatedCovariance) {
  FilterConfig c;
  c.driving_cov = {4.0, 1.5, 1.5, 2.0};
  auto s = uniform_set(std::vector<CarState>(100000, CarState{0, 0}));
  predict(s, c);
  double spv = 0, svv = 0;
  for (const auto& x : s.states) {
    spv += x.p_x * x.v_x;
    svv += x.v_x * x.v_x;
  }
  EXPECT_NEAR(spv / 1e5, 1.5, 0.075);
  EXPECT_NEAR(svv / 1e5, 2.0, 0.1);
}

TEST(Estimate, UniformIsArithmeticMean) {
  auto s = uniform_set({{1.0, 0.5}, {2.0, -0.5}, {4.5, 1.0}});
  const auto e = estimate(s);
  EXPECT_EQ(e.mean.p_x, (1.0 + 2.0 + 4.5) / 3.0);
  EXPECT_EQ(e.mean.v_x, (0.5 - 0.5 + 1.0) / 3.0);
}

TEST(Estimate, WeightedVarianceMatchesDirectSum) {
  auto s = uniform_set({{1.0, 0.5}, {2.0, -0.5}, {4.5, 1.0}});
  const std::vector<double> w{0.2, 0.5, 0.3};
  for (std::size_t i = 0; i < 3; ++i) s.log_weights[i] = std::log(w[i]);
  const auto e = estimate(s);
  double mp = 0, mv = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    mp += w[i] * s.states[i].p_x;
    mv += w[i] * s.states[i].v_x;
  }
  double vp = 0, vv = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    vp += w[i] * (s.states[i].p_x - mp) * (s.states[i].p_x - mp);
    vv += w[i] * (s.states[i].v_x - mv) * (s.states[i].v_x - mv);
  }
  EXPECT_NEAR(e.mean.p_x, mp, 1e-12);
  EXPECT_NEAR(e.var_p, vp, 1e-12);
  EXPECT_NEAR(e.var_v, vv, 1e-12);
  EXPECT_GE(e.var_p, 0.0);
}

TEST(Estimate, IdenticalParticlesHaveZeroVariance) {
  auto s = uniform_set(std::vector<CarState>(7, CarState{2.5, -0.25}));
  const auto e = estimate(s);
  EXPECT_EQ(e.mean.p_x, 2.5);
  EXPECT_EQ(e.var_p, 0.0);
  EXPECT_EQ(e.var_v, 0.0);
}

TEST(Update, EmptyFrameLeavesWeights) {
  const SensorArray a({{1, {0, 1, 0}, -40, -95}});
  auto s = uniform_set({{1.0, 0}, {2.0, 0}, {3.0, 0}});
  s.log_weights = {std::log(0.2), std::log(0.3), std::log(0.5)};
  const auto before = s.log_weights;
  const auto e = update(s, {5, {std::nullopt}}, a, {});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.log_weights[i], before[i], 1e-15);
  EXPECT_NEAR(e.mean.p_x, 0.2 + 0.6 + 1.5, 1e-12);
  EXPECT_EQ(e.tick, 5);
}

TEST(Update, FusionMatchesBruteForceProduct) {
  const SensorArray a({{1, {-2.0, 1.5, 1.0}, -45.0, -90.0}, {2, {3.0, -1.5, 1.0}, -50.0, -85.0}});
  const ChannelParams ch;
  const TrackGeometry track{0.0, 0.5};
  auto s = uniform_set({{-4.0, 0}, {0.5, 0}, {6.0, 0}});
  const MeasurementFrame f{0, {-52.0, -61.0}};
  update(s, f, a, ch, track);

  // Linear-domain oracle: product over sensors of Gaussian densities.
  const double sig2 = 9.0;
  auto density = [&](double rx, double px, const SensorInfo& si) {
    const double dx = px - si.position.x, dy = track.y - si.position.y, dz = track.z - si.position.z;
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double alpha = std::acos(dx / d);
    const double g = alpha < std::numbers::pi / 3 ? 0.0 : alpha < 3 * std::numbers::pi / 4 ? -6.0 : -10.0;
    const double mu = std::max(si.floor_dbm, si.ref_power_dbm - 20.0 * std::log10(d) + g);
    return std::exp(-(rx - mu) * (rx - mu) / (2 * sig2)) / std::sqrt(2 * std::numbers::pi * sig2);
  };
  std::vector<double> w;
  for (const auto& p : s.states) w.push_back(density(-52.0, p.p_x, a[0]) * density(-61.0, p.p_x, a[1]));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const auto got = linear_weights(s);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], w[i] / total, 1e-12);
}

TEST(Update, DegenerateResetsToUniform) {
  const SensorArray a({{1, {0, 1, 0}, -40, -95}});
  auto s = uniform_set({{1.0, 0}, {2.0, 0}});
  s.log_weights = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  const auto e = update(s, {0, {-60.0}}, a, {});
  EXPECT_TRUE(e.degenerate);
  EXPECT_NEAR(std::exp(s.log_weights[0]), 0.5, 1e-15);
  EXPECT_EQ(e.mean.p_x, 1.5);
}

TEST(Resample, PointMassCopiesOneParticle) {
  FilterConfig c;
  for (auto scheme : {ResamplingScheme::Multinomial, ResamplingScheme::Systematic}) {
    c.resampling = scheme;
    auto s = uniform_set({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
    s.log_weights = {-INFINITY, -INFINITY, 0.0, -INFINITY};
    resample(s, c);
    for (const auto& x : s.states) EXPECT_EQ(x.p_x, 2.0);
  }
}

TEST(Resample, SystematicUniformKeepsEachOnce) {
  FilterConfig c;
  c.resampling = ResamplingScheme::Systematic;
  std::vector<CarState> st;
  for (int i = 0; i < 64; ++i) st.push_back({static_cast<double>(i), 0});
  auto s = uniform_set(st, 3);
  resample(s, c);
  std::vector<int> count(64, 0);
  for (const auto& x : s.states) ++count[static_cast<std::size_t>(x.p_x)];
  for (int k : count) EXPECT_EQ(k, 1);
}

TEST(Resample, HalfHalfRatio) {
  FilterConfig c;
  std::vector<CarState> st;
  for (int i = 0; i < 10; ++i) st.push_back({static_cast<double>(i), 0});
  double c0 = 0, c1 = 0;
  auto s = uniform_set(st, 9);
  for (int rep = 0; rep < 10000; ++rep) {
    s.states = st;
    s.log_weights.assign(10, -INFINITY);
    s.log_weights[0] = s.log_weights[1] = std::log(0.5);
    resample(s, c);
    for (const auto& x : s.states) {
      if (x.p_x == 0.0) ++c0;
      else if (x.p_x == 1.0) ++c1;
      else ADD_FAILURE() << "zero-weight particle drawn";
    }
  }
  EXPECT_NEAR(c0 / c1, 1.0, 0.05);
}

TEST(Resample, MultinomialUnbiased) {
  FilterConfig c;
  const std::vector<double> w{0.05, 0.1, 0.15, 0.2, 0.5};
  std::vector<CarState> st;
  for (int i = 0; i < 5; ++i) st.push_back({static_cast<double>(i), 0});
  auto s = uniform_set(st, 17);
  std::vector<double> sum(5, 0.0);
  const int reps = 10000;
  for (int rep = 0; rep < reps; ++rep) {
    s.states = st;
    for (std::size_t i = 0; i < 5; ++i) s.log_weights[i] = std::log(w[i]);
    resample(s, c);
    for (const auto& x : s.states) sum[static_cast<std::size_t>(x.p_x)] += 1;
  }
  for (std::size_t i = 0; i < 5; ++i) {
    const double n = 5.0;
    const double se = std::sqrt(n * w[i] * (1 - w[i]) / reps);
    EXPECT_LE(std::abs(sum[i] / reps - n * w[i]), 4 * se);
  }
}

TEST(Resample, ResetsWeights) {
  FilterConfig c;
  auto s = uniform_set({{0, 0}, {1, 0}, {2, 0}});
  s.log_weights = {std::log(0.1), std::log(0.3), std::log(0.6)};
  resample(s, c);
  for (double lw : s.log_weights) EXPECT_NEAR(std::exp(lw), 1.0 / 3, 1e-15);
}

TEST(Run, EmptySeries) {
  const SensorArray a({{1, {0, 1, 0}, -40, -95}});
  EXPECT_TRUE(run({}, a, {}, {}).empty());
}

TEST(Run, NoiselessTracksTruthAndIsDeterministic) {
  const SensorArray a({{1, {-8.0, 1.5, 1.0}, -50, -80},
                       {2, {-4.0, -1.5, 1.0}, -50, -80},
                       {3, {-0.5, 1.5, 1.0}, -50, -80},
                       {4, {0.5, -1.5, 1.0}, -50, -80},
                       {5, {4.0, 1.5, 1.0}, -50, -80},
                       {6, {8.0, -1.5, 1.0}, -50, -80}});
  const TrackGeometry track{0.0, 0.5};
  const auto truth = simulate_trajectory({}, {});
  const auto series = synthesize_rssi(truth, a, {}, {0.0, 0.0, 0.0}, 4, track);
  FilterConfig c;
  c.seed = 2;
  const auto est = run(series, a, {}, c, track);
  EXPECT_LE(position_rmse(est, truth, 20), 0.5);
  EXPECT_EQ(est, run(series, a, {}, c, track));
}

TEST(Rmse, BurnInAndLength) {
  EstimateTrack e(3);
  GroundTruthTrack t;
  t.samples.resize(3);
  e[0].mean.p_x = 100;
  e[1].mean.p_x = 3;
  e[2].mean.p_x = -4;
  EXPECT_DOUBLE_EQ(position_rmse(e, t, 1), std::sqrt(12.5));
  t.samples.resize(2);
  EXPECT_THROW(position_rmse(e, t), ConfigError);
}
