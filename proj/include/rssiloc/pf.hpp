#pragma once

// Sensor-fusion particle filter over the 1-D constant-velocity car state.
// Weights are kept in the log domain; every update is normalized by
// log-sum-exp so that the linear weights sum to one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "rssiloc/channel.hpp"
#include "rssiloc/error.hpp"
#include "rssiloc/model.hpp"

namespace rssiloc {

enum class ResamplingScheme { Multinomial, Systematic };

inline std::string to_string(ResamplingScheme s) {
  return s == ResamplingScheme::Multinomial ? "multinomial" : "systematic";
}

inline ResamplingScheme resampling_from_string(const std::string& s) {
  if (s == "multinomial") return ResamplingScheme::Multinomial;
  if (s == "systematic") return ResamplingScheme::Systematic;
  throw ConfigError("unknown resampling scheme '" + s + "'");
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

struct FilterConfig {
  std::size_t n_particles = 300;
  Interval init_pos_range{-25.0, 25.0};  // m
  Interval init_vel_range{-3.0, 3.0};    // m/tick
  /// Row-major 2x2 covariance of the (position, velocity) driving noise.
  std::array<double, 4> driving_cov{4.0, 0.0, 0.0, 4.0};
  ResamplingScheme resampling = ResamplingScheme::Multinomial;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_particles < 2) throw ConfigError("n_particles must be >= 2");
    if (!(init_pos_range.lo < init_pos_range.hi)) throw ConfigError("init_pos_range must be non-degenerate");
    if (!(init_vel_range.lo < init_vel_range.hi)) throw ConfigError("init_vel_range must be non-degenerate");
    const auto& c = driving_cov;
    for (double v : c)
      if (!std::isfinite(v)) throw ConfigError("driving_cov must be finite");
    if (c[1] != c[2]) throw ConfigError("driving_cov must be symmetric");
    if (c[0] < 0.0 || c[3] < 0.0 || c[0] * c[3] - c[1] * c[2] < 0.0)
      throw ConfigError("driving_cov must be positive semi-definite");
  }
};

struct ParticleSet {
  std::vector<CarState> states;
  std::vector<double> log_weights;
  std::mt19937_64 rng;

  std::size_t size() const noexcept { return states.size(); }
};

struct Estimate {
  std::int64_t tick = 0;
  CarState mean;
  double var_p = 0.0;
  double var_v = 0.0;
  /// Set when the weights collapsed and were reset to uniform at this tick.
  bool degenerate = false;

  friend bool operator==(const Estimate&, const Estimate&) = default;
};

using EstimateTrack = std::vector<Estimate>;

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// exp(log_weights - max); for equal log weights every entry is exactly 1.
inline std::vector<double> relative_weights(std::span<const double> log_w) {
  const double m = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - m);
  return w;
}

/// Lower Cholesky factor of a PSD 2x2 matrix, as (l11, l21, l22).
inline std::array<double, 3> cholesky2(const std::array<double, 4>& c) {
  const double l11 = std::sqrt(c[0]);
  const double l21 = l11 > 0.0 ? c[2] / l11 : 0.0;
  const double l22 = std::sqrt(std::max(0.0, c[3] - l21 * l21));
  return {l11, l21, l22};
}

}  // namespace detail

inline ParticleSet init(const FilterConfig& config) {
  config.validate();
  ParticleSet set;
  set.rng.seed(config.seed);
  std::uniform_real_distribution<double> pos(config.init_pos_range.lo, config.init_pos_range.hi);
  std::uniform_real_distribution<double> vel(config.init_vel_range.lo, config.init_vel_range.hi);
  set.states.resize(config.n_particles);
  for (auto& s : set.states) {
    s.p_x = pos(set.rng);
    s.v_x = vel(set.rng);
  }
  set.log_weights.assign(config.n_particles, -std::log(static_cast<double>(config.n_particles)));
  return set;
}

/// Constant-velocity step x <- A x + n with A = [[1,1],[0,1]], n ~ N(0, C).
inline void predict(ParticleSet& set, const FilterConfig& config) {
  const auto [l11, l21, l22] = detail::cholesky2(config.driving_cov);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& s : set.states) {
    const double z1 = gauss(set.rng);
    const double z2 = gauss(set.rng);
    const double p = s.p_x + s.v_x;
    s.p_x = p + l11 * z1;
    s.v_x = s.v_x + l21 * z1 + l22 * z2;
  }
}

/// Weighted mean and per-component weighted variance of the particles.
inline Estimate estimate(const ParticleSet& set, std::int64_t tick = 0) {
  const auto w = detail::relative_weights(set.log_weights);
  double total = 0.0, sp = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    total += w[i];
    sp += w[i] * set.states[i].p_x;
    sv += w[i] * set.states[i].v_x;
  }
  Estimate e;
  e.tick = tick;
  e.mean = {sp / total, sv / total};
  double vp = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double dp = set.states[i].p_x - e.mean.p_x;
    const double dv = set.states[i].v_x - e.mean.v_x;
    vp += w[i] * dp * dp;
    vv += w[i] * dv * dv;
  }
  e.var_p = vp / total;
  e.var_v = vv / total;
  return e;
}

/// Adds the summed per-sensor log-likelihoods of `frame` to every particle,
/// renormalizes, and returns the resulting estimate. Sensors without a
/// reading leave the weights untouched.
inline Estimate update(ParticleSet& set, const MeasurementFrame& frame, const SensorArray& array,
                       const ChannelParams& channel, const TrackGeometry& track = {}) {
  if (frame.readings.size() != array.size())
    throw ConfigError("frame at tick " + std::to_string(frame.tick) + " does not match sensor array");
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Vec3 p = track.at(set.states[i].p_x);
    double ll = 0.0;
    for (std::size_t s = 0; s < array.size(); ++s)
      if (frame.readings[s]) ll += rssi_log_likelihood(*frame.readings[s], p, array[s], channel);
    set.log_weights[i] += ll;
  }
  const double lse = detail::log_sum_exp(set.log_weights);
  bool degenerate = false;
  if (!std::isfinite(lse)) {
    degenerate = true;
    set.log_weights.assign(set.size(), -std::log(static_cast<double>(set.size())));
  } else {
    for (double& lw : set.log_weights) lw -= lse;
  }
  Estimate e = estimate(set, frame.tick);
  e.degenerate = degenerate;
  return e;
}

/// Draws n particles with replacement in proportion to their weights and
/// resets the weights to 1/n.
inline void resample(ParticleSet& set, const FilterConfig& config) {
  const std::size_t n = set.size();
  const auto w = detail::relative_weights(set.log_weights);
  std::vector<double> cumulative(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) cumulative[i] = (acc += w[i]);
  const double total = acc;

  auto pick = [&](double u) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative.begin()), n - 1);
  };

  std::vector<CarState> next(n);
  if (config.resampling == ResamplingScheme::Multinomial) {
    std::uniform_real_distribution<double> uni(0.0, total);
    for (auto& s : next) s = set.states[pick(uni(set.rng))];
  } else {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double offset = uni(set.rng);
    const double step = total / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) next[k] = set.states[pick((static_cast<double>(k) + offset) * step)];
  }
  set.states = std::move(next);
  set.log_weights.assign(n, -std::log(static_cast<double>(n)));
}

/// Full filter: initialize once, then predict, update and resample per frame.
inline EstimateTrack run(const MeasurementSeries& series, const SensorArray& array, const ChannelParams& channel,
                         const FilterConfig& config, const TrackGeometry& track = {}) {
  channel.validate();
  series.validate(array);
  EstimateTrack out;
  out.reserve(series.frames.size());
  if (series.frames.empty()) return out;
  ParticleSet set = init(config);
  for (const auto& frame : series.frames) {
    predict(set, config);
    out.push_back(update(set, frame, array, channel, track));
    resample(set, config);
  }
  return out;
}

/// Root-mean-square position error against ground truth, skipping the first
/// `burn_in` ticks.
inline double position_rmse(const EstimateTrack& track, const GroundTruthTrack& truth, std::size_t burn_in = 0) {
  if (track.size() != truth.size()) throw ConfigError("estimate and ground truth differ in length");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = burn_in; i < track.size(); ++i) {
    const double d = track[i].mean.p_x - truth.samples[i].state.p_x;
    s += d * d;
    ++n;
  }
  if (n == 0) throw ConfigError("no ticks left after burn-in");
  return std::sqrt(s / static_cast<double>(n));
}

}  // namespace rssiloc
