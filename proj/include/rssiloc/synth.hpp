#pragma once

// Synthetic in/out drives: trapezoidal-velocity trajectories
// and forward RSSI synthesis through the channel model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rssiloc/channel.hpp"
#include "rssiloc/error.hpp"
#include "rssiloc/model.hpp"

namespace rssiloc {

struct TrajectoryProfile {
  double x_out = 10.0;        // parking position outside, m
  double x_in = -10.0;        // end position inside, m
  double cruise_speed = 1.0;  // m/s
  double accel = 0.5;         // m/s^2
  int dwell_ticks = 30;       // at each end
  int n_round_trips = 2;

  void validate() const {
    if (!std::isfinite(x_out) || !std::isfinite(x_in) || !(x_in < x_out))
      throw ConfigError("trajectory requires x_in < x_out");
    if (!(cruise_speed > 0.0) || !std::isfinite(cruise_speed)) throw ConfigError("cruise_speed must be > 0");
    if (!(accel > 0.0) || !std::isfinite(accel)) throw ConfigError("accel must be > 0");
    if (dwell_ticks < 0) throw ConfigError("dwell_ticks must be >= 0");
    if (n_round_trips < 0) throw ConfigError("n_round_trips must be >= 0");
  }

  /// The drive must cross both zone thresholds completely.
  void validate(const ZoneThresholds& zone) const {
    validate();
    zone.validate();
    if (!(x_in < zone.inside_max_x && zone.outside_min_x < x_out))
      throw ConfigError("trajectory requires x_in < inside_max_x < outside_min_x < x_out");
  }
};

struct NoiseSpec {
  double rssi_noise_var = 9.0;   // dB^2
  double dropout_prob = 0.05;
  double quantization_step = 1.0;  // dB, 0 disables

  void validate() const {
    if (!(rssi_noise_var >= 0.0) || !std::isfinite(rssi_noise_var)) throw ConfigError("rssi_noise_var must be >= 0");
    if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) throw ConfigError("dropout_prob must be in [0, 1]");
    if (!(quantization_step >= 0.0) || !std::isfinite(quantization_step))
      throw ConfigError("quantization_step must be >= 0");
  }
};

namespace detail {

struct MotionSegment {
  double t0 = 0.0;
  double duration = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;
  double a = 0.0;
  double x_lo = 0.0;
  double x_hi = 0.0;
};

inline void append_dwell(std::vector<MotionSegment>& segs, double& t, double x, double duration) {
  if (duration <= 0.0) return;
  segs.push_back({t, duration, x, 0.0, 0.0, x, x});
  t += duration;
}

inline void append_leg(std::vector<MotionSegment>& segs, double& t, double from, double to, double speed,
                       double accel) {
  const double dist = std::abs(to - from);
  const double dir = to > from ? 1.0 : -1.0;
  const double t_acc = speed / accel;
  const double d_acc = speed * speed / (2.0 * accel);
  if (2.0 * d_acc > dist * (1.0 + 1e-12))
    throw ConfigError("cruise speed unreachable: accelerating to " + std::to_string(speed) + " m/s needs " +
                      std::to_string(2.0 * d_acc) + " m but the drive is " + std::to_string(dist) + " m");
  const double t_cruise = (dist - 2.0 * d_acc) / speed;
  const double lo = std::min(from, to), hi = std::max(from, to);
  segs.push_back({t, t_acc, from, 0.0, dir * accel, lo, hi});
  t += t_acc;
  if (t_cruise > 0.0) {
    segs.push_back({t, t_cruise, from + dir * d_acc, dir * speed, 0.0, lo, hi});
    t += t_cruise;
  }
  segs.push_back({t, t_acc, to - dir * d_acc, dir * speed, -dir * accel, lo, hi});
  t += t_acc;
}

}  // namespace detail

/// Samples the piecewise-kinematic drive on the tick grid. Velocities are
/// reported in m/tick. Labels are derived from `zone`.
inline GroundTruthTrack simulate_trajectory(const TrajectoryProfile& profile, const ZoneThresholds& zone,
                                            double tick_interval_s = kDefaultTickIntervalS) {
  profile.validate();
  zone.validate();
  if (!(tick_interval_s > 0.0)) throw ConfigError("tick_interval_s must be > 0");

  std::vector<detail::MotionSegment> segs;
  double t = 0.0;
  const double dwell = profile.dwell_ticks * tick_interval_s;
  detail::append_dwell(segs, t, profile.x_out, dwell);
  for (int trip = 0; trip < profile.n_round_trips; ++trip) {
    detail::append_leg(segs, t, profile.x_out, profile.x_in, profile.cruise_speed, profile.accel);
    detail::append_dwell(segs, t, profile.x_in, dwell);
    detail::append_leg(segs, t, profile.x_in, profile.x_out, profile.cruise_speed, profile.accel);
    detail::append_dwell(segs, t, profile.x_out, dwell);
  }

  GroundTruthTrack track;
  const auto n_ticks = static_cast<std::int64_t>(std::floor(t / tick_interval_s + 1e-9));
  track.samples.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n_ticks, 0)));
  std::size_t seg = 0;
  for (std::int64_t k = 0; k < n_ticks; ++k) {
    const double tk = static_cast<double>(k) * tick_interval_s;
    while (seg + 1 < segs.size() && tk >= segs[seg + 1].t0) ++seg;
    const auto& s = segs[seg];
    const double tau = std::clamp(tk - s.t0, 0.0, s.duration);
    const double x = std::clamp(s.x0 + s.v0 * tau + 0.5 * s.a * tau * tau, s.x_lo, s.x_hi);
    const double v = s.v0 + s.a * tau;
    track.samples.push_back({k, {x, v * tick_interval_s}, zone.classify(x)});
  }
  return track;
}

/// Noisy, floor-clamped, quantized RSSI with random dropouts for every
/// (tick, sensor) of the ground-truth track.
inline MeasurementSeries synthesize_rssi(const GroundTruthTrack& truth, const SensorArray& array,
                                         const ChannelParams& channel, const NoiseSpec& noise, std::uint64_t seed,
                                         const TrackGeometry& track = {},
                                         double tick_interval_s = kDefaultTickIntervalS) {
  channel.validate();
  noise.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double sd = std::sqrt(noise.rssi_noise_var);

  MeasurementSeries series;
  series.tick_interval_s = tick_interval_s;
  series.frames.reserve(truth.size());
  for (const auto& sample : truth.samples) {
    MeasurementFrame frame;
    frame.tick = sample.tick;
    frame.readings.resize(array.size());
    const Vec3 p = track.at(sample.state.p_x);
    for (std::size_t s = 0; s < array.size(); ++s) {
      double r = expected_rssi(p, array[s], channel) + sd * gauss(rng);
      if (noise.quantization_step > 0.0) r = std::round(r / noise.quantization_step) * noise.quantization_step;
      const bool dropped = uni(rng) < noise.dropout_prob;
      if (!dropped) frame.readings[s] = r;
    }
    series.frames.push_back(std::move(frame));
  }
  return series;
}

}  // namespace rssiloc
