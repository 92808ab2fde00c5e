#pragma once

// Forward radio model: log-distance pathloss with a piecewise-constant
// transmitter pattern, and the floor-clamped Gaussian RSSI likelihood.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rssiloc/error.hpp"
#include "rssiloc/model.hpp"

namespace rssiloc {

struct PatternBand {
  double angle_max_rad = std::numbers::pi;
  double gain_db = 0.0;

  friend bool operator==(const PatternBand&, const PatternBand&) = default;
};

/// Gain as a function of aspect angle. Bands are half-open
/// [previous angle_max, angle_max); alpha == pi falls into the last band.
class AntennaPattern {
 public:
  AntennaPattern() : AntennaPattern(directional()) {}

  explicit AntennaPattern(std::vector<PatternBand> bands) : bands_(std::move(bands)) {
    if (bands_.empty()) throw ConfigError("antenna pattern needs at least one band");
    double prev = 0.0;
    for (const auto& b : bands_) {
      if (!std::isfinite(b.gain_db)) throw ConfigError("antenna pattern gain must be finite");
      if (!(b.angle_max_rad > prev)) throw ConfigError("antenna pattern angles must be strictly increasing");
      prev = b.angle_max_rad;
    }
    if (std::abs(prev - std::numbers::pi) > 1e-12) throw ConfigError("last antenna pattern angle must be pi");
    bands_.back().angle_max_rad = std::numbers::pi;
  }

  /// Front-mounted transmitter shadowed by the car body.
  static AntennaPattern directional() {
    return AntennaPattern(std::vector<PatternBand>{
        {std::numbers::pi / 3.0, 0.0}, {3.0 * std::numbers::pi / 4.0, -6.0}, {std::numbers::pi, -10.0}});
  }

  static AntennaPattern omnidirectional() { return AntennaPattern(std::vector<PatternBand>{{std::numbers::pi, 0.0}}); }

  const std::vector<PatternBand>& bands() const noexcept { return bands_; }

  friend bool operator==(const AntennaPattern&, const AntennaPattern&) = default;

 private:
  std::vector<PatternBand> bands_;
};

struct ChannelParams {
  double pathloss_exponent = 2.0;
  double likelihood_variance = 9.0;  // dB^2
  AntennaPattern pattern = AntennaPattern::directional();

  void validate() const {
    if (!(pathloss_exponent > 0.0) || !std::isfinite(pathloss_exponent))
      throw ConfigError("pathloss_exponent must be > 0");
    if (!(likelihood_variance > 0.0) || !std::isfinite(likelihood_variance))
      throw ConfigError("likelihood_variance must be > 0");
  }
};

/// Aspect angle of transmitter `p` seen from receiver `q`, in [0, pi].
inline double antenna_angle(const Vec3& p, const Vec3& q) {
  const double d = norm(p - q);
  if (!(d > 0.0)) throw DomainError("zero distance between transmitter and sensor");
  const double c = std::clamp((p.x - q.x) / d, -1.0, 1.0);
  return std::acos(c);
}

inline double pattern_gain(const AntennaPattern& pattern, double alpha) {
  if (!(alpha >= 0.0 && alpha <= std::numbers::pi)) throw DomainError("antenna angle outside [0, pi]");
  const auto& bands = pattern.bands();
  for (const auto& b : bands)
    if (alpha < b.angle_max_rad) return b.gain_db;
  return bands.back().gain_db;
}

/// Expected received power in dBm, without the noise-floor clamp.
inline double path_gain(const Vec3& p, const Vec3& q, const SensorInfo& sensor, const ChannelParams& params) {
  const double d = norm(q - p);
  if (!(d > 0.0)) throw DomainError("zero distance between transmitter and sensor");
  const double alpha = std::acos(std::clamp((p.x - q.x) / d, -1.0, 1.0));
  return sensor.ref_power_dbm - params.pathloss_exponent * 10.0 * std::log10(d) + pattern_gain(params.pattern, alpha);
}

/// Mean of the RSSI distribution: the pathloss, or the floor if that is higher.
inline double expected_rssi(const Vec3& p, const SensorInfo& sensor, const ChannelParams& params) {
  return std::max(sensor.floor_dbm, path_gain(p, sensor.position, sensor, params));
}

/// Natural-log Gaussian density of reading `rx_dbm` for a transmitter at `p`.
inline double rssi_log_likelihood(double rx_dbm, const Vec3& p, const SensorInfo& sensor, const ChannelParams& params) {
  const double mu = expected_rssi(p, sensor, params);
  const double var = params.likelihood_variance;
  const double r = rx_dbm - mu;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - r * r / (2.0 * var);
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationOptions {
  double floor_percentile = 5.0;
};

/// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw DomainError("percentile of empty sample");
  if (!(pct >= 0.0 && pct <= 100.0)) throw DomainError("percentile outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Sets each sensor's reference power to its maximum observed reading and its
/// floor to a low percentile of its readings. Pools all given series.
inline SensorArray calibrate(std::span<const MeasurementSeries> runs, const SensorArray& array,
                             const CalibrationOptions& opts = {}) {
  std::vector<std::vector<double>> per_sensor(array.size());
  for (const auto& series : runs) {
    series.validate(array);
    for (const auto& f : series.frames)
      for (std::size_t s = 0; s < array.size(); ++s)
        if (f.readings[s]) per_sensor[s].push_back(*f.readings[s]);
  }
  std::vector<SensorInfo> out = array.sensors();
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto& v = per_sensor[s];
    if (v.empty()) throw ConfigError("cannot calibrate sensor " + std::to_string(out[s].id) + ": no readings");
    out[s].ref_power_dbm = *std::max_element(v.begin(), v.end());
    out[s].floor_dbm = percentile(v, opts.floor_percentile);
  }
  try {
    return SensorArray(std::move(out));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("calibration produced an invalid array: ") + e.what());
  }
}

inline SensorArray calibrate(const MeasurementSeries& series, const SensorArray& array,
                             const CalibrationOptions& opts = {}) {
  return calibrate(std::span<const MeasurementSeries>(&series, 1), array, opts);
}

}  // namespace rssiloc
