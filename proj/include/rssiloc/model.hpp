#pragma once

// Core domain types: receivers, RSSI frames, car state and zone labels.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "rssiloc/error.hpp"

namespace rssiloc {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

/// The car moves along x; the transmitter's y and z stay fixed.
struct TrackGeometry {
  double y = 0.0;
  double z = 0.0;

  Vec3 at(double p_x) const noexcept { return {p_x, y, z}; }

  friend bool operator==(const TrackGeometry&, const TrackGeometry&) = default;
};

inline constexpr double kDefaultRefPowerDbm = -40.0;
inline constexpr double kDefaultFloorDbm = -95.0;
inline constexpr double kDefaultTickIntervalS = 0.1;

/// One fixed receiver. `ref_power_dbm` is the combined transmit power minus
/// the 1 m pathloss; readings below `floor_dbm` only reflect receiver noise.
struct SensorInfo {
  int id = 0;
  Vec3 position;
  double ref_power_dbm = kDefaultRefPowerDbm;
  double floor_dbm = kDefaultFloorDbm;

  friend bool operator==(const SensorInfo&, const SensorInfo&) = default;
};

class SensorArray {
 public:
  SensorArray() = default;

  explicit SensorArray(std::vector<SensorInfo> sensors) : sensors_(std::move(sensors)) {
    if (sensors_.empty()) throw ConfigError("sensor array must contain at least one sensor");
    std::unordered_set<int> seen;
    for (const auto& s : sensors_) {
      if (!seen.insert(s.id).second) throw ConfigError("duplicate sensor id " + std::to_string(s.id));
      if (!std::isfinite(s.ref_power_dbm) || !std::isfinite(s.floor_dbm))
        throw ConfigError("sensor " + std::to_string(s.id) + ": non-finite calibration");
      if (!(s.floor_dbm < s.ref_power_dbm))
        throw ConfigError("sensor " + std::to_string(s.id) + ": floor_dbm must be < ref_power_dbm");
    }
  }

  std::size_t size() const noexcept { return sensors_.size(); }
  bool empty() const noexcept { return sensors_.empty(); }
  const std::vector<SensorInfo>& sensors() const noexcept { return sensors_; }
  const SensorInfo& operator[](std::size_t i) const { return sensors_[i]; }

  std::optional<std::size_t> index_of(int id) const noexcept {
    for (std::size_t i = 0; i < sensors_.size(); ++i)
      if (sensors_[i].id == id) return i;
    return std::nullopt;
  }

  friend bool operator==(const SensorArray&, const SensorArray&) = default;

 private:
  std::vector<SensorInfo> sensors_;
};

/// Readings of one tick, indexed like the owning SensorArray. An empty
/// optional means the sensor reported nothing at that tick.
struct MeasurementFrame {
  std::int64_t tick = 0;
  std::vector<std::optional<double>> readings;

  std::size_t reading_count() const noexcept {
    std::size_t n = 0;
    for (const auto& r : readings) n += r.has_value();
    return n;
  }

  friend bool operator==(const MeasurementFrame&, const MeasurementFrame&) = default;
};

struct MeasurementSeries {
  double tick_interval_s = kDefaultTickIntervalS;
  std::vector<MeasurementFrame> frames;

  /// Throws ConfigError unless ticks increase strictly and every frame has
  /// one slot per sensor of `array`.
  void validate(const SensorArray& array) const {
    if (!(tick_interval_s > 0.0)) throw ConfigError("tick_interval_s must be > 0");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].readings.size() != array.size())
        throw ConfigError("frame at tick " + std::to_string(frames[i].tick) + " does not match sensor array");
      if (i > 0 && frames[i].tick <= frames[i - 1].tick)
        throw ConfigError("ticks must be strictly increasing (tick " + std::to_string(frames[i].tick) + ")");
    }
  }

  friend bool operator==(const MeasurementSeries&, const MeasurementSeries&) = default;
};

/// Position in m and velocity in m/tick along the track axis.
struct CarState {
  double p_x = 0.0;
  double v_x = 0.0;

  friend bool operator==(const CarState&, const CarState&) = default;
};

enum class ZoneLabel : int { Outside = 0, Transition = 1, Inside = 2 };

inline constexpr int kZoneCount = 3;

inline int to_int(ZoneLabel z) noexcept { return static_cast<int>(z); }

inline ZoneLabel zone_from_int(int v) {
  if (v < 0 || v >= kZoneCount) throw ConfigError("invalid zone label " + std::to_string(v));
  return static_cast<ZoneLabel>(v);
}

/// Inside is p_x <= inside_max_x, outside is p_x >= outside_min_x.
struct ZoneThresholds {
  double inside_max_x = -6.0;
  double outside_min_x = 2.0;

  void validate() const {
    if (!std::isfinite(inside_max_x) || !std::isfinite(outside_min_x))
      throw ConfigError("zone thresholds must be finite");
    if (!(inside_max_x < outside_min_x)) throw ConfigError("inside_max_x must be < outside_min_x");
  }

  ZoneLabel classify(double p_x) const noexcept {
    if (p_x <= inside_max_x) return ZoneLabel::Inside;
    if (p_x >= outside_min_x) return ZoneLabel::Outside;
    return ZoneLabel::Transition;
  }
};

inline std::vector<ZoneLabel> derive_labels(std::span<const double> p_x, const ZoneThresholds& thresholds) {
  thresholds.validate();
  std::vector<ZoneLabel> out;
  out.reserve(p_x.size());
  for (double p : p_x) out.push_back(thresholds.classify(p));
  return out;
}

struct TruthSample {
  std::int64_t tick = 0;
  CarState state;
  ZoneLabel label = ZoneLabel::Outside;

  friend bool operator==(const TruthSample&, const TruthSample&) = default;
};

struct GroundTruthTrack {
  std::vector<TruthSample> samples;

  std::size_t size() const noexcept { return samples.size(); }

  std::vector<double> positions() const {
    std::vector<double> p;
    p.reserve(samples.size());
    for (const auto& s : samples) p.push_back(s.state.p_x);
    return p;
  }

  std::vector<ZoneLabel> labels() const {
    std::vector<ZoneLabel> l;
    l.reserve(samples.size());
    for (const auto& s : samples) l.push_back(s.label);
    return l;
  }

  /// Recomputes every label from the positions.
  void relabel(const ZoneThresholds& thresholds) {
    thresholds.validate();
    for (auto& s : samples) s.label = thresholds.classify(s.state.p_x);
  }

  friend bool operator==(const GroundTruthTrack&, const GroundTruthTrack&) = default;
};

/// Throws unless `truth` lives on exactly the tick grid of `series`.
inline void check_same_grid(const MeasurementSeries& series, const GroundTruthTrack& truth) {
  if (series.frames.size() != truth.samples.size())
    throw ConfigError("ground truth and measurements differ in length");
  for (std::size_t i = 0; i < truth.samples.size(); ++i)
    if (series.frames[i].tick != truth.samples[i].tick)
      throw ConfigError("ground truth tick " + std::to_string(truth.samples[i].tick) +
                        " does not match measurement tick " + std::to_string(series.frames[i].tick));
}

}  // namespace rssiloc
