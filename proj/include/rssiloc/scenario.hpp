#pragma once

// Scenario configuration: sensor geometry and calibration, zone thresholds,
// channel and filter parameters, plus the synthetic-campaign settings.
// Loaded from and saved to JSON.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rssiloc/channel.hpp"
#include "rssiloc/error.hpp"
#include "rssiloc/io.hpp"
#include "rssiloc/model.hpp"
#include "rssiloc/pf.hpp"
#include "rssiloc/seeding.hpp"
#include "rssiloc/synth.hpp"

namespace rssiloc {

enum class CalibrationMode { None, PerRun, Global };

inline std::string to_string(CalibrationMode m) {
  switch (m) {
    case CalibrationMode::None: return "none";
    case CalibrationMode::PerRun: return "per_run";
    case CalibrationMode::Global: return "global";
  }
  return "none";
}

inline CalibrationMode calibration_mode_from_string(const std::string& s) {
  if (s == "none") return CalibrationMode::None;
  if (s == "per_run") return CalibrationMode::PerRun;
  if (s == "global") return CalibrationMode::Global;
  throw ConfigError("unknown calibration mode '" + s + "'");
}

/// How the six-run synthetic campaign varies between runs.
struct DatasetSpec {
  int n_runs = 6;
  int min_round_trips = 2;
  int max_round_trips = 5;
  /// Each run's cruise speed is scaled by a factor drawn from [1-j, 1+j].
  double speed_jitter = 0.2;

  void validate() const {
    if (n_runs < 1) throw ConfigError("dataset.n_runs must be >= 1");
    if (min_round_trips < 0 || max_round_trips < min_round_trips)
      throw ConfigError("dataset round trip range is invalid");
    if (!(speed_jitter >= 0.0 && speed_jitter < 1.0)) throw ConfigError("dataset.speed_jitter must be in [0, 1)");
  }
};

struct Scenario {
  double tick_interval_s = kDefaultTickIntervalS;
  TrackGeometry track{0.0, 0.5};
  SensorArray sensors;
  ZoneThresholds zone;
  ChannelParams channel;
  FilterConfig filter;
  CalibrationMode calibration = CalibrationMode::None;
  CalibrationOptions calibration_options;
  TrajectoryProfile trajectory;
  NoiseSpec noise;
  DatasetSpec dataset;

  void validate() const {
    if (!(tick_interval_s > 0.0)) throw ConfigError("tick_interval_s must be > 0");
    if (sensors.empty()) throw ConfigError("sensors: at least one sensor is required");
    zone.validate();
    channel.validate();
    filter.validate();
    trajectory.validate(zone);
    noise.validate();
    dataset.validate();
  }
};

/// Six receivers around the chamber door and along the track, alternating
/// sides at 1.5 m lateral offset.
inline Scenario default_scenario() {
  Scenario sc;
  const double ref = -50.0, floor = -80.0;
  sc.sensors = SensorArray({{1, {-8.0, 1.5, 1.0}, ref, floor},
                            {2, {-4.0, -1.5, 1.0}, ref, floor},
                            {3, {-0.5, 1.5, 1.0}, ref, floor},
                            {4, {0.5, -1.5, 1.0}, ref, floor},
                            {5, {4.0, 1.5, 1.0}, ref, floor},
                            {6, {8.0, -1.5, 1.0}, ref, floor}});
  return sc;
}

/// Same layout with receivers pushed 4 m off the track axis, where the
/// transmitter pattern changes most with position.
inline Scenario offcenter_scenario() {
  Scenario sc = default_scenario();
  std::vector<SensorInfo> s = sc.sensors.sensors();
  for (auto& info : s) info.position.y = info.position.y > 0 ? 4.0 : -4.0;
  sc.sensors = SensorArray(std::move(s));
  return sc;
}

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError(section + "." + key + ": unknown field");
}

inline double get_number(const json& j, const std::string& section, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(section + "." + key + ": expected a number");
  return v.get<double>();
}

inline double require_number(const json& j, const std::string& section, const char* key) {
  if (!j.contains(key)) throw ConfigError(section + "." + key + ": required field missing");
  return get_number(j, section, key, 0.0);
}

inline std::int64_t get_integer(const json& j, const std::string& section, const char* key, std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(section + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

inline std::uint64_t get_seed(const json& j, const std::string& section, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(section + "." + key + ": expected a non-negative integer");
}

inline Interval get_interval(const json& j, const std::string& section, const char* key, Interval fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(section + "." + key + ": expected [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline Vec3 get_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  for (const auto& c : v)
    if (!c.is_number()) throw ConfigError(where + ": expected [x, y, z]");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline AntennaPattern parse_pattern(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "directional") return AntennaPattern::directional();
    if (s == "omni" || s == "omnidirectional") return AntennaPattern::omnidirectional();
    throw ConfigError("channel.pattern: unknown pattern '" + s + "'");
  }
  if (!v.is_array()) throw ConfigError("channel.pattern: expected an array of bands or a pattern name");
  std::vector<PatternBand> bands;
  for (const auto& b : v) {
    check_keys(b, "channel.pattern[]", {"angle_max_rad", "gain_db"});
    bands.push_back({require_number(b, "channel.pattern[]", "angle_max_rad"),
                     require_number(b, "channel.pattern[]", "gain_db")});
  }
  try {
    return AntennaPattern(std::move(bands));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("channel.pattern: ") + e.what());
  }
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_integer;
  using detail::get_number;
  check_keys(j, "scenario",
             {"tick_interval_s", "track", "sensors", "zone", "channel", "filter", "calibration", "trajectory", "noise",
              "dataset"});
  Scenario sc;
  sc.tick_interval_s = get_number(j, "scenario", "tick_interval_s", sc.tick_interval_s);

  if (j.contains("track")) {
    const auto& t = j.at("track");
    check_keys(t, "track", {"y", "z"});
    sc.track.y = get_number(t, "track", "y", sc.track.y);
    sc.track.z = get_number(t, "track", "z", sc.track.z);
  }

  if (!j.contains("sensors")) throw ConfigError("sensors: required field missing");
  const auto& js = j.at("sensors");
  if (!js.is_array()) throw ConfigError("sensors: expected an array");
  std::vector<SensorInfo> sensors;
  for (const auto& s : js) {
    check_keys(s, "sensors[]", {"id", "position", "ref_power_dbm", "floor_dbm"});
    if (!s.contains("id") || !s.at("id").is_number_integer()) throw ConfigError("sensors[].id: required integer");
    if (!s.contains("position")) throw ConfigError("sensors[].position: required field missing");
    SensorInfo info;
    info.id = s.at("id").get<int>();
    info.position = detail::get_vec3(s.at("position"), "sensors[].position");
    info.ref_power_dbm = get_number(s, "sensors[]", "ref_power_dbm", kDefaultRefPowerDbm);
    info.floor_dbm = get_number(s, "sensors[]", "floor_dbm", kDefaultFloorDbm);
    sensors.push_back(info);
  }
  sc.sensors = SensorArray(std::move(sensors));

  if (!j.contains("zone")) throw ConfigError("zone: required field missing");
  {
    const auto& z = j.at("zone");
    check_keys(z, "zone", {"inside_max_x", "outside_min_x"});
    sc.zone.inside_max_x = detail::require_number(z, "zone", "inside_max_x");
    sc.zone.outside_min_x = detail::require_number(z, "zone", "outside_min_x");
  }

  if (j.contains("channel")) {
    const auto& c = j.at("channel");
    check_keys(c, "channel", {"pathloss_exponent", "likelihood_variance", "pattern"});
    sc.channel.pathloss_exponent = get_number(c, "channel", "pathloss_exponent", sc.channel.pathloss_exponent);
    sc.channel.likelihood_variance = get_number(c, "channel", "likelihood_variance", sc.channel.likelihood_variance);
    if (c.contains("pattern")) sc.channel.pattern = detail::parse_pattern(c.at("pattern"));
  }

  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    check_keys(f, "filter", {"n_particles", "init_pos_range", "init_vel_range", "driving_cov", "resampling", "seed"});
    const auto n = get_integer(f, "filter", "n_particles", static_cast<std::int64_t>(sc.filter.n_particles));
    if (n < 2) throw ConfigError("filter.n_particles: must be >= 2");
    sc.filter.n_particles = static_cast<std::size_t>(n);
    sc.filter.init_pos_range = detail::get_interval(f, "filter", "init_pos_range", sc.filter.init_pos_range);
    sc.filter.init_vel_range = detail::get_interval(f, "filter", "init_vel_range", sc.filter.init_vel_range);
    if (f.contains("driving_cov")) {
      const auto& m = f.at("driving_cov");
      if (!m.is_array() || m.size() != 2 || !m[0].is_array() || !m[1].is_array() || m[0].size() != 2 ||
          m[1].size() != 2)
        throw ConfigError("filter.driving_cov: expected [[a, b], [c, d]]");
      for (int r = 0; r < 2; ++r)
        for (int col = 0; col < 2; ++col) {
          if (!m[r][col].is_number()) throw ConfigError("filter.driving_cov: expected numbers");
          sc.filter.driving_cov[static_cast<std::size_t>(2 * r + col)] = m[r][col].get<double>();
        }
    }
    if (f.contains("resampling")) {
      if (!f.at("resampling").is_string()) throw ConfigError("filter.resampling: expected a string");
      sc.filter.resampling = resampling_from_string(f.at("resampling").get<std::string>());
    }
    sc.filter.seed = detail::get_seed(f, "filter", "seed", sc.filter.seed);
  }

  if (j.contains("calibration")) {
    const auto& c = j.at("calibration");
    check_keys(c, "calibration", {"mode", "floor_percentile"});
    if (c.contains("mode")) {
      if (!c.at("mode").is_string()) throw ConfigError("calibration.mode: expected a string");
      sc.calibration = calibration_mode_from_string(c.at("mode").get<std::string>());
    }
    sc.calibration_options.floor_percentile =
        get_number(c, "calibration", "floor_percentile", sc.calibration_options.floor_percentile);
    if (!(sc.calibration_options.floor_percentile >= 0.0 && sc.calibration_options.floor_percentile <= 100.0))
      throw ConfigError("calibration.floor_percentile: must be in [0, 100]");
  }

  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    check_keys(t, "trajectory", {"x_out", "x_in", "cruise_speed", "accel", "dwell_ticks", "n_round_trips"});
    auto& p = sc.trajectory;
    p.x_out = get_number(t, "trajectory", "x_out", p.x_out);
    p.x_in = get_number(t, "trajectory", "x_in", p.x_in);
    p.cruise_speed = get_number(t, "trajectory", "cruise_speed", p.cruise_speed);
    p.accel = get_number(t, "trajectory", "accel", p.accel);
    p.dwell_ticks = static_cast<int>(get_integer(t, "trajectory", "dwell_ticks", p.dwell_ticks));
    p.n_round_trips = static_cast<int>(get_integer(t, "trajectory", "n_round_trips", p.n_round_trips));
  }

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, "noise", {"rssi_noise_var", "dropout_prob", "quantization_step"});
    sc.noise.rssi_noise_var = get_number(n, "noise", "rssi_noise_var", sc.noise.rssi_noise_var);
    sc.noise.dropout_prob = get_number(n, "noise", "dropout_prob", sc.noise.dropout_prob);
    sc.noise.quantization_step = get_number(n, "noise", "quantization_step", sc.noise.quantization_step);
  }

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "dataset", {"n_runs", "min_round_trips", "max_round_trips", "speed_jitter"});
    auto& ds = sc.dataset;
    ds.n_runs = static_cast<int>(get_integer(d, "dataset", "n_runs", ds.n_runs));
    ds.min_round_trips = static_cast<int>(get_integer(d, "dataset", "min_round_trips", ds.min_round_trips));
    ds.max_round_trips = static_cast<int>(get_integer(d, "dataset", "max_round_trips", ds.max_round_trips));
    ds.speed_jitter = get_number(d, "dataset", "speed_jitter", ds.speed_jitter);
  }

  sc.validate();
  return sc;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json j;
  j["tick_interval_s"] = sc.tick_interval_s;
  j["track"] = {{"y", sc.track.y}, {"z", sc.track.z}};
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& s : sc.sensors.sensors())
    sensors.push_back({{"id", s.id},
                       {"position", {s.position.x, s.position.y, s.position.z}},
                       {"ref_power_dbm", s.ref_power_dbm},
                       {"floor_dbm", s.floor_dbm}});
  j["sensors"] = sensors;
  j["zone"] = {{"inside_max_x", sc.zone.inside_max_x}, {"outside_min_x", sc.zone.outside_min_x}};
  nlohmann::json pattern = nlohmann::json::array();
  for (const auto& b : sc.channel.pattern.bands())
    pattern.push_back({{"angle_max_rad", b.angle_max_rad}, {"gain_db", b.gain_db}});
  j["channel"] = {{"pathloss_exponent", sc.channel.pathloss_exponent},
                  {"likelihood_variance", sc.channel.likelihood_variance},
                  {"pattern", pattern}};
  const auto& c = sc.filter.driving_cov;
  j["filter"] = {{"n_particles", sc.filter.n_particles},
                 {"init_pos_range", {sc.filter.init_pos_range.lo, sc.filter.init_pos_range.hi}},
                 {"init_vel_range", {sc.filter.init_vel_range.lo, sc.filter.init_vel_range.hi}},
                 {"driving_cov", {{c[0], c[1]}, {c[2], c[3]}}},
                 {"resampling", to_string(sc.filter.resampling)},
                 {"seed", sc.filter.seed}};
  j["calibration"] = {{"mode", to_string(sc.calibration)},
                      {"floor_percentile", sc.calibration_options.floor_percentile}};
  const auto& t = sc.trajectory;
  j["trajectory"] = {{"x_out", t.x_out},         {"x_in", t.x_in},
                     {"cruise_speed", t.cruise_speed}, {"accel", t.accel},
                     {"dwell_ticks", t.dwell_ticks}, {"n_round_trips", t.n_round_trips}};
  j["noise"] = {{"rssi_noise_var", sc.noise.rssi_noise_var},
                {"dropout_prob", sc.noise.dropout_prob},
                {"quantization_step", sc.noise.quantization_step}};
  j["dataset"] = {{"n_runs", sc.dataset.n_runs},
                  {"min_round_trips", sc.dataset.min_round_trips},
                  {"max_round_trips", sc.dataset.max_round_trips},
                  {"speed_jitter", sc.dataset.speed_jitter}};
  return j;
}

inline Scenario parse_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }
  return scenario_from_json(j);
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path));
}

inline void save_scenario(const std::filesystem::path& path, const Scenario& sc) {
  write_file_atomic(path, scenario_to_json(sc).dump(2) + "\n");
}

/// Stable hex digest of the canonical JSON form.
inline std::string scenario_hash(const Scenario& sc) {
  const auto h = fnv1a(scenario_to_json(sc).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rssiloc
