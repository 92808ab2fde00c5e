#pragma once

// CSV formats:
//   measurements   tick,sensor_id,rssi_dbm      (empty rssi_dbm = no reading)
//   ground truth   tick,p_x,v_x
//   estimates      tick,mu_px,mu_vx,var_px,var_vx,degenerate
// Velocities are in m/tick.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rssiloc/error.hpp"
#include "rssiloc/model.hpp"
#include "rssiloc/pf.hpp"

namespace rssiloc {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline void expect_header(const std::vector<std::string>& lines, std::string_view header,
                          const std::filesystem::path& path) {
  if (lines.empty() || trim(lines.front()) != header)
    throw IoError(path.string() + ": expected header '" + std::string(header) + "'");
}

[[noreturn]] inline void row_error(const std::filesystem::path& path, std::size_t row, const std::string& what) {
  throw IoError(path.string() + ": row " + std::to_string(row) + ": " + what);
}

}  // namespace detail

/// Writes text to `path` via a temporary file and rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot write " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Measurements

inline MeasurementSeries parse_measurements(const std::vector<std::string>& lines, const SensorArray& array,
                                            const std::filesystem::path& origin = "<measurements>",
                                            double tick_interval_s = kDefaultTickIntervalS) {
  detail::expect_header(lines, "tick,sensor_id,rssi_dbm", origin);
  std::map<std::int64_t, MeasurementFrame> frames;
  std::int64_t last_tick = 0;
  bool have_last = false;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (detail::trim(lines[row]).empty()) continue;
    const auto cols = detail::split_csv(lines[row]);
    if (cols.size() != 3) detail::row_error(origin, row, "expected 3 columns");
    std::int64_t tick = 0;
    int id = 0;
    if (!detail::parse_number(cols[0], tick)) detail::row_error(origin, row, "malformed tick");
    if (!detail::parse_number(cols[1], id)) detail::row_error(origin, row, "malformed sensor_id");
    const auto idx = array.index_of(id);
    if (!idx) detail::row_error(origin, row, "unknown sensor_id " + std::to_string(id));
    // Rows of one tick must be contiguous; a tick that goes backwards after
    // its group closed breaks monotonicity.
    if (have_last && tick < last_tick)
      detail::row_error(origin, row, "tick " + std::to_string(tick) + " is not monotone");
    last_tick = tick;
    have_last = true;
    auto& frame = frames[tick];
    if (frame.readings.empty()) {
      frame.tick = tick;
      frame.readings.resize(array.size());
    }
    const auto value = detail::trim(cols[2]);
    if (value.empty()) continue;
    double rssi = 0.0;
    if (!detail::parse_number(value, rssi) || !std::isfinite(rssi)) detail::row_error(origin, row, "malformed rssi_dbm");
    frame.readings[*idx] = rssi;
  }
  MeasurementSeries series;
  series.tick_interval_s = tick_interval_s;
  series.frames.reserve(frames.size());
  for (auto& [tick, frame] : frames) series.frames.push_back(std::move(frame));
  return series;
}

inline MeasurementSeries load_measurements(const std::filesystem::path& path, const SensorArray& array,
                                           double tick_interval_s = kDefaultTickIntervalS) {
  return parse_measurements(detail::read_lines(path), array, path, tick_interval_s);
}

/// Every (tick, sensor) pair gets a row, absent readings with an empty field,
/// so frames with no readings survive a round trip.
inline std::string format_measurements(const MeasurementSeries& series, const SensorArray& array) {
  series.validate(array);
  std::string out = "tick,sensor_id,rssi_dbm\n";
  for (const auto& f : series.frames)
    for (std::size_t s = 0; s < array.size(); ++s) {
      out += std::to_string(f.tick);
      out += ',';
      out += std::to_string(array[s].id);
      out += ',';
      if (f.readings[s]) out += format_double(*f.readings[s]);
      out += '\n';
    }
  return out;
}

inline void save_measurements(const std::filesystem::path& path, const MeasurementSeries& series,
                              const SensorArray& array) {
  write_file_atomic(path, format_measurements(series, array));
}

// ---------------------------------------------------------------------------
// Ground truth

inline GroundTruthTrack load_ground_truth(const std::filesystem::path& path, const ZoneThresholds& zone) {
  const auto lines = detail::read_lines(path);
  detail::expect_header(lines, "tick,p_x,v_x", path);
  GroundTruthTrack track;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (detail::trim(lines[row]).empty()) continue;
    const auto cols = detail::split_csv(lines[row]);
    if (cols.size() != 3) detail::row_error(path, row, "expected 3 columns");
    TruthSample s;
    if (!detail::parse_number(cols[0], s.tick)) detail::row_error(path, row, "malformed tick");
    if (!detail::parse_number(cols[1], s.state.p_x) || !std::isfinite(s.state.p_x))
      detail::row_error(path, row, "malformed p_x");
    if (!detail::parse_number(cols[2], s.state.v_x) || !std::isfinite(s.state.v_x))
      detail::row_error(path, row, "malformed v_x");
    if (!track.samples.empty() && s.tick <= track.samples.back().tick)
      detail::row_error(path, row, "ticks must be strictly increasing");
    s.label = zone.classify(s.state.p_x);
    track.samples.push_back(s);
  }
  return track;
}

inline std::string format_ground_truth(const GroundTruthTrack& track) {
  std::string out = "tick,p_x,v_x\n";
  for (const auto& s : track.samples)
    out += std::to_string(s.tick) + ',' + format_double(s.state.p_x) + ',' + format_double(s.state.v_x) + '\n';
  return out;
}

inline void save_ground_truth(const std::filesystem::path& path, const GroundTruthTrack& track) {
  write_file_atomic(path, format_ground_truth(track));
}

// ---------------------------------------------------------------------------
// Estimates

inline std::string format_estimates(const EstimateTrack& track) {
  std::string out = "tick,mu_px,mu_vx,var_px,var_vx,degenerate\n";
  for (const auto& e : track)
    out += std::to_string(e.tick) + ',' + format_double(e.mean.p_x) + ',' + format_double(e.mean.v_x) + ',' +
           format_double(e.var_p) + ',' + format_double(e.var_v) + ',' + (e.degenerate ? "1" : "0") + '\n';
  return out;
}

inline void save_estimates(const std::filesystem::path& path, const EstimateTrack& track) {
  write_file_atomic(path, format_estimates(track));
}

inline EstimateTrack load_estimates(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  detail::expect_header(lines, "tick,mu_px,mu_vx,var_px,var_vx,degenerate", path);
  EstimateTrack track;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (detail::trim(lines[row]).empty()) continue;
    const auto cols = detail::split_csv(lines[row]);
    if (cols.size() != 6) detail::row_error(path, row, "expected 6 columns");
    Estimate e;
    int degenerate = 0;
    if (!detail::parse_number(cols[0], e.tick) || !detail::parse_number(cols[1], e.mean.p_x) ||
        !detail::parse_number(cols[2], e.mean.v_x) || !detail::parse_number(cols[3], e.var_p) ||
        !detail::parse_number(cols[4], e.var_v) || !detail::parse_number(cols[5], degenerate))
      detail::row_error(path, row, "malformed value");
    e.degenerate = degenerate != 0;
    track.push_back(e);
  }
  return track;
}

}  // namespace rssiloc
