#pragma once

// Feature construction for the zone classifiers: per-tick base features from
// filter estimates or raw RSSI, causal memory windows, and prescalers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "rssiloc/channel.hpp"
#include "rssiloc/error.hpp"
#include "rssiloc/matrix.hpp"
#include "rssiloc/model.hpp"
#include "rssiloc/pf.hpp"

namespace rssiloc {

enum class FeatureSource { FilterEstimates, RawRssi };

inline std::string to_string(FeatureSource s) { return s == FeatureSource::FilterEstimates ? "filtered" : "raw"; }

inline FeatureSource feature_source_from_string(const std::string& s) {
  if (s == "filtered") return FeatureSource::FilterEstimates;
  if (s == "raw") return FeatureSource::RawRssi;
  throw ConfigError("unknown feature source '" + s + "'");
}

struct FeatureSelection {
  bool pos_mean = true;
  bool pos_var = false;
  bool vel_mean = false;
  FeatureSource source = FeatureSource::FilterEstimates;
  /// Use the standard deviation of the position estimate instead of its variance.
  bool pos_spread_as_std = false;

  void validate() const {
    if (source == FeatureSource::FilterEstimates && !(pos_mean || pos_var || vel_mean))
      throw ConfigError("feature selection is empty");
  }

  std::size_t width() const noexcept {
    return static_cast<std::size_t>(pos_mean) + static_cast<std::size_t>(pos_var) + static_cast<std::size_t>(vel_mean);
  }

  /// "pos", "pos+var", "pos+var+vel", ...
  std::string name() const {
    std::string n;
    auto add = [&](const char* part) {
      if (!n.empty()) n += '+';
      n += part;
    };
    if (pos_mean) add("pos");
    if (pos_var) add("var");
    if (vel_mean) add("vel");
    return n;
  }

  static FeatureSelection from_name(const std::string& name) {
    FeatureSelection sel{false, false, false};
    std::size_t start = 0;
    while (start <= name.size()) {
      const auto end = std::min(name.find('+', start), name.size());
      const auto part = name.substr(start, end - start);
      if (part == "pos") sel.pos_mean = true;
      else if (part == "var") sel.pos_var = true;
      else if (part == "vel") sel.vel_mean = true;
      else throw ConfigError("unknown feature '" + part + "' (expected pos, var, vel)");
      start = end + 1;
    }
    sel.validate();
    return sel;
  }
};

/// One row per estimate with the selected columns in the order
/// (position mean, position variance, velocity mean).
inline Matrix build_feature_track(const EstimateTrack& track, const FeatureSelection& sel) {
  sel.validate();
  if (sel.source != FeatureSource::FilterEstimates)
    throw ConfigError("build_feature_track needs source=filtered");
  Matrix out(track.size(), sel.width());
  for (std::size_t t = 0; t < track.size(); ++t) {
    std::size_t c = 0;
    const auto& e = track[t];
    if (sel.pos_mean) out(t, c++) = e.mean.p_x;
    if (sel.pos_var) out(t, c++) = sel.pos_spread_as_std ? std::sqrt(e.var_p) : e.var_p;
    if (sel.vel_mean) out(t, c++) = e.mean.v_x;
  }
  return out;
}

/// One column per sensor; a missing reading becomes that sensor's floor.
inline Matrix build_raw_features(const MeasurementSeries& series, const SensorArray& array) {
  series.validate(array);
  Matrix out(series.frames.size(), array.size());
  for (std::size_t t = 0; t < series.frames.size(); ++t)
    for (std::size_t s = 0; s < array.size(); ++s) out(t, s) = series.frames[t].readings[s].value_or(array[s].floor_dbm);
  return out;
}

/// Row t becomes base rows t-N+1 .. t concatenated, oldest first. Rows
/// before the start replicate the first base row.
inline Matrix toeplitz_window(const Matrix& base, std::size_t memory) {
  if (memory < 1) throw ConfigError("memory length must be >= 1");
  const std::size_t w = base.cols();
  Matrix out(base.rows(), w * memory);
  for (std::size_t t = 0; t < base.rows(); ++t) {
    auto dst = out.row(t);
    for (std::size_t k = 0; k < memory; ++k) {
      const std::size_t lag = memory - 1 - k;
      const std::size_t src = t >= lag ? t - lag : 0;
      const auto r = base.row(src);
      std::copy(r.begin(), r.end(), dst.begin() + static_cast<std::ptrdiff_t>(k * w));
    }
  }
  return out;
}

struct LabeledFeatureMatrix {
  Matrix rows;
  std::vector<ZoneLabel> labels;
  std::size_t n_base_features = 0;
  std::size_t memory = 1;
};

inline LabeledFeatureMatrix make_labeled(const Matrix& base, std::span<const ZoneLabel> labels, std::size_t memory) {
  if (labels.size() != base.rows()) throw ConfigError("feature rows and labels differ in length");
  LabeledFeatureMatrix m;
  m.rows = toeplitz_window(base, memory);
  m.labels.assign(labels.begin(), labels.end());
  m.n_base_features = base.cols();
  m.memory = memory;
  return m;
}

// ---------------------------------------------------------------------------
// Scalers

enum class ScalerKind { Standard, Robust, PowerTransform };

inline std::string to_string(ScalerKind k) {
  switch (k) {
    case ScalerKind::Standard: return "standard";
    case ScalerKind::Robust: return "robust";
    case ScalerKind::PowerTransform: return "power";
  }
  return "standard";
}

inline ScalerKind scaler_kind_from_string(const std::string& s) {
  if (s == "standard") return ScalerKind::Standard;
  if (s == "robust") return ScalerKind::Robust;
  if (s == "power") return ScalerKind::PowerTransform;
  throw ConfigError("unknown scaler '" + s + "' (expected standard, robust, power)");
}

inline double yeo_johnson(double x, double lambda) {
  if (x >= 0.0) {
    if (std::abs(lambda) < 1e-12) return std::log1p(x);
    return (std::pow(x + 1.0, lambda) - 1.0) / lambda;
  }
  if (std::abs(lambda - 2.0) < 1e-12) return -std::log1p(-x);
  return -(std::pow(1.0 - x, 2.0 - lambda) - 1.0) / (2.0 - lambda);
}

/// Profile log-likelihood of lambda under a Gaussian model of the
/// transformed sample (variance at its MLE).
inline double yeo_johnson_log_likelihood(std::span<const double> x, double lambda) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mean += (y[i] = yeo_johnson(x[i], lambda));
  mean /= n;
  double var = 0.0, jac = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    var += (y[i] - mean) * (y[i] - mean);
    jac += std::copysign(std::log1p(std::abs(x[i])), x[i]);
  }
  var /= n;
  if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(var) + (lambda - 1.0) * jac;
}

/// Golden-section maximization of the log-likelihood over [lo, hi].
inline double fit_yeo_johnson_lambda(std::span<const double> x, double lo = -5.0, double hi = 5.0, double tol = 1e-4) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = yeo_johnson_log_likelihood(x, c), fd = yeo_johnson_log_likelihood(x, d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = yeo_johnson_log_likelihood(x, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = yeo_johnson_log_likelihood(x, d);
    }
  }
  return 0.5 * (a + b);
}

/// Per-feature affine map (x - center) / scale, preceded by a Yeo-Johnson
/// transform for PowerTransform. A zero spread becomes scale 1, so constant
/// training features map to 0.
struct Scaler {
  ScalerKind kind = ScalerKind::Standard;
  std::vector<double> center;
  std::vector<double> scale;
  std::vector<double> lambda;  // PowerTransform only

  std::size_t width() const noexcept { return center.size(); }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"kind", to_string(kind)}, {"center", center}, {"scale", scale}};
    if (kind == ScalerKind::PowerTransform) j["lambda"] = lambda;
    return j;
  }

  static Scaler from_json(const nlohmann::json& j) {
    Scaler s;
    try {
      s.kind = scaler_kind_from_string(j.at("kind").get<std::string>());
      s.center = j.at("center").get<std::vector<double>>();
      s.scale = j.at("scale").get<std::vector<double>>();
      if (s.kind == ScalerKind::PowerTransform) s.lambda = j.at("lambda").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("scaler: ") + e.what());
    }
    if (s.scale.size() != s.center.size() ||
        (s.kind == ScalerKind::PowerTransform && s.lambda.size() != s.center.size()))
      throw ConfigError("scaler: parameter count mismatch");
    return s;
  }

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

namespace detail {

inline void check_finite(const Matrix& m) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw ConfigError("non-finite feature value");
}

inline std::pair<double, double> mean_and_pstd(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

}  // namespace detail

inline Scaler fit_scaler(ScalerKind kind, const Matrix& training) {
  if (training.rows() < 2) throw ConfigError("scaler needs at least 2 training rows");
  detail::check_finite(training);
  Scaler s;
  s.kind = kind;
  const std::size_t w = training.cols();
  s.center.resize(w);
  s.scale.resize(w);
  if (kind == ScalerKind::PowerTransform) s.lambda.resize(w);
  for (std::size_t c = 0; c < w; ++c) {
    auto col = training.column(c);
    double center = 0.0, spread = 0.0;
    switch (kind) {
      case ScalerKind::Standard:
        std::tie(center, spread) = detail::mean_and_pstd(col);
        break;
      case ScalerKind::Robust:
        center = percentile(col, 50.0);
        spread = percentile(col, 75.0) - percentile(col, 25.0);
        break;
      case ScalerKind::PowerTransform: {
        const bool constant = std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
        const double lambda = constant ? 1.0 : fit_yeo_johnson_lambda(col);
        s.lambda[c] = lambda;
        for (double& v : col) v = yeo_johnson(v, lambda);
        std::tie(center, spread) = detail::mean_and_pstd(col);
        break;
      }
    }
    s.center[c] = center;
    s.scale[c] = spread > 0.0 ? spread : 1.0;
  }
  return s;
}

inline Matrix apply_scaler(const Scaler& s, const Matrix& rows) {
  if (rows.cols() != s.width() && !rows.empty()) throw ConfigError("scaler width does not match feature width");
  detail::check_finite(rows);
  Matrix out = rows;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) {
      double v = out(r, c);
      if (s.kind == ScalerKind::PowerTransform) v = yeo_johnson(v, s.lambda[c]);
      out(r, c) = (v - s.center[c]) / s.scale[c];
    }
  return out;
}

/// Undoes apply_scaler for the affine kinds.
inline Matrix inverse_scaler(const Scaler& s, const Matrix& rows) {
  if (s.kind == ScalerKind::PowerTransform) throw ConfigError("inverse is only defined for standard and robust scalers");
  if (rows.cols() != s.width() && !rows.empty()) throw ConfigError("scaler width does not match feature width");
  Matrix out = rows;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) * s.scale[c] + s.center[c];
  return out;
}

}  // namespace rssiloc
