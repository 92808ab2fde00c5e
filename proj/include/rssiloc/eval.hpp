#pragma once

// Leave-three-runs-out evaluation: every 3-of-6 training triple, each held-out
// run scored on its own, aggregated per sweep cell.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "rssiloc/channel.hpp"
#include "rssiloc/classify.hpp"
#include "rssiloc/dataset.hpp"
#include "rssiloc/error.hpp"
#include "rssiloc/features.hpp"
#include "rssiloc/io.hpp"
#include "rssiloc/pf.hpp"
#include "rssiloc/scenario.hpp"
#include "rssiloc/seeding.hpp"

namespace rssiloc {

// ---------------------------------------------------------------------------
// Splits and metrics

struct Split {
  std::array<int, 3> train{};
  std::array<int, 3> test{};
};

struct SplitPlan {
  std::vector<Split> splits;

  std::size_t evaluation_count() const noexcept { return splits.size() * 3; }
};

/// All 20 unordered training triples of six runs, in lexicographic order.
inline SplitPlan enumerate_splits(std::span<const int> run_ids) {
  if (run_ids.size() != 6) throw ConfigError("evaluation needs exactly 6 runs, got " + std::to_string(run_ids.size()));
  std::vector<int> ids(run_ids.begin(), run_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ConfigError("run ids must be distinct");
  SplitPlan plan;
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b)
      for (int c = b + 1; c < 6; ++c) {
        Split s;
        s.train = {ids[static_cast<std::size_t>(a)], ids[static_cast<std::size_t>(b)], ids[static_cast<std::size_t>(c)]};
        std::size_t k = 0;
        for (int r = 0; r < 6; ++r)
          if (r != a && r != b && r != c) s.test[k++] = ids[static_cast<std::size_t>(r)];
        plan.splits.push_back(s);
      }
  return plan;
}

inline double accuracy(std::span<const ZoneLabel> predicted, std::span<const ZoneLabel> truth) {
  if (predicted.size() != truth.size()) throw ConfigError("accuracy: length mismatch");
  if (truth.empty()) throw ConfigError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// (correct, total) over the rows whose true label is `label`.
inline std::pair<std::size_t, std::size_t> recall_counts(std::span<const ZoneLabel> predicted,
                                                         std::span<const ZoneLabel> truth, ZoneLabel label) {
  if (predicted.size() != truth.size()) throw ConfigError("recall: length mismatch");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == label) {
      ++total;
      hit += predicted[i] == label;
    }
  return {hit, total};
}

// ---------------------------------------------------------------------------
// Per-run preparation

/// Filter output, raw RSSI features and labels of one run.
struct PreparedRun {
  int run_id = 0;
  std::vector<std::int64_t> ticks;
  EstimateTrack estimates;
  Matrix raw;
  std::vector<ZoneLabel> labels;
};

inline std::uint64_t filter_seed_for_run(const Scenario& sc, int run_id) {
  return derive_seed(sc.filter.seed, "run" + std::to_string(run_id));
}

/// Sensor array the filter should use for `run`, after calibration.
inline SensorArray sensors_for_run(const Scenario& sc, const Dataset& ds, std::size_t run_index) {
  switch (sc.calibration) {
    case CalibrationMode::None: return sc.sensors;
    case CalibrationMode::PerRun:
      return calibrate(ds.runs[run_index].measurements, sc.sensors, sc.calibration_options);
    case CalibrationMode::Global: {
      std::vector<MeasurementSeries> all;
      for (const auto& r : ds.runs) all.push_back(r.measurements);
      return calibrate(all, sc.sensors, sc.calibration_options);
    }
  }
  return sc.sensors;
}

/// Filters one series with an explicit sensor array and filter seed. Labels
/// stay empty when no ground truth is given.
inline PreparedRun prepare_series(const Scenario& sc, const MeasurementSeries& series, const SensorArray& sensors,
                                  std::uint64_t filter_seed, int run_id = 0, const GroundTruthTrack* truth = nullptr) {
  if (truth) check_same_grid(series, *truth);
  FilterConfig fc = sc.filter;
  fc.seed = filter_seed;
  PreparedRun p;
  p.run_id = run_id;
  p.estimates = run(series, sensors, sc.channel, fc, sc.track);
  p.raw = build_raw_features(series, sensors);
  if (truth) p.labels = truth->labels();
  for (const auto& f : series.frames) p.ticks.push_back(f.tick);
  return p;
}

inline PreparedRun prepare_run(const Scenario& sc, const Dataset& ds, std::size_t run_index) {
  const auto& data = ds.runs[run_index];
  return prepare_series(sc, data.measurements, sensors_for_run(sc, ds, run_index), filter_seed_for_run(sc, data.run_id),
                        data.run_id, &data.truth);
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < std::min<std::size_t>(jobs, count); ++w)
      workers.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline std::vector<PreparedRun> prepare_runs(const Scenario& sc, const Dataset& ds, unsigned jobs = 1) {
  std::vector<PreparedRun> out(ds.runs.size());
  detail::parallel_for(ds.runs.size(), jobs, [&](std::size_t i) { out[i] = prepare_run(sc, ds, i); });
  return out;
}

// ---------------------------------------------------------------------------
// Training and scoring of one cell

enum class ScaleOrder { BeforeWindow, AfterWindow };

struct CellSpec {
  Algorithm classifier = Algorithm::Svm;
  ScalerKind scaler = ScalerKind::Standard;
  FeatureSelection features;
  std::size_t memory = 1;
  FeatureSource source = FeatureSource::FilterEstimates;

  /// Raw-RSSI cells ignore the filtered feature selection.
  std::string key() const {
    return to_string(classifier) + "|" + to_string(scaler) + "|" +
           (source == FeatureSource::RawRssi ? std::string("rssi") : features.name()) + "|" + std::to_string(memory) +
           "|" + to_string(source);
  }
};

struct EvalOptions {
  ClassifierParams params;
  ScaleOrder order = ScaleOrder::BeforeWindow;
  /// Keep every stride-th tick of each run after windowing.
  std::size_t row_stride = 5;
};

struct TrainedSplit {
  Scaler scaler;
  Classifier model;
};

namespace detail {

inline Matrix base_features(const PreparedRun& run, const CellSpec& spec) {
  if (spec.source == FeatureSource::RawRssi) return run.raw;
  return build_feature_track(run.estimates, spec.features);
}

inline Matrix stride_rows(const Matrix& m, std::size_t stride) {
  if (stride <= 1) return m;
  Matrix out(0, m.cols());
  for (std::size_t r = 0; r < m.rows(); r += stride) out.append_row(m.row(r));
  return out;
}

inline std::vector<ZoneLabel> stride_labels(std::span<const ZoneLabel> l, std::size_t stride) {
  std::vector<ZoneLabel> out;
  for (std::size_t r = 0; r < l.size(); r += std::max<std::size_t>(stride, 1)) out.push_back(l[r]);
  return out;
}

}  // namespace detail

/// Scaled, windowed and strided feature rows of one run.
inline Matrix transform_run(const PreparedRun& run, const CellSpec& spec, const Scaler& scaler,
                            const EvalOptions& opts) {
  Matrix base = detail::base_features(run, spec);
  Matrix windowed = opts.order == ScaleOrder::BeforeWindow ? toeplitz_window(apply_scaler(scaler, base), spec.memory)
                                                           : apply_scaler(scaler, toeplitz_window(base, spec.memory));
  return detail::stride_rows(windowed, opts.row_stride);
}

/// Fits scaler and classifier on the training runs only.
inline TrainedSplit train_split(std::span<const PreparedRun* const> train_runs, const CellSpec& spec,
                                const EvalOptions& opts, std::uint64_t seed) {
  if (spec.memory < 1) throw ConfigError("memory length must be >= 1");
  Matrix fit_rows;
  for (const auto* r : train_runs) {
    Matrix base = detail::base_features(*r, spec);
    fit_rows.append_rows(opts.order == ScaleOrder::BeforeWindow ? base : toeplitz_window(base, spec.memory));
  }
  TrainedSplit t;
  t.scaler = fit_scaler(spec.scaler, fit_rows);
  Matrix x;
  std::vector<ZoneLabel> y;
  for (const auto* r : train_runs) {
    x.append_rows(transform_run(*r, spec, t.scaler, opts));
    const auto l = detail::stride_labels(r->labels, opts.row_stride);
    y.insert(y.end(), l.begin(), l.end());
  }
  t.model = Classifier::train(spec.classifier, x, y, opts.params, seed);
  return t;
}

struct EvaluationResult {
  std::array<int, 3> train{};
  int test_run = 0;
  double accuracy = 0.0;
  std::size_t n_rows = 0;
  std::size_t n_correct = 0;
  std::size_t transition_correct = 0;
  std::size_t transition_total = 0;
  std::vector<std::int64_t> ticks;  // filled when predictions are kept
  std::vector<ZoneLabel> truth;
  std::vector<ZoneLabel> predicted;
};

struct CellResult {
  CellSpec spec;
  bool failed = false;
  std::string error;
  std::vector<EvaluationResult> evaluations;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double weighted_acc = 0.0;
  double transition_recall = 0.0;
  bool best_memory = false;
};

inline void aggregate(CellResult& cell) {
  const auto& ev = cell.evaluations;
  if (ev.empty()) return;
  double s = 0.0;
  std::size_t correct = 0, rows = 0, tc = 0, tt = 0;
  for (const auto& e : ev) {
    s += e.accuracy;
    correct += e.n_correct;
    rows += e.n_rows;
    tc += e.transition_correct;
    tt += e.transition_total;
  }
  cell.mean_acc = s / static_cast<double>(ev.size());
  double v = 0.0;
  for (const auto& e : ev) v += (e.accuracy - cell.mean_acc) * (e.accuracy - cell.mean_acc);
  cell.std_acc = std::sqrt(v / static_cast<double>(ev.size()));
  cell.weighted_acc = rows > 0 ? static_cast<double>(correct) / static_cast<double>(rows) : 0.0;
  cell.transition_recall = tt > 0 ? static_cast<double>(tc) / static_cast<double>(tt) : 0.0;
}

inline std::uint64_t cell_seed(std::uint64_t master_seed, const CellSpec& spec) {
  return derive_seed(master_seed, spec.key());
}

/// Runs the full split plan for one cell. Training failures are recorded in
/// the result instead of being thrown.
inline CellResult evaluate_cell(std::span<const PreparedRun> runs, const CellSpec& spec, const EvalOptions& opts,
                                std::uint64_t master_seed, bool keep_predictions = false) {
  CellResult cell;
  cell.spec = spec;
  try {
    std::vector<int> ids;
    for (const auto& r : runs) ids.push_back(r.run_id);
    const auto plan = enumerate_splits(ids);
    auto find = [&](int id) -> const PreparedRun& {
      for (const auto& r : runs)
        if (r.run_id == id) return r;
      throw ConfigError("unknown run id " + std::to_string(id));
    };
    const std::uint64_t seed = cell_seed(master_seed, spec);
    for (std::size_t si = 0; si < plan.splits.size(); ++si) {
      const auto& split = plan.splits[si];
      const std::array<const PreparedRun*, 3> train{&find(split.train[0]), &find(split.train[1]),
                                                    &find(split.train[2])};
      const TrainedSplit trained = train_split(train, spec, opts, derive_seed(seed, si));
      for (int test_id : split.test) {
        const auto& run = find(test_id);
        const Matrix x = transform_run(run, spec, trained.scaler, opts);
        const auto truth = detail::stride_labels(run.labels, opts.row_stride);
        const auto pred = trained.model.predict(x);
        EvaluationResult e;
        e.train = split.train;
        e.test_run = test_id;
        e.accuracy = accuracy(pred, truth);
        e.n_rows = truth.size();
        for (std::size_t i = 0; i < truth.size(); ++i) e.n_correct += pred[i] == truth[i];
        std::tie(e.transition_correct, e.transition_total) = recall_counts(pred, truth, ZoneLabel::Transition);
        if (keep_predictions) {
          for (std::size_t r = 0; r < run.ticks.size(); r += std::max<std::size_t>(opts.row_stride, 1))
            e.ticks.push_back(run.ticks[r]);
          e.truth = truth;
          e.predicted = pred;
        }
        cell.evaluations.push_back(std::move(e));
      }
    }
    aggregate(cell);
  } catch (const std::exception& ex) {
    cell.failed = true;
    cell.error = ex.what();
    cell.evaluations.clear();
  }
  return cell;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepGrid {
  std::vector<Algorithm> classifiers{Algorithm::Svm, Algorithm::Knn, Algorithm::RandomForest};
  std::vector<ScalerKind> scalers{ScalerKind::Standard, ScalerKind::PowerTransform};
  std::vector<FeatureSelection> features{FeatureSelection::from_name("pos"), FeatureSelection::from_name("pos+var"),
                                         FeatureSelection::from_name("pos+var+vel")};
  std::vector<std::size_t> memories{1, 2, 3, 4, 6, 8, 12, 16, 24, 32};
  std::vector<FeatureSource> sources{FeatureSource::FilterEstimates, FeatureSource::RawRssi};

  std::vector<CellSpec> cells() const {
    std::vector<CellSpec> out;
    for (auto c : classifiers)
      for (auto s : scalers)
        for (const auto& f : features)
          for (auto n : memories)
            for (auto src : sources) out.push_back({c, s, f, n, src});
    return out;
  }
};

struct SweepReport {
  std::vector<CellResult> cells;

  const CellResult* find(Algorithm c, ScalerKind s, const std::string& features, std::size_t memory,
                         FeatureSource src) const {
    for (const auto& cell : cells)
      if (cell.spec.classifier == c && cell.spec.scaler == s && cell.spec.features.name() == features &&
          cell.spec.memory == memory && cell.spec.source == src)
        return &cell;
    return nullptr;
  }

  /// Highest-scoring memory length of a curve; ties go to the shorter memory.
  const CellResult* best(Algorithm c, ScalerKind s, const std::string& features, FeatureSource src) const {
    const CellResult* b = nullptr;
    for (const auto& cell : cells) {
      if (cell.failed || cell.spec.classifier != c || cell.spec.scaler != s || cell.spec.features.name() != features ||
          cell.spec.source != src)
        continue;
      if (!b || cell.mean_acc > b->mean_acc || (cell.mean_acc == b->mean_acc && cell.spec.memory < b->spec.memory))
        b = &cell;
    }
    return b;
  }

  std::vector<const CellResult*> failures() const {
    std::vector<const CellResult*> f;
    for (const auto& c : cells)
      if (c.failed) f.push_back(&c);
    return f;
  }
};

inline void mark_best_memory(SweepReport& report) {
  for (auto& cell : report.cells) cell.best_memory = false;
  for (auto& cell : report.cells) {
    if (cell.failed) continue;
    const auto* b = report.best(cell.spec.classifier, cell.spec.scaler, cell.spec.features.name(), cell.spec.source);
    cell.best_memory = b == &cell;
  }
}

/// Evaluates every grid cell. Raw-RSSI cells that differ only in the filtered
/// feature selection share one computation. Output does not depend on `jobs`.
inline SweepReport run_sweep(std::span<const PreparedRun> runs, const SweepGrid& grid, const EvalOptions& opts,
                             std::uint64_t master_seed, unsigned jobs = 1, bool keep_predictions = false) {
  const auto specs = grid.cells();
  std::map<std::string, std::size_t> unique_index;
  std::vector<std::size_t> job_of(specs.size());
  std::vector<CellSpec> unique;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto [it, inserted] = unique_index.emplace(specs[i].key(), unique.size());
    if (inserted) unique.push_back(specs[i]);
    job_of[i] = it->second;
  }
  std::vector<CellResult> results(unique.size());
  detail::parallel_for(unique.size(), jobs, [&](std::size_t i) {
    results[i] = evaluate_cell(runs, unique[i], opts, master_seed, keep_predictions);
  });
  SweepReport report;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    CellResult c = results[job_of[i]];
    c.spec = specs[i];
    report.cells.push_back(std::move(c));
  }
  mark_best_memory(report);
  return report;
}

inline std::string sweep_report_csv(const SweepReport& report) {
  std::string out =
      "classifier,scaler,features,N,source,mean_acc,std_acc,weighted_acc,transition_recall,best_N,status\n";
  for (const auto& c : report.cells) {
    out += to_string(c.spec.classifier) + ',' + to_string(c.spec.scaler) + ',' + c.spec.features.name() + ',' +
           std::to_string(c.spec.memory) + ',' + to_string(c.spec.source) + ',';
    if (c.failed) {
      out += ",,,,0,failed\n";
      continue;
    }
    out += format_double(c.mean_acc) + ',' + format_double(c.std_acc) + ',' + format_double(c.weighted_acc) + ',' +
           format_double(c.transition_recall) + ',' + (c.best_memory ? "1" : "0") + ",ok\n";
  }
  return out;
}

inline nlohmann::json sweep_report_json(const SweepReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json j = {{"classifier", to_string(c.spec.classifier)},
                        {"scaler", to_string(c.spec.scaler)},
                        {"features", c.spec.features.name()},
                        {"N", c.spec.memory},
                        {"source", to_string(c.spec.source)},
                        {"status", c.failed ? "failed" : "ok"}};
    if (c.failed) {
      j["error"] = c.error;
    } else {
      j["mean_acc"] = c.mean_acc;
      j["std_acc"] = c.std_acc;
      j["weighted_acc"] = c.weighted_acc;
      j["transition_recall"] = c.transition_recall;
      j["best_N"] = c.best_memory;
      nlohmann::json ev = nlohmann::json::array();
      for (const auto& e : c.evaluations)
        ev.push_back({{"train", e.train}, {"test", e.test_run}, {"accuracy", e.accuracy}, {"rows", e.n_rows}});
      j["evaluations"] = ev;
    }
    cells.push_back(j);
  }
  return {{"cells", cells}};
}

}  // namespace rssiloc
