// rssiloc command-line tool: simulate, localize, evaluate, train, predict.
//
// Exit codes: 0 success, 1 configuration or internal error, 2 IO or usage error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rssiloc/rssiloc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rssiloc;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned jobs = 1;
  std::string out;
  std::vector<std::string> argv;
};

class Manifest {
 public:
  Manifest(const Globals& g, const std::string& command) {
    j_ = {{"tool", "rssiloc"},
          {"version", kVersion},
          {"command", command},
          {"argv", g.argv},
          {"master_seed", g.seed},
          {"jobs", g.jobs},
          {"inputs", json::object()},
          {"outputs", json::array()},
          {"timing_s", json::object()}};
  }

  template <typename F>
  auto stage(const std::string& name, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(name, t0);
    } else {
      auto r = fn();
      record(name, t0);
      return r;
    }
  }

  void input(const std::string& key, const std::string& path) { j_["inputs"][key] = path; }
  void output(const std::string& path) { j_["outputs"].push_back(path); }
  json& operator[](const std::string& key) { return j_[key]; }

  void write(const fs::path& path) const { write_file_atomic(path, j_.dump(2) + "\n"); }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
    j_["timing_s"][name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  json j_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

Scenario scenario_or_preset(const std::string& path, const std::string& preset) {
  if (!path.empty()) return load_scenario(path);
  if (preset == "default") return default_scenario();
  if (preset == "offcenter") return offcenter_scenario();
  throw ConfigError("unknown preset '" + preset + "' (expected default, offcenter)");
}

SensorArray sensors_for_series(const Scenario& sc, const MeasurementSeries& series) {
  if (sc.calibration == CalibrationMode::None) return sc.sensors;
  return calibrate(series, sc.sensors, sc.calibration_options);
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::vector<std::string>& items, Parse parse) {
  std::vector<T> out;
  for (const auto& s : items) out.push_back(parse(s));
  return out;
}

std::string labels_csv(const std::vector<std::int64_t>& ticks, const std::vector<ZoneLabel>& pred,
                       const std::vector<ZoneLabel>* truth) {
  std::string out = truth ? "tick,predicted,truth\n" : "tick,predicted\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out += std::to_string(ticks[i]) + ',' + std::to_string(to_int(pred[i]));
    if (truth) out += ',' + std::to_string(to_int((*truth)[i]));
    out += '\n';
  }
  return out;
}

// Options shared by evaluate and train.
struct ModelOptions {
  std::string spread = "var";
  std::string scale_order = "before";
  std::size_t stride = 5;
  std::size_t k = 5;
  std::size_t n_trees = 100;
  double svm_c = 1.0;
  double svm_gamma = 0.0;

  void add_to(CLI::App* app) {
    app->add_option("--spread", spread, "Position spread feature: var or std")
        ->check(CLI::IsMember({"var", "std"}))
        ->capture_default_str();
    app->add_option("--scale-order", scale_order, "Fit scaler before or after windowing")
        ->check(CLI::IsMember({"before", "after"}))
        ->capture_default_str();
    app->add_option("--stride", stride, "Keep every n-th tick after windowing")->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--k", k, "KNN neighbours")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--n-trees", n_trees, "Random forest size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--svm-c", svm_c, "SVM box constraint")->capture_default_str();
    app->add_option("--svm-gamma", svm_gamma, "SVM RBF width, 0 for the data-driven default");
  }

  EvalOptions eval_options() const {
    EvalOptions o;
    o.order = scale_order == "after" ? ScaleOrder::AfterWindow : ScaleOrder::BeforeWindow;
    o.row_stride = stride;
    o.params.knn.k = k;
    o.params.forest.n_trees = n_trees;
    o.params.svm.c = svm_c;
    if (svm_gamma > 0.0) o.params.svm.gamma = svm_gamma;
    return o;
  }

  json to_json() const {
    return {{"spread", spread}, {"scale_order", scale_order}, {"stride", stride},    {"k", k},
            {"n_trees", n_trees}, {"svm_c", svm_c},           {"svm_gamma", svm_gamma}};
  }
};

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string preset = "default";
  bool noiseless = false;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a) {
  Manifest m(g, "simulate");
  Scenario sc = scenario_or_preset(a.scenario, a.preset);
  if (a.noiseless) sc.noise = {0.0, 0.0, 0.0};
  if (!a.scenario.empty()) m.input("scenario", a.scenario);
  const fs::path dir = g.out.empty() ? fs::path("dataset") : fs::path(g.out);
  ensure_dir(dir);
  const Dataset ds = m.stage("generate", [&] { return generate_dataset(sc, g.seed, g.jobs); });
  m.stage("write", [&] { save_dataset(dir, sc, ds); });
  m["scenario_hash"] = scenario_hash(sc);
  m["dataset"] = dataset_manifest(sc, ds);
  m.output((dir / "scenario.json").string());
  for (const auto& r : ds.runs) {
    m.output((dir / run_measurements_name(r.run_id)).string());
    m.output((dir / run_truth_name(r.run_id)).string());
  }
  m.write(dir / "manifest.json");
  std::cout << "wrote " << ds.runs.size() << " runs to " << dir.string() << " (scenario " << scenario_hash(sc)
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct LocalizeArgs {
  std::string scenario;
  std::string preset = "default";
  std::string measurements;
  std::string truth;
  std::string pattern;
  std::string calibration;
  std::string resampling;
  std::size_t burn_in = 20;
};

int cmd_localize(const Globals& g, const LocalizeArgs& a) {
  Manifest m(g, "localize");
  Scenario sc = scenario_or_preset(a.scenario, a.preset);
  if (!a.pattern.empty())
    sc.channel.pattern = a.pattern == "omni" ? AntennaPattern::omnidirectional() : AntennaPattern::directional();
  if (!a.calibration.empty()) sc.calibration = calibration_mode_from_string(a.calibration);
  if (!a.resampling.empty()) sc.filter.resampling = resampling_from_string(a.resampling);
  if (g.seed_given) sc.filter.seed = g.seed;
  m["scenario_hash"] = scenario_hash(sc);
  m["filter_seed"] = sc.filter.seed;
  m.input("measurements", a.measurements);
  if (!a.scenario.empty()) m.input("scenario", a.scenario);

  const auto series = m.stage("load", [&] { return load_measurements(a.measurements, sc.sensors, sc.tick_interval_s); });
  std::optional<GroundTruthTrack> truth;
  if (!a.truth.empty()) {
    m.input("truth", a.truth);
    truth = load_ground_truth(a.truth, sc.zone);
    check_same_grid(series, *truth);
  }
  const SensorArray sensors = sensors_for_series(sc, series);
  const auto track = m.stage("filter", [&] { return run(series, sensors, sc.channel, sc.filter, sc.track); });

  const fs::path out = g.out.empty() ? fs::path("estimates.csv") : fs::path(g.out);
  ensure_parent(out);
  save_estimates(out, track);
  m.output(out.string());

  if (truth) {
    const double rmse = position_rmse(track, *truth, a.burn_in);
    json seg = json::object();
    std::map<int, std::pair<double, std::size_t>> by_zone;
    double v2 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = a.burn_in; i < track.size(); ++i) {
      const double d = track[i].mean.p_x - truth->samples[i].state.p_x;
      auto& z = by_zone[to_int(truth->samples[i].label)];
      z.first += d * d;
      ++z.second;
      const double dv = (track[i].mean.v_x - truth->samples[i].state.v_x) / sc.tick_interval_s;
      v2 += dv * dv;
      ++n;
    }
    std::cout << "position_rmse_m " << format_double(rmse) << "\n";
    if (n > 0) std::cout << "velocity_rmse_mps " << format_double(std::sqrt(v2 / static_cast<double>(n))) << "\n";
    const char* names[] = {"outside", "transition", "inside"};
    for (const auto& [zone, acc] : by_zone) {
      const double r = std::sqrt(acc.first / static_cast<double>(acc.second));
      seg[names[zone]] = r;
      std::cout << "position_rmse_m[" << names[zone] << "] " << format_double(r) << "\n";
    }
    m["rmse"] = {{"position_m", rmse}, {"burn_in", a.burn_in}, {"by_zone", seg}};
  }
  std::size_t degenerate = 0;
  for (const auto& e : track) degenerate += e.degenerate;
  std::cout << "ticks " << track.size() << " degenerate " << degenerate << "\n";
  m.write(fs::path(out.string() + ".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string dataset;
  std::string scenario;
  std::vector<std::string> classifiers{"svm", "knn", "rf"};
  std::vector<std::string> scalers{"standard", "power"};
  std::vector<std::string> features{"pos", "pos+var", "pos+var+vel"};
  std::vector<std::size_t> memories{1, 2, 3, 4, 6, 8, 12, 16, 24, 32};
  std::vector<std::string> sources{"filtered", "raw"};
  bool include_robust = false;
  bool dump_predictions = false;
  ModelOptions model;
};

struct Loaded {
  Scenario sc;
  Dataset ds;
  std::vector<PreparedRun> runs;
};

Loaded load_and_prepare(Manifest& m, const Globals& g, const std::string& dataset, const std::string& scenario) {
  if (!fs::is_directory(dataset)) throw IoError("dataset directory not found: " + dataset);
  const fs::path sc_path = scenario.empty() ? fs::path(dataset) / "scenario.json" : fs::path(scenario);
  Loaded l;
  l.sc = load_scenario(sc_path);
  m.input("dataset", dataset);
  m.input("scenario", sc_path.string());
  m["scenario_hash"] = scenario_hash(l.sc);
  l.ds = m.stage("load", [&] { return load_dataset(dataset, l.sc); });
  l.runs = m.stage("filter", [&] { return prepare_runs(l.sc, l.ds, g.jobs); });
  return l;
}

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  Manifest m(g, "evaluate");
  SweepGrid grid;
  grid.classifiers = parse_list<Algorithm>(a.classifiers, algorithm_from_string);
  grid.scalers = parse_list<ScalerKind>(a.scalers, scaler_kind_from_string);
  if (a.include_robust && std::find(grid.scalers.begin(), grid.scalers.end(), ScalerKind::Robust) == grid.scalers.end())
    grid.scalers.push_back(ScalerKind::Robust);
  grid.features = parse_list<FeatureSelection>(a.features, FeatureSelection::from_name);
  for (auto& f : grid.features) f.pos_spread_as_std = a.model.spread == "std";
  grid.memories = a.memories;
  grid.sources = parse_list<FeatureSource>(a.sources, feature_source_from_string);
  if (grid.cells().empty()) throw ConfigError("evaluation grid is empty");

  auto l = load_and_prepare(m, g, a.dataset, a.scenario);
  if (l.runs.size() != 6) throw ConfigError("evaluation needs exactly 6 runs, found " + std::to_string(l.runs.size()));
  const EvalOptions opts = a.model.eval_options();
  m["grid"] = {{"classifiers", a.classifiers}, {"scalers", a.scalers}, {"include_robust", a.include_robust},
               {"features", a.features},       {"memories", a.memories}, {"sources", a.sources},
               {"model", a.model.to_json()}};
  const auto report =
      m.stage("sweep", [&] { return run_sweep(l.runs, grid, opts, g.seed, g.jobs, a.dump_predictions); });

  const fs::path dir = g.out.empty() ? fs::path("evaluation") : fs::path(g.out);
  ensure_dir(dir);
  write_file_atomic(dir / "sweep.csv", sweep_report_csv(report));
  write_file_atomic(dir / "sweep.json", sweep_report_json(report).dump(2) + "\n");
  m.output((dir / "sweep.csv").string());
  m.output((dir / "sweep.json").string());
  if (a.dump_predictions) {
    ensure_dir(dir / "predictions");
    std::map<std::string, bool> done;
    for (const auto& c : report.cells) {
      if (c.failed) continue;
      std::string key = c.spec.key();
      std::replace(key.begin(), key.end(), '|', '_');
      std::replace(key.begin(), key.end(), '+', '-');
      if (done[key]) continue;
      done[key] = true;
      for (const auto& e : c.evaluations) {
        const auto name = key + "_train" + std::to_string(e.train[0]) + std::to_string(e.train[1]) +
                          std::to_string(e.train[2]) + "_test" + std::to_string(e.test_run) + ".csv";
        write_file_atomic(dir / "predictions" / name, labels_csv(e.ticks, e.predicted, &e.truth));
      }
    }
    m.output((dir / "predictions").string());
  }

  for (auto alg : grid.classifiers)
    for (auto sk : grid.scalers)
      for (const auto& f : grid.features)
        for (auto src : grid.sources) {
          const auto* b = report.best(alg, sk, f.name(), src);
          if (!b) continue;
          std::cout << to_string(alg) << ' ' << to_string(sk) << ' '
                    << (src == FeatureSource::RawRssi ? std::string("rssi") : f.name()) << ' ' << to_string(src)
                    << " best_N=" << b->spec.memory << " mean_acc=" << format_double(b->mean_acc) << "\n";
        }
  const auto failures = report.failures();
  m["failed_cells"] = failures.size();
  m.write(dir / "manifest.json");
  for (const auto* f : failures) std::cerr << "failed cell " << f->spec.key() << ": " << f->error << "\n";
  return failures.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string scenario;
  std::vector<int> runs{0, 1, 2};
  std::string classifier = "svm";
  std::string scaler = "standard";
  std::string features = "pos+var+vel";
  std::size_t memory = 16;
  std::string source = "filtered";
  ModelOptions model;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  Manifest m(g, "train");
  CellSpec spec;
  spec.classifier = algorithm_from_string(a.classifier);
  spec.scaler = scaler_kind_from_string(a.scaler);
  spec.features = FeatureSelection::from_name(a.features);
  spec.features.pos_spread_as_std = a.model.spread == "std";
  spec.memory = a.memory;
  spec.source = feature_source_from_string(a.source);
  auto l = load_and_prepare(m, g, a.dataset, a.scenario);
  std::vector<const PreparedRun*> train;
  for (int id : a.runs) {
    const auto it = std::find_if(l.runs.begin(), l.runs.end(), [&](const PreparedRun& r) { return r.run_id == id; });
    if (it == l.runs.end()) throw ConfigError("unknown run id " + std::to_string(id));
    train.push_back(&*it);
  }
  ModelBundle b = m.stage("train", [&] { return train_bundle(train, spec, a.model.eval_options(), g.seed); });
  b.scenario_hash = scenario_hash(l.sc);
  const fs::path out = g.out.empty() ? fs::path("model.json") : fs::path(g.out);
  ensure_parent(out);
  write_file_atomic(out, b.to_json().dump() + "\n");
  m.output(out.string());
  m["model"] = {{"cell", spec.key()}, {"train_runs", a.runs}, {"options", a.model.to_json()}};
  m.write(fs::path(out.string() + ".manifest.json"));
  std::cout << "trained " << spec.key() << " on runs";
  for (int id : a.runs) std::cout << ' ' << id;
  std::cout << " -> " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string scenario;
  std::string preset = "default";
  std::string measurements;
  std::string truth;
};

int cmd_predict(const Globals& g, const PredictArgs& a) {
  Manifest m(g, "predict");
  const ModelBundle b = ModelBundle::from_json([&] {
    try {
      return json::parse(read_file(a.model));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }());
  m.input("model", a.model);
  m.input("measurements", a.measurements);
  Scenario sc = scenario_or_preset(a.scenario, a.preset);
  if (!a.scenario.empty()) m.input("scenario", a.scenario);
  if (g.seed_given) sc.filter.seed = g.seed;
  m["scenario_hash"] = scenario_hash(sc);
  m["filter_seed"] = sc.filter.seed;
  if (!b.scenario_hash.empty() && b.scenario_hash != scenario_hash(sc))
    std::cerr << "warning: model was trained under scenario " << b.scenario_hash << "\n";

  const auto series = load_measurements(a.measurements, sc.sensors, sc.tick_interval_s);
  std::optional<GroundTruthTrack> truth;
  if (!a.truth.empty()) {
    m.input("truth", a.truth);
    truth = load_ground_truth(a.truth, sc.zone);
  }
  const auto run = m.stage("filter", [&] {
    return prepare_series(sc, series, sensors_for_series(sc, series), sc.filter.seed, 0, truth ? &*truth : nullptr);
  });
  const auto pred = m.stage("predict", [&] { return predict_run(b, run); });

  const fs::path out = g.out.empty() ? fs::path("predictions.csv") : fs::path(g.out);
  ensure_parent(out);
  write_file_atomic(out, labels_csv(run.ticks, pred, truth ? &run.labels : nullptr));
  m.output(out.string());
  if (truth) {
    const double acc = accuracy(pred, run.labels);
    const auto [hit, total] = recall_counts(pred, run.labels, ZoneLabel::Transition);
    std::cout << "accuracy " << format_double(acc) << "\n";
    if (total > 0)
      std::cout << "transition_recall " << format_double(static_cast<double>(hit) / static_cast<double>(total))
                << "\n";
    m["accuracy"] = acc;
  }
  std::cout << "predicted " << pred.size() << " ticks -> " << out.string() << "\n";
  m.write(fs::path(out.string() + ".manifest.json"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);

  CLI::App app{"RSSI particle-filter localization and zone classification"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed (filter seed for localize/predict)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--out", g.out, "Output file or directory");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a six-run synthetic dataset");
  s->add_option("--scenario", sim.scenario, "Scenario JSON (default: built-in preset)");
  s->add_option("--preset", sim.preset, "Built-in scenario: default or offcenter")->capture_default_str();
  s->add_flag("--noiseless", sim.noiseless, "Disable RSSI noise, dropout and quantization");

  LocalizeArgs loc;
  auto* l = app.add_subcommand("localize", "Run the particle filter on one measurement file");
  l->add_option("--scenario", loc.scenario, "Scenario JSON (default: built-in preset)");
  l->add_option("--preset", loc.preset, "Built-in scenario: default or offcenter")->capture_default_str();
  l->add_option("--measurements", loc.measurements, "Measurement CSV")->required();
  l->add_option("--truth", loc.truth, "Ground-truth CSV for an RMSE summary");
  l->add_option("--pattern", loc.pattern, "Override antenna pattern")->check(CLI::IsMember({"omni", "directional"}));
  l->add_option("--calibrate", loc.calibration, "Override calibration mode")
      ->check(CLI::IsMember({"none", "per_run", "global"}));
  l->add_option("--resampling", loc.resampling, "Override resampling scheme")
      ->check(CLI::IsMember({"multinomial", "systematic"}));
  l->add_option("--burn-in", loc.burn_in, "Ticks skipped by the RMSE summary")->capture_default_str();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Leave-three-runs-out sweep over the evaluation grid");
  e->add_option("--dataset", ev.dataset, "Dataset directory from simulate")->required();
  e->add_option("--scenario", ev.scenario, "Scenario JSON (default: <dataset>/scenario.json)");
  e->add_option("--classifier", ev.classifiers, "svm, knn, rf")->delimiter(',')->capture_default_str();
  e->add_option("--scaler", ev.scalers, "standard, power, robust")->delimiter(',')->capture_default_str();
  e->add_option("--features", ev.features, "pos, pos+var, pos+var+vel, ...")->delimiter(',')->capture_default_str();
  e->add_option("--memory", ev.memories, "Memory lengths N")->delimiter(',')->capture_default_str();
  e->add_option("--source", ev.sources, "filtered, raw")->delimiter(',')->capture_default_str();
  e->add_flag("--include-robust", ev.include_robust, "Add the robust scaler to the grid");
  e->add_flag("--dump-predictions", ev.dump_predictions, "Write per-evaluation prediction CSVs");
  ev.model.add_to(e);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one classifier on selected runs");
  t->add_option("--dataset", tr.dataset, "Dataset directory from simulate")->required();
  t->add_option("--scenario", tr.scenario, "Scenario JSON (default: <dataset>/scenario.json)");
  t->add_option("--runs", tr.runs, "Training run ids")->delimiter(',')->capture_default_str();
  t->add_option("--classifier", tr.classifier, "svm, knn, rf")->capture_default_str();
  t->add_option("--scaler", tr.scaler, "standard, power, robust")->capture_default_str();
  t->add_option("--features", tr.features, "Feature selection")->capture_default_str();
  t->add_option("--memory", tr.memory, "Memory length N")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--source", tr.source, "filtered or raw")->capture_default_str();
  tr.model.add_to(t);

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Classify the zone of every tick of a measurement file");
  p->add_option("--model", pr.model, "Model JSON from train")->required();
  p->add_option("--scenario", pr.scenario, "Scenario JSON (default: built-in preset)");
  p->add_option("--preset", pr.preset, "Built-in scenario: default or offcenter")->capture_default_str();
  p->add_option("--measurements", pr.measurements, "Measurement CSV")->required();
  p->add_option("--truth", pr.truth, "Ground-truth CSV for an accuracy summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (s->parsed()) return cmd_simulate(g, sim);
    if (l->parsed()) return cmd_localize(g, loc);
    if (e->parsed()) return cmd_evaluate(g, ev);
    if (t->parsed()) return cmd_train(g, tr);
    if (p->parsed()) return cmd_predict(g, pr);
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
