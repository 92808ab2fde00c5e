#pragma once

// A trained classifier together with everything needed to apply it to new
// filter output: feature selection, memory length, scaler and scale order.

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rssiloc/classify.hpp"
#include "rssiloc/error.hpp"
#include "rssiloc/eval.hpp"
#include "rssiloc/features.hpp"

namespace rssiloc {

inline constexpr const char* kVersion = "0.1.0";

struct ModelBundle {
  CellSpec spec;
  ScaleOrder order = ScaleOrder::BeforeWindow;
  Scaler scaler;
  Classifier model;
  std::vector<int> train_runs;
  std::string scenario_hash;

  nlohmann::json to_json() const {
    return {{"format", "rssiloc-model"},
            {"version", kVersion},
            {"features",
             {{"selection", spec.features.name()},
              {"spread", spec.features.pos_spread_as_std ? "std" : "var"},
              {"source", to_string(spec.source)},
              {"memory", spec.memory},
              {"scale_order", order == ScaleOrder::BeforeWindow ? "before_window" : "after_window"}}},
            {"scaler", scaler.to_json()},
            {"classifier", model.to_json()},
            {"train_runs", train_runs},
            {"scenario_hash", scenario_hash}};
  }

  static ModelBundle from_json(const nlohmann::json& j) {
    ModelBundle b;
    try {
      if (j.at("format").get<std::string>() != "rssiloc-model") throw ConfigError("model: unrecognized format");
      const auto& f = j.at("features");
      b.spec.source = feature_source_from_string(f.at("source").get<std::string>());
      b.spec.features = FeatureSelection::from_name(f.at("selection").get<std::string>());
      b.spec.features.pos_spread_as_std = f.at("spread").get<std::string>() == "std";
      b.spec.memory = f.at("memory").get<std::size_t>();
      b.order = f.at("scale_order").get<std::string>() == "after_window" ? ScaleOrder::AfterWindow
                                                                         : ScaleOrder::BeforeWindow;
      b.scaler = Scaler::from_json(j.at("scaler"));
      b.model = Classifier::from_json(j.at("classifier"));
      b.spec.classifier = b.model.algorithm();
      b.spec.scaler = b.scaler.kind;
      b.train_runs = j.at("train_runs").get<std::vector<int>>();
      b.scenario_hash = j.at("scenario_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    if (b.spec.memory < 1) throw ConfigError("model: memory must be >= 1");
    return b;
  }
};

inline ModelBundle train_bundle(std::span<const PreparedRun* const> runs, const CellSpec& spec,
                                const EvalOptions& opts, std::uint64_t seed) {
  const TrainedSplit t = train_split(runs, spec, opts, seed);
  ModelBundle b;
  b.spec = spec;
  b.order = opts.order;
  b.scaler = t.scaler;
  b.model = t.model;
  for (const auto* r : runs) b.train_runs.push_back(r->run_id);
  return b;
}

/// Labels for every tick of `run`.
inline std::vector<ZoneLabel> predict_run(const ModelBundle& b, const PreparedRun& run) {
  EvalOptions opts;
  opts.order = b.order;
  opts.row_stride = 1;
  return b.model.predict(transform_run(run, b.spec, b.scaler, opts));
}

}  // namespace rssiloc
