#pragma once

// Multi-run synthetic campaign and its on-disk layout:
//   <dir>/scenario.json
//   <dir>/run<k>_measurements.csv, <dir>/run<k>_truth.csv   for k = 0..n-1
//   <dir>/manifest.json

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rssiloc/io.hpp"
#include "rssiloc/scenario.hpp"
#include "rssiloc/seeding.hpp"
#include "rssiloc/synth.hpp"

namespace rssiloc {

struct RunData {
  int run_id = 0;
  std::uint64_t seed = 0;
  int n_round_trips = 0;
  double cruise_speed = 0.0;
  MeasurementSeries measurements;
  GroundTruthTrack truth;
};

struct Dataset {
  std::uint64_t master_seed = 0;
  std::vector<RunData> runs;
};

/// One run, fully determined by (scenario, master seed, run index).
inline RunData generate_run(const Scenario& sc, std::uint64_t master_seed, int run_index) {
  RunData run;
  run.run_id = run_index;
  run.seed = derive_seed(master_seed, static_cast<std::uint64_t>(run_index));
  std::mt19937_64 rng(derive_seed(run.seed, "profile"));
  std::uniform_int_distribution<int> trips(sc.dataset.min_round_trips, sc.dataset.max_round_trips);
  std::uniform_real_distribution<double> speed(1.0 - sc.dataset.speed_jitter, 1.0 + sc.dataset.speed_jitter);
  TrajectoryProfile profile = sc.trajectory;
  profile.n_round_trips = trips(rng);
  profile.cruise_speed *= speed(rng);
  run.n_round_trips = profile.n_round_trips;
  run.cruise_speed = profile.cruise_speed;
  run.truth = simulate_trajectory(profile, sc.zone, sc.tick_interval_s);
  run.measurements = synthesize_rssi(run.truth, sc.sensors, sc.channel, sc.noise, derive_seed(run.seed, "rssi"),
                                     sc.track, sc.tick_interval_s);
  return run;
}

/// Runs are seeded independently, so the thread count never changes output.
inline Dataset generate_dataset(const Scenario& sc, std::uint64_t master_seed, unsigned jobs = 1) {
  sc.validate();
  Dataset ds;
  ds.master_seed = master_seed;
  ds.runs.resize(static_cast<std::size_t>(sc.dataset.n_runs));
  if (jobs <= 1) {
    for (int k = 0; k < sc.dataset.n_runs; ++k) ds.runs[static_cast<std::size_t>(k)] = generate_run(sc, master_seed, k);
    return ds;
  }
  std::vector<std::exception_ptr> errors(ds.runs.size());
  std::vector<std::jthread> workers;
  std::atomic<std::size_t> next{0};
  for (unsigned w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < ds.runs.size();) {
        try {
          ds.runs[k] = generate_run(sc, master_seed, static_cast<int>(k));
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  workers.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return ds;
}

inline std::string run_measurements_name(int k) { return "run" + std::to_string(k) + "_measurements.csv"; }
inline std::string run_truth_name(int k) { return "run" + std::to_string(k) + "_truth.csv"; }

/// Writes scenario.json plus the per-run CSVs. The manifest is left to the
/// caller, which knows the invocation details.
inline void save_dataset(const std::filesystem::path& dir, const Scenario& sc, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  save_scenario(dir / "scenario.json", sc);
  for (const auto& run : ds.runs) {
    save_measurements(dir / run_measurements_name(run.run_id), run.measurements, sc.sensors);
    save_ground_truth(dir / run_truth_name(run.run_id), run.truth);
  }
}

inline nlohmann::json dataset_manifest(const Scenario& sc, const Dataset& ds) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : ds.runs)
    runs.push_back({{"run", r.run_id},
                    {"seed", r.seed},
                    {"n_round_trips", r.n_round_trips},
                    {"cruise_speed", r.cruise_speed},
                    {"n_ticks", r.truth.size()},
                    {"measurements", run_measurements_name(r.run_id)},
                    {"truth", run_truth_name(r.run_id)}});
  return {{"master_seed", ds.master_seed},
          {"scenario_hash", scenario_hash(sc)},
          {"profile", scenario_to_json(sc)["trajectory"]},
          {"runs", runs}};
}

/// Loads every run<k> pair present in `dir`, starting at k = 0.
inline Dataset load_dataset(const std::filesystem::path& dir, const Scenario& sc) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  Dataset ds;
  for (int k = 0;; ++k) {
    const auto m = dir / run_measurements_name(k);
    const auto t = dir / run_truth_name(k);
    if (!std::filesystem::exists(m)) break;
    if (!std::filesystem::exists(t)) throw IoError("missing ground truth " + t.string());
    RunData run;
    run.run_id = k;
    run.measurements = load_measurements(m, sc.sensors, sc.tick_interval_s);
    run.truth = load_ground_truth(t, sc.zone);
    check_same_grid(run.measurements, run.truth);
    ds.runs.push_back(std::move(run));
  }
  if (ds.runs.empty()) throw IoError("no runs found in " + dir.string());
  return ds;
}

}  // namespace rssiloc
