#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "rssiloc/eval.hpp"

using namespace rssiloc;

namespace {

Scenario small_scenario() {
  auto sc = default_scenario();
  sc.filter.n_particles = 100;
  sc.trajectory.dwell_ticks = 10;
  sc.dataset.max_round_trips = 2;
  return sc;
}

const std::vector<PreparedRun>& small_runs() {
  static const auto runs = [] {
    const auto sc = small_scenario();
    return prepare_runs(sc, generate_dataset(sc, 3));
  }();
  return runs;
}

EvalOptions fast_options() {
  EvalOptions o;
  o.row_stride = 10;
  o.params.forest.n_trees = 5;
  return o;
}

}  // namespace

TEST(Splits, TwentyTriples) {
  const std::vector<int> ids{0, 1, 2, 3, 4, 5};
  const auto plan = enumerate_splits(ids);
  ASSERT_EQ(plan.splits.size(), 20u);
  EXPECT_EQ(plan.splits.front().train, (std::array<int, 3>{0, 1, 2}));
  EXPECT_EQ(plan.splits.front().test, (std::array<int, 3>{3, 4, 5}));
  EXPECT_EQ(plan.evaluation_count(), 60u);
  std::array<int, 6> in_train{};
  std::set<std::array<int, 3>> seen;
  for (const auto& s : plan.splits) {
    seen.insert(s.train);
    for (int r : s.train) {
      ++in_train[static_cast<std::size_t>(r)];
      EXPECT_EQ(std::count(s.test.begin(), s.test.end(), r), 0);
    }
  }
  EXPECT_EQ(seen.size(), 20u);
  for (int c : in_train) EXPECT_EQ(c, 10);
  EXPECT_TRUE(std::is_sorted(plan.splits.begin(), plan.splits.end(),
                             [](const Split& a, const Split& b) { return a.train < b.train; }));
}

TEST(Splits, WrongCount) {
  EXPECT_THROW(enumerate_splits(std::vector<int>{0, 1, 2, 3, 4}), ConfigError);
  EXPECT_THROW(enumerate_splits(std::vector<int>{0, 1, 2, 3, 4, 4}), ConfigError);
}

TEST(Accuracy, Examples) {
  using Z = ZoneLabel;
  const std::vector<Z> t{Z::Outside, Z::Transition, Z::Inside, Z::Inside};
  EXPECT_EQ(accuracy(t, t), 1.0);
  EXPECT_EQ(accuracy(std::vector<Z>{Z::Inside, Z::Inside, Z::Outside, Z::Outside}, t), 0.0);
  EXPECT_EQ(accuracy(std::vector<Z>{Z::Outside, Z::Transition, Z::Inside, Z::Outside}, t), 0.75);
  EXPECT_THROW(accuracy(std::vector<Z>{Z::Outside}, t), ConfigError);
  EXPECT_THROW(accuracy(std::vector<Z>{}, std::vector<Z>{}), ConfigError);
  const auto [hit, total] = recall_counts(std::vector<Z>{Z::Transition, Z::Transition, Z::Outside, Z::Inside}, t,
                                          Z::Transition);
  EXPECT_EQ(hit, 1u);
  EXPECT_EQ(total, 1u);
}

TEST(Sweep, MemorizationSanity) {
  // Six identical noiseless runs whose position feature is the truth.
  const auto truth = simulate_trajectory({}, {});
  std::vector<PreparedRun> runs(6);
  for (int k = 0; k < 6; ++k) {
    auto& r = runs[static_cast<std::size_t>(k)];
    r.run_id = k;
    r.labels = truth.labels();
    for (const auto& s : truth.samples) {
      r.ticks.push_back(s.tick);
      r.estimates.push_back({s.tick, s.state, 0.0, 0.0, false});
    }
    r.raw = Matrix(truth.size(), 1);
  }
  CellSpec spec{Algorithm::RandomForest, ScalerKind::Standard, FeatureSelection::from_name("pos"), 1,
                FeatureSource::FilterEstimates};
  auto opts = fast_options();
  opts.params.forest.max_depth = 0;
  opts.params.forest.bootstrap = false;
  const auto cell = evaluate_cell(runs, spec, opts, 1);
  ASSERT_FALSE(cell.failed) << cell.error;
  EXPECT_EQ(cell.evaluations.size(), 60u);
  EXPECT_EQ(cell.mean_acc, 1.0);
}

TEST(Sweep, AggregationIsMeanOfEvaluations) {
  CellSpec spec{Algorithm::Knn, ScalerKind::Standard, FeatureSelection::from_name("pos+var"), 3,
                FeatureSource::FilterEstimates};
  const auto cell = evaluate_cell(small_runs(), spec, fast_options(), 1);
  ASSERT_FALSE(cell.failed) << cell.error;
  ASSERT_EQ(cell.evaluations.size(), 60u);
  double s = 0.0;
  for (const auto& e : cell.evaluations) {
    s += e.accuracy;
    EXPECT_GE(e.accuracy, 0.0);
    EXPECT_LE(e.accuracy, 1.0);
  }
  EXPECT_NEAR(cell.mean_acc, s / 60.0, 1e-12);
}

TEST(Sweep, NoLeakageFromHeldOutRuns) {
  auto runs = small_runs();
  const std::array<const PreparedRun*, 3> train{&runs[0], &runs[1], &runs[2]};
  CellSpec spec{Algorithm::Svm, ScalerKind::PowerTransform, FeatureSelection::from_name("pos+var+vel"), 4,
                FeatureSource::FilterEstimates};
  const auto a = train_split(train, spec, fast_options(), 9);
  for (std::size_t k = 3; k < 6; ++k)
    for (auto& e : runs[k].estimates) {
      e.mean.p_x = -e.mean.p_x * 3.0 + 7.0;
      e.var_p *= 10.0;
    }
  const auto b = train_split(train, spec, fast_options(), 9);
  EXPECT_EQ(a.scaler, b.scaler);
  EXPECT_EQ(a.model.to_json(), b.model.to_json());
}

TEST(Sweep, DeterministicAcrossJobCounts) {
  SweepGrid g;
  g.classifiers = {Algorithm::Knn, Algorithm::RandomForest};
  g.scalers = {ScalerKind::Standard};
  g.features = {FeatureSelection::from_name("pos"), FeatureSelection::from_name("pos+var")};
  g.memories = {1, 4};
  const auto a = run_sweep(small_runs(), g, fast_options(), 5, 1);
  const auto b = run_sweep(small_runs(), g, fast_options(), 5, 3);
  EXPECT_EQ(sweep_report_csv(a), sweep_report_csv(b));
  EXPECT_EQ(sweep_report_json(a), sweep_report_json(b));
  EXPECT_EQ(a.cells.size(), 16u);
  EXPECT_TRUE(a.failures().empty());
}

TEST(Sweep, BestMemoryMarkedOncePerCurve) {
  SweepGrid g;
  g.classifiers = {Algorithm::Knn};
  g.scalers = {ScalerKind::Standard};
  g.features = {FeatureSelection::from_name("pos")};
  g.memories = {1, 2, 4};
  const auto r = run_sweep(small_runs(), g, fast_options(), 5);
  for (auto src : {FeatureSource::FilterEstimates, FeatureSource::RawRssi}) {
    int marked = 0;
    for (const auto& c : r.cells) marked += c.spec.source == src && c.best_memory;
    EXPECT_EQ(marked, 1);
    const auto* b = r.best(Algorithm::Knn, ScalerKind::Standard, "pos", src);
    ASSERT_NE(b, nullptr);
    for (const auto& c : r.cells) {
      if (c.spec.source == src) {
        EXPECT_LE(c.mean_acc, b->mean_acc);
      }
    }
  }
}

TEST(Sweep, FailedCellsAreRecorded) {
  auto runs = small_runs();
  runs.pop_back();
  CellSpec spec;
  const auto cell = evaluate_cell(runs, spec, fast_options(), 1);
  EXPECT_TRUE(cell.failed);
  EXPECT_FALSE(cell.error.empty());
}

TEST(Sweep, DefaultGridSize) {
  EXPECT_EQ(SweepGrid{}.cells().size(), 360u);
}

TEST(Sweep, CsvHeader) {
  SweepReport r;
  EXPECT_EQ(sweep_report_csv(r).substr(0, 47), "classifier,scaler,features,N,source,mean_acc,st");
}
