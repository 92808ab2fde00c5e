// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--seed S] [--jobs J] [--full]
//
// --full evaluates criteria 6-8 on the complete sweep grid instead of the
// restricted one.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rssiloc/rssiloc.hpp"

using namespace rssiloc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << std::fixed << v;
  return ss.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

int failures = 0;

void check(int id, const std::string& name, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += !o.pass;
  std::printf("%s %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

double oracle_density(double rx, const Vec3& p, const SensorInfo& s) {
  const double dx = p.x - s.position.x, dy = p.y - s.position.y, dz = p.z - s.position.z;
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double alpha = std::acos(dx / d);
  const double g = alpha < std::numbers::pi / 3 ? 0.0 : alpha < 3 * std::numbers::pi / 4 ? -6.0 : -10.0;
  const double mu = std::max(s.floor_dbm, s.ref_power_dbm - 20.0 * std::log10(d) + g);
  return std::exp(-(rx - mu) * (rx - mu) / 18.0) / std::sqrt(2.0 * std::numbers::pi * 9.0);
}

Outcome likelihood_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-20.0, 20.0), rx(-100.0, -30.0);
  const ChannelParams ch;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 p{u(rng), u(rng) / 4.0, 0.5};
    const SensorInfo s{1, {u(rng), u(rng) / 4.0, 1.0}, -45.0 + u(rng) / 4.0, -90.0 + u(rng) / 4.0};
    const double r = rx(rng);
    const double direct = oracle_density(r, p, s);
    worst = std::max(worst, std::abs(std::exp(rssi_log_likelihood(r, p, s, ch)) / direct - 1.0));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 1.0, "max rel err " + sci(worst) + ", " + fmt(secs) + " s"};
}

ParticleSet fixed_set(const std::vector<double>& positions) {
  ParticleSet s;
  for (double p : positions) s.states.push_back({p, 0.0});
  s.log_weights.assign(positions.size(), -std::log(static_cast<double>(positions.size())));
  s.rng.seed(1);
  return s;
}

Outcome fusion_oracle() {
  const SensorArray a({{1, {-2.0, 1.5, 1.0}, -45.0, -90.0}, {2, {3.0, -1.5, 1.0}, -50.0, -85.0}});
  const TrackGeometry track{0.0, 0.5};
  auto s = fixed_set({-4.0, 0.5, 6.0});
  const MeasurementFrame f{0, {-52.0, -61.0}};
  update(s, f, a, ChannelParams{}, track);
  std::vector<double> w;
  for (const auto& p : s.states) {
    const Vec3 pos{p.p_x, track.y, track.z};
    w.push_back(oracle_density(-52.0, pos, a[0]) * oracle_density(-61.0, pos, a[1]));
  }
  double total = 0.0;
  for (double x : w) total += x;
  const double top = *std::max_element(s.log_weights.begin(), s.log_weights.end());
  std::vector<double> got;
  for (double l : s.log_weights) got.push_back(std::exp(l - top));
  double got_total = 0.0;
  for (double x : got) got_total += x;
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(got[i] / got_total - w[i] / total));
  return {worst <= 1e-12, "max abs err " + sci(worst)};
}

std::vector<double> filter_rmse(const Scenario& sc, int seeds, const ChannelParams& channel) {
  std::vector<double> out;
  for (int s = 0; s < seeds; ++s) {
    const auto run = generate_run(sc, static_cast<std::uint64_t>(s), 0);
    FilterConfig fc = sc.filter;
    fc.seed = derive_seed(static_cast<std::uint64_t>(s), "filter");
    const auto track = rssiloc::run(run.measurements, sc.sensors, channel, fc, sc.track);
    out.push_back(position_rmse(track, run.truth, 20));
  }
  return out;
}

Outcome filter_accuracy() {
  const auto t0 = Clock::now();
  const Scenario sc = default_scenario();
  const auto rmse = filter_rmse(sc, 20, sc.channel);
  const double med = median(rmse);
  const double secs = seconds_since(t0);
  return {med <= 1.5 && secs < 30.0, "median RMSE " + fmt(med) + " m over 20 seeds, " + fmt(secs) + " s"};
}

Outcome directionality() {
  const Scenario sc = offcenter_scenario();
  ChannelParams omni = sc.channel;
  omni.pattern = AntennaPattern::omnidirectional();
  const auto dir = filter_rmse(sc, 20, sc.channel);
  const auto omn = filter_rmse(sc, 20, omni);
  int wins = 0;
  for (std::size_t i = 0; i < dir.size(); ++i) wins += dir[i] < omn[i];
  return {wins >= 18, std::to_string(wins) + "/20 seeds directional < omni (median " + fmt(median(dir)) + " vs " +
                          fmt(median(omn)) + " m)"};
}

Outcome resampling_unbiased() {
  const std::vector<double> w{0.05, 0.1, 0.15, 0.3, 0.4};
  const std::size_t n = w.size();
  const int repeats = 10000;
  FilterConfig cfg;
  cfg.resampling = ResamplingScheme::Multinomial;
  std::vector<double> counts(n, 0.0);
  auto set = fixed_set({0, 1, 2, 3, 4});
  set.rng.seed(2024);
  for (int r = 0; r < repeats; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      set.states[i] = {static_cast<double>(i), 0.0};
      set.log_weights[i] = std::log(w[i]);
    }
    resample(set, cfg);
    for (const auto& st : set.states) counts[static_cast<std::size_t>(st.p_x)] += 1.0;
  }
  bool within = true;
  double chi2 = 0.0;
  double worst_z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double expected_mean = static_cast<double>(n) * w[i];
    const double mean = counts[i] / repeats;
    const double se = std::sqrt(static_cast<double>(n) * w[i] * (1.0 - w[i]) / repeats);
    const double z = std::abs(mean - expected_mean) / se;
    worst_z = std::max(worst_z, z);
    within = within && z <= 4.0;
    const double e = expected_mean * repeats;
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  // Survival function of chi-square with 4 degrees of freedom.
  const double p = std::exp(-chi2 / 2.0) * (1.0 + chi2 / 2.0);
  return {within && p > 0.001, "max |z| " + fmt(worst_z, 2) + ", chi2 " + fmt(chi2, 2) + ", p " + fmt(p)};
}

// ---------------------------------------------------------------------------
// Classification criteria share one dataset and one sweep report.

struct SweepContext {
  std::vector<PreparedRun> runs;
  SweepReport svm;      // SVM + standard, all filtered feature sets
  SweepReport sources;  // every classifier, standard, full feature set, filtered and raw
  double svm_secs = 0.0;
  double total_secs = 0.0;
  bool full = false;
};

const std::vector<std::string> kFeatureSets{"pos", "pos+var", "pos+var+vel"};

SweepContext build_context(std::uint64_t seed, unsigned jobs, bool full) {
  SweepContext ctx;
  ctx.full = full;
  const Scenario sc = default_scenario();
  const auto ds = generate_dataset(sc, seed, jobs);
  ctx.runs = prepare_runs(sc, ds, jobs);
  const EvalOptions opts;
  const auto t0 = Clock::now();
  if (full) {
    const auto report = run_sweep(ctx.runs, SweepGrid{}, opts, seed, jobs);
    ctx.svm = report;
    ctx.sources = report;
    ctx.svm_secs = ctx.total_secs = seconds_since(t0);
    return ctx;
  }
  SweepGrid g;
  g.classifiers = {Algorithm::Svm};
  g.scalers = {ScalerKind::Standard};
  g.sources = {FeatureSource::FilterEstimates};
  ctx.svm = run_sweep(ctx.runs, g, opts, seed, jobs);
  ctx.svm_secs = seconds_since(t0);
  SweepGrid h;
  h.scalers = {ScalerKind::Standard};
  h.features = {FeatureSelection::from_name("pos+var+vel")};
  ctx.sources = run_sweep(ctx.runs, h, opts, seed, jobs);
  ctx.total_secs = seconds_since(t0);
  return ctx;
}

Outcome feature_ordering(const SweepContext& ctx) {
  double acc[3];
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    const auto* b = ctx.svm.best(Algorithm::Svm, ScalerKind::Standard, kFeatureSets[i], FeatureSource::FilterEstimates);
    if (!b) return {false, "missing cell for " + kFeatureSets[i]};
    acc[i] = b->mean_acc;
    detail += kFeatureSets[i] + "=" + fmt(acc[i]) + "@N" + std::to_string(b->spec.memory) + " ";
  }
  const bool order = acc[0] < acc[1] && acc[1] <= acc[2] + 0.005;
  const double limit = ctx.full ? 600.0 : 60.0;
  const bool fast = ctx.svm_secs < limit;
  detail += "sweep " + fmt(ctx.svm_secs, 1) + " s (limit " + fmt(limit, 0) + " s)";
  return {order && fast, detail};
}

Outcome filtered_vs_raw(const SweepContext& ctx) {
  bool ok = true;
  std::string detail;
  for (auto alg : {Algorithm::Svm, Algorithm::Knn, Algorithm::RandomForest}) {
    const auto* f = ctx.sources.best(alg, ScalerKind::Standard, "pos+var+vel", FeatureSource::FilterEstimates);
    const auto* r = ctx.sources.best(alg, ScalerKind::Standard, "pos+var+vel", FeatureSource::RawRssi);
    if (!f || !r) return {false, "missing cells for " + to_string(alg)};
    ok = ok && f->mean_acc >= r->mean_acc;
    detail += to_string(alg) + " filtered " + fmt(f->mean_acc) + " vs raw " + fmt(r->mean_acc) + "; ";
  }
  return {ok, detail};
}

Outcome memory_recall(const SweepContext& ctx) {
  bool ok = true;
  std::string detail;
  for (const auto& f : kFeatureSets) {
    const auto* n3 = ctx.svm.find(Algorithm::Svm, ScalerKind::Standard, f, 3, FeatureSource::FilterEstimates);
    const auto* n16 = ctx.svm.find(Algorithm::Svm, ScalerKind::Standard, f, 16, FeatureSource::FilterEstimates);
    if (!n3 || !n16 || n3->failed || n16->failed) return {false, "missing cells for " + f};
    ok = ok && n16->transition_recall > n3->transition_recall;
    detail += f + " N16 " + fmt(n16->transition_recall) + " vs N3 " + fmt(n3->transition_recall) + "; ";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------

Outcome scaler_oracles() {
  std::mt19937_64 rng(9);
  std::lognormal_distribution<double> ln(0.0, 1.0);
  Matrix m(0, 3);
  for (int i = 0; i < 500; ++i) m.append_row(std::vector<double>{ln(rng), -3.0 * ln(rng), ln(rng) * ln(rng)});
  const auto t = apply_scaler(fit_scaler(ScalerKind::Standard, m), m);
  double worst = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto col = t.column(c);
    double mean = 0.0, ss = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(col.size());
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(col.size()));
    worst = std::max({worst, std::abs(mean), std::abs(sd - 1.0)});
  }
  double identity = 0.0;
  for (double x = -20.0; x <= 20.0; x += 0.125) identity = std::max(identity, std::abs(yeo_johnson(x, 1.0) - x));
  bool monotone = true;
  for (double lambda : {-2.0, 0.0, 1.0, 2.0, 4.0}) {
    double prev = -INFINITY;
    for (double x = -10.0; x <= 10.0; x += 0.01) {
      const double y = yeo_johnson(x, lambda);
      monotone = monotone && y > prev;
      prev = y;
    }
  }
  return {worst <= 1e-9 && identity <= 1e-12 && monotone,
          "standard max dev " + sci(worst) + ", identity err " + sci(identity) +
              (monotone ? ", monotone" : ", NOT monotone")};
}

Outcome classifier_sanity() {
  std::mt19937_64 rng(17);
  auto blobs = [&](double spread) {
    std::normal_distribution<double> g(0.0, spread);
    std::pair<Matrix, std::vector<ZoneLabel>> d{Matrix(0, 2), {}};
    const double centers[3][2] = {{0, 0}, {5, 0}, {0, 5}};
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 50; ++i) {
        d.first.append_row(std::vector<double>{centers[c][0] + g(rng), centers[c][1] + g(rng)});
        d.second.push_back(static_cast<ZoneLabel>(c));
      }
    return d;
  };
  auto train_acc = [](const Classifier& c, const Matrix& x, const std::vector<ZoneLabel>& y) {
    return accuracy(c.predict(x), y);
  };
  const auto noisy = blobs(2.5);
  ClassifierParams p;
  p.knn.k = 1;
  p.forest.n_trees = 1;
  p.forest.bootstrap = false;
  const double knn = train_acc(Classifier::train(Algorithm::Knn, noisy.first, noisy.second, p), noisy.first,
                               noisy.second);
  const double tree = train_acc(Classifier::train(Algorithm::RandomForest, noisy.first, noisy.second, p, 5),
                                noisy.first, noisy.second);
  const auto sep = blobs(0.5);
  const auto svm = Classifier::train(Algorithm::Svm, sep.first, sep.second, p);
  const double svm_acc = train_acc(svm, sep.first, sep.second);
  double dual = 0.0;
  const auto* m = svm.get<SvmModel>();
  for (const auto& bm : m->machines()) {
    double s = 0.0;
    for (std::size_t i = 0; i < bm.alpha.size(); ++i) {
      dual = std::max({dual, -bm.alpha[i], bm.alpha[i] - m->params().c});
      s += bm.alpha[i] * bm.sign[i];
    }
    dual = std::max(dual, std::abs(s));
  }
  return {knn == 1.0 && tree == 1.0 && svm_acc == 1.0 && dual <= 1e-6,
          "knn " + fmt(knn) + ", tree " + fmt(tree) + ", svm " + fmt(svm_acc) + ", dual violation " + sci(dual)};
}

Outcome determinism(std::uint64_t seed, unsigned jobs) {
  const Scenario sc = default_scenario();
  const unsigned many = std::max(2u, jobs);
  const auto a = generate_dataset(sc, seed, 1);
  const auto b = generate_dataset(sc, seed, many);
  std::vector<std::string> diffs;
  for (std::size_t k = 0; k < a.runs.size(); ++k)
    if (format_measurements(a.runs[k].measurements, sc.sensors) !=
            format_measurements(b.runs[k].measurements, sc.sensors) ||
        format_ground_truth(a.runs[k].truth) != format_ground_truth(b.runs[k].truth))
      diffs.push_back("synth");
  const auto ra = prepare_runs(sc, a, 1);
  const auto rb = prepare_runs(sc, b, many);
  for (std::size_t k = 0; k < ra.size(); ++k)
    if (format_estimates(ra[k].estimates) != format_estimates(rb[k].estimates)) diffs.push_back("filter");
  SweepGrid g;
  g.scalers = {ScalerKind::PowerTransform};
  g.features = {FeatureSelection::from_name("pos+var")};
  g.memories = {2, 8};
  EvalOptions opts;
  opts.params.forest.n_trees = 10;
  const auto sa = sweep_report_csv(run_sweep(ra, g, opts, seed, 1));
  const auto sb = sweep_report_csv(run_sweep(rb, g, opts, seed, many));
  if (sa != sb) diffs.push_back("sweep");
  std::vector<const PreparedRun*> train{&ra[0], &ra[1], &ra[2]};
  CellSpec spec;
  spec.features = FeatureSelection::from_name("pos+var+vel");
  spec.memory = 4;
  const auto m1 = train_bundle(train, spec, opts, seed).to_json();
  const auto m2 = train_bundle(train, spec, opts, seed).to_json();
  if (m1 != m2) diffs.push_back("train");
  std::string detail = "synth, filter, sweep, train compared at jobs 1 vs " + std::to_string(many);
  if (!diffs.empty()) {
    detail += "; differs:";
    for (const auto& d : diffs) detail += " " + d;
  }
  return {diffs.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rssiloc acceptance suite"};
  std::uint64_t seed = 1;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  bool full = false;
  app.add_option("--seed", seed, "Master seed of the classification dataset")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--full", full, "Run criteria 6-8 on the full grid");
  CLI11_PARSE(app, argc, argv);

  check(1, "likelihood oracle", likelihood_oracle);
  check(2, "fusion oracle", fusion_oracle);
  check(3, "filter accuracy", filter_accuracy);
  check(4, "directional pattern off-center", directionality);
  check(5, "multinomial resampling unbiased", resampling_unbiased);

  SweepContext ctx;
  std::string ctx_error;
  const auto t0 = Clock::now();
  try {
    ctx = build_context(seed, jobs, full);
  } catch (const std::exception& e) {
    ctx_error = e.what();
  }
  std::printf("     sweep context built in %.1f s (%s grid, jobs %u)\n", seconds_since(t0),
              full ? "full" : "restricted", jobs);
  auto with_ctx = [&](Outcome (*fn)(const SweepContext&)) {
    return [&, fn] { return ctx_error.empty() ? fn(ctx) : Outcome{false, "sweep failed: " + ctx_error}; };
  };
  check(6, "feature-set ordering (SVM, standard)", with_ctx(feature_ordering));
  check(7, "filtered >= raw per classifier", with_ctx(filtered_vs_raw));
  check(8, "transition recall N=16 > N=3 (SVM)", with_ctx(memory_recall));
  check(9, "scaler oracles", scaler_oracles);
  check(10, "classifier sanity", classifier_sanity);
  check(11, "determinism", [&] { return determinism(seed, jobs); });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
