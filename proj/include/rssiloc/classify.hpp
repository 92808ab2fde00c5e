#pragma once

// Zone classifiers: k-nearest neighbours, a Gini random forest and a
// one-vs-one RBF support vector machine trained by SMO.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rssiloc/error.hpp"
#include "rssiloc/features.hpp"
#include "rssiloc/matrix.hpp"
#include "rssiloc/model.hpp"
#include "rssiloc/seeding.hpp"

namespace rssiloc {

enum class Algorithm { Knn, RandomForest, Svm };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Knn: return "knn";
    case Algorithm::RandomForest: return "rf";
    case Algorithm::Svm: return "svm";
  }
  return "knn";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "knn") return Algorithm::Knn;
  if (s == "rf") return Algorithm::RandomForest;
  if (s == "svm") return Algorithm::Svm;
  throw ConfigError("unknown classifier '" + s + "' (expected knn, rf, svm)");
}

struct KnnParams {
  std::size_t k = 5;
};

struct ForestParams {
  std::size_t n_trees = 100;
  bool bootstrap = true;
  /// Candidate features per split; 0 means ceil(sqrt(d)).
  std::size_t max_features = 0;
  std::size_t min_samples_leaf = 1;
  /// 0 means unbounded.
  std::size_t max_depth = 0;
};

struct SvmParams {
  double c = 1.0;
  /// RBF width; unset means 1 / (d * mean feature variance).
  std::optional<double> gamma;
  double tolerance = 1e-3;
  std::size_t max_iterations = 100000;
  /// Kernel cache budget in bytes.
  std::size_t cache_bytes = std::size_t{256} << 20;
};

struct ClassifierParams {
  KnnParams knn;
  ForestParams forest;
  SvmParams svm;
};

namespace detail {

inline void check_training_set(const Matrix& x, std::span<const ZoneLabel> y) {
  if (x.rows() != y.size()) throw ConfigError("feature rows and labels differ in length");
  if (x.rows() == 0) throw ConfigError("empty training set");
  check_finite(x);
  std::array<bool, kZoneCount> present{};
  for (auto l : y) present[static_cast<std::size_t>(to_int(l))] = true;
  if (std::count(present.begin(), present.end(), true) < 2)
    throw ConfigError("training set must contain at least two classes");
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return {{"cols", m.cols()}, {"rows", rows}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(0, j.at("cols").get<std::size_t>());
  for (const auto& r : j.at("rows")) {
    const auto v = r.get<std::vector<double>>();
    m.append_row(v);
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// k-nearest neighbours

class KnnModel {
 public:
  KnnModel() = default;

  static KnnModel train(const Matrix& x, std::span<const ZoneLabel> y, const KnnParams& params) {
    detail::check_training_set(x, y);
    if (params.k < 1) throw ConfigError("knn: k must be >= 1");
    if (params.k > x.rows()) throw ConfigError("knn: k exceeds the training set size");
    KnnModel m;
    m.params_ = params;
    m.x_ = x;
    m.y_.assign(y.begin(), y.end());
    return m;
  }

  /// Majority of the k nearest rows. Equal distances are ordered by label so
  /// the result does not depend on training row order; a vote tie goes to
  /// the class of the nearest neighbour among the tied classes.
  ZoneLabel predict_one(std::span<const double> q) const {
    if (q.size() != x_.cols()) throw ConfigError("knn: feature width mismatch");
    std::vector<std::pair<double, int>> d(x_.rows());
    for (std::size_t i = 0; i < x_.rows(); ++i) d[i] = {detail::squared_distance(x_.row(i), q), to_int(y_[i])};
    const auto k = static_cast<std::ptrdiff_t>(params_.k);
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    std::array<std::size_t, kZoneCount> votes{};
    for (std::ptrdiff_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(d[static_cast<std::size_t>(i)].second)];
    const auto best = *std::max_element(votes.begin(), votes.end());
    for (std::ptrdiff_t i = 0; i < k; ++i) {
      const int label = d[static_cast<std::size_t>(i)].second;
      if (votes[static_cast<std::size_t>(label)] == best) return static_cast<ZoneLabel>(label);
    }
    return static_cast<ZoneLabel>(d.front().second);
  }

  std::size_t width() const noexcept { return x_.cols(); }
  const KnnParams& params() const noexcept { return params_; }

  nlohmann::json parameters_json() const {
    std::vector<int> y;
    for (auto l : y_) y.push_back(to_int(l));
    return {{"x", detail::matrix_to_json(x_)}, {"y", y}};
  }

  static KnnModel from_json(const nlohmann::json& hyper, const nlohmann::json& params) {
    KnnModel m;
    m.params_.k = hyper.at("k").get<std::size_t>();
    m.x_ = detail::matrix_from_json(params.at("x"));
    for (int v : params.at("y").get<std::vector<int>>()) m.y_.push_back(zone_from_int(v));
    if (m.y_.size() != m.x_.rows()) throw ConfigError("knn: parameter size mismatch");
    return m;
  }

 private:
  KnnParams params_;
  Matrix x_;
  std::vector<ZoneLabel> y_;
};

// ---------------------------------------------------------------------------
// Random forest

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

class DecisionTree {
 public:
  /// Grows a CART tree with Gini impurity on the given sample (indices may
  /// repeat). Goes left when x[feature] <= threshold.
  static DecisionTree grow(const Matrix& x, std::span<const int> y, std::vector<std::size_t> sample,
                           std::size_t max_features, std::size_t min_leaf, std::size_t max_depth,
                           std::mt19937_64& rng) {
    DecisionTree tree;
    const std::size_t d = x.cols();
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), std::size_t{0});
    std::vector<std::pair<double, int>> column;

    struct Job {
      int node;
      std::size_t begin, end, depth;
    };
    tree.nodes_.push_back({});
    std::vector<Job> stack{{0, 0, sample.size(), 0}};
    while (!stack.empty()) {
      const Job job = stack.back();
      stack.pop_back();
      const std::size_t n = job.end - job.begin;

      std::array<std::size_t, kZoneCount> counts{};
      for (std::size_t i = job.begin; i < job.end; ++i) ++counts[static_cast<std::size_t>(y[sample[i]])];
      // Majority label, ties to the smallest label.
      tree.nodes_[static_cast<std::size_t>(job.node)].label =
          static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
      if (pure || n < 2 * min_leaf || (max_depth > 0 && job.depth >= max_depth)) continue;

      double best_score = std::numeric_limits<double>::infinity();
      int best_feature = -1;
      double best_threshold = 0.0;
      std::shuffle(features.begin(), features.end(), rng);
      for (std::size_t fi = 0; fi < d; ++fi) {
        // Draw max_features candidates; keep looking only while none splits.
        if (fi >= max_features && best_feature >= 0) break;
        const std::size_t f = features[fi];
        column.clear();
        for (std::size_t i = job.begin; i < job.end; ++i) column.emplace_back(x(sample[i], f), y[sample[i]]);
        std::sort(column.begin(), column.end());
        if (column.front().first == column.back().first) continue;
        std::array<double, kZoneCount> left{}, right{};
        for (const auto& [v, l] : column) right[static_cast<std::size_t>(l)] += 1.0;
        for (std::size_t i = 0; i + 1 < column.size(); ++i) {
          left[static_cast<std::size_t>(column[i].second)] += 1.0;
          right[static_cast<std::size_t>(column[i].second)] -= 1.0;
          if (column[i].first == column[i + 1].first) continue;
          const double nl = static_cast<double>(i + 1), nr = static_cast<double>(n - i - 1);
          if (nl < static_cast<double>(min_leaf) || nr < static_cast<double>(min_leaf)) continue;
          double sl = 0.0, sr = 0.0;
          for (std::size_t c = 0; c < kZoneCount; ++c) {
            sl += left[c] * left[c];
            sr += right[c] * right[c];
          }
          // n_l * gini_l + n_r * gini_r = n - sum_l/n_l - sum_r/n_r
          const double score = -(sl / nl + sr / nr);
          if (score < best_score - 1e-12) {
            best_score = score;
            best_feature = static_cast<int>(f);
            const double mid = 0.5 * (column[i].first + column[i + 1].first);
            best_threshold = mid < column[i + 1].first ? mid : column[i].first;
          }
        }
      }
      if (best_feature < 0) continue;

      const auto mid_it = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                         sample.begin() + static_cast<std::ptrdiff_t>(job.end),
                                         [&](std::size_t i) { return x(i, static_cast<std::size_t>(best_feature)) <= best_threshold; });
      const auto mid = static_cast<std::size_t>(mid_it - sample.begin());
      const int left_id = static_cast<int>(tree.nodes_.size());
      tree.nodes_.push_back({});
      tree.nodes_.push_back({});
      auto& node = tree.nodes_[static_cast<std::size_t>(job.node)];
      node.feature = best_feature;
      node.threshold = best_threshold;
      node.left = left_id;
      node.right = left_id + 1;
      stack.push_back({left_id + 1, mid, job.end, job.depth + 1});
      stack.push_back({left_id, job.begin, mid, job.depth + 1});
    }
    return tree;
  }

  int predict(std::span<const double> q) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0)
      i = static_cast<std::size_t>(q[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold ? nodes_[i].left
                                                                                                          : nodes_[i].right);
    return nodes_[i].label;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  nlohmann::json to_json() const {
    std::vector<int> f, l, r, lab;
    std::vector<double> t;
    for (const auto& n : nodes_) {
      f.push_back(n.feature);
      t.push_back(n.threshold);
      l.push_back(n.left);
      r.push_back(n.right);
      lab.push_back(n.label);
    }
    return {{"feature", f}, {"threshold", t}, {"left", l}, {"right", r}, {"label", lab}};
  }

  static DecisionTree from_json(const nlohmann::json& j) {
    const auto f = j.at("feature").get<std::vector<int>>();
    const auto t = j.at("threshold").get<std::vector<double>>();
    const auto l = j.at("left").get<std::vector<int>>();
    const auto r = j.at("right").get<std::vector<int>>();
    const auto lab = j.at("label").get<std::vector<int>>();
    if (f.empty() || t.size() != f.size() || l.size() != f.size() || r.size() != f.size() || lab.size() != f.size())
      throw ConfigError("tree: malformed node arrays");
    DecisionTree tree;
    const int n = static_cast<int>(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] >= 0 && (l[i] <= static_cast<int>(i) || r[i] <= static_cast<int>(i) || l[i] >= n || r[i] >= n))
        throw ConfigError("tree: invalid child index");
      tree.nodes_.push_back({f[i], t[i], l[i], r[i], lab[i]});
    }
    return tree;
  }

 private:
  std::vector<TreeNode> nodes_;
};

class ForestModel {
 public:
  static ForestModel train(const Matrix& x, std::span<const ZoneLabel> y, const ForestParams& params,
                           std::uint64_t seed) {
    detail::check_training_set(x, y);
    if (params.n_trees < 1) throw ConfigError("forest: n_trees must be >= 1");
    if (params.min_samples_leaf < 1) throw ConfigError("forest: min_samples_leaf must be >= 1");
    ForestModel m;
    m.params_ = params;
    m.width_ = x.cols();
    const std::size_t mtry =
        params.max_features > 0
            ? std::min(params.max_features, x.cols())
            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
    std::vector<int> labels(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) labels[i] = to_int(y[i]);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
      std::mt19937_64 rng(derive_seed(seed, t));
      std::vector<std::size_t> sample(x.rows());
      if (params.bootstrap) {
        std::uniform_int_distribution<std::size_t> pick(0, x.rows() - 1);
        for (auto& s : sample) s = pick(rng);
      } else {
        std::iota(sample.begin(), sample.end(), std::size_t{0});
      }
      m.trees_.push_back(DecisionTree::grow(x, labels, std::move(sample), mtry, params.min_samples_leaf,
                                            params.max_depth, rng));
    }
    return m;
  }

  /// Vote counts per class for one row.
  std::array<std::size_t, kZoneCount> votes(std::span<const double> q) const {
    if (q.size() != width_) throw ConfigError("forest: feature width mismatch");
    std::array<std::size_t, kZoneCount> v{};
    for (const auto& t : trees_) ++v[static_cast<std::size_t>(t.predict(q))];
    return v;
  }

  /// Plurality vote; ties go to the smallest label value.
  static ZoneLabel plurality(const std::array<std::size_t, kZoneCount>& v) {
    return static_cast<ZoneLabel>(std::max_element(v.begin(), v.end()) - v.begin());
  }

  ZoneLabel predict_one(std::span<const double> q) const { return plurality(votes(q)); }

  std::size_t width() const noexcept { return width_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  const ForestParams& params() const noexcept { return params_; }

  nlohmann::json parameters_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"width", width_}, {"trees", trees}};
  }

  static ForestModel from_json(const nlohmann::json& hyper, const nlohmann::json& params) {
    ForestModel m;
    m.params_.n_trees = hyper.at("n_trees").get<std::size_t>();
    m.params_.bootstrap = hyper.at("bootstrap").get<bool>();
    m.params_.max_features = hyper.at("max_features").get<std::size_t>();
    m.params_.min_samples_leaf = hyper.at("min_samples_leaf").get<std::size_t>();
    m.params_.max_depth = hyper.at("max_depth").get<std::size_t>();
    m.width_ = params.at("width").get<std::size_t>();
    for (const auto& t : params.at("trees")) m.trees_.push_back(DecisionTree::from_json(t));
    if (m.trees_.empty()) throw ConfigError("forest: no trees");
    return m;
  }

 private:
  ForestParams params_;
  std::size_t width_ = 0;
  std::vector<DecisionTree> trees_;
};

// ---------------------------------------------------------------------------
// Support vector machine

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * detail::squared_distance(a, b));
}

/// Binary RBF machine: f(x) = sum_i coef_i K(sv_i, x) - rho, coef_i = y_i alpha_i.
struct BinaryMachine {
  int positive = 0;  // class voted for when f(x) > 0
  int negative = 1;
  double rho = 0.0;
  Matrix support;
  std::vector<double> coef;
  std::vector<double> alpha;
  std::vector<int> sign;
  std::size_t iterations = 0;
  bool converged = true;

  double decision(std::span<const double> q, double gamma) const {
    double f = -rho;
    for (std::size_t i = 0; i < support.rows(); ++i) f += coef[i] * rbf_kernel(support.row(i), q, gamma);
    return f;
  }
};

namespace detail {

/// Kernel rows computed on demand and kept in a bounded LRU cache. A row
/// returned by row() stays valid across the next call.
class KernelCache {
 public:
  KernelCache(const Matrix& x, double gamma, std::size_t budget_bytes) : x_(x), gamma_(gamma), norms_(x.rows()) {
    for (std::size_t i = 0; i < x.rows(); ++i) norms_[i] = dot(x.row(i), x.row(i));
    const std::size_t row_bytes = std::max<std::size_t>(1, x.rows() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
  }

  const std::vector<double>& row(std::size_t i) {
    if (auto it = rows_.find(i); it != rows_.end()) {
      order_.splice(order_.end(), order_, it->second.second);
      return it->second.first;
    }
    if (rows_.size() >= capacity_) {
      rows_.erase(order_.front());
      order_.pop_front();
    }
    std::vector<double> r(x_.rows());
    const auto xi = x_.row(i);
    for (std::size_t j = 0; j < x_.rows(); ++j) {
      const double d2 = std::max(0.0, norms_[i] + norms_[j] - 2.0 * dot(xi, x_.row(j)));
      r[j] = std::exp(-gamma_ * d2);
    }
    r[i] = 1.0;
    order_.push_back(i);
    return rows_.emplace(i, std::make_pair(std::move(r), std::prev(order_.end()))).first->second.first;
  }

 private:
  const Matrix& x_;
  double gamma_;
  std::vector<double> norms_;
  std::size_t capacity_;
  std::list<std::size_t> order_;
  std::unordered_map<std::size_t, std::pair<std::vector<double>, std::list<std::size_t>::iterator>> rows_;
};

/// SMO on the C-SVC dual with maximal-violating-pair working set selection.
inline BinaryMachine train_binary(const Matrix& x, std::span<const int> y, const SvmParams& p, double gamma) {
  const std::size_t n = x.rows();
  const double c = p.c;
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  KernelCache cache(x, gamma, p.cache_bytes);
  BinaryMachine m;
  const double tau = 1e-12;

  auto is_upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  std::size_t iter = 0;
  for (;; ++iter) {
    // i maximizes -y G over I_up, j minimizes over I_low.
    double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      const bool up = (y[t] == 1 && !is_upper(t)) || (y[t] == -1 && !is_lower(t));
      const bool low = (y[t] == -1 && !is_upper(t)) || (y[t] == 1 && !is_lower(t));
      if (up && v > gmax) {
        gmax = v;
        i = t;
      }
      if (low && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == n || j == n || gmax - gmin < p.tolerance) break;
    if (iter >= p.max_iterations) {
      m.converged = false;
      break;
    }

    const auto& ki = cache.row(i);
    const auto& kj = cache.row(j);
    const double kij = ki[j];
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = 2.0 - 2.0 * kij;
      if (quad <= 0.0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * kij;
      if (quad <= 0.0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
  }
  m.iterations = iter;

  // rho from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (is_upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      sum_free += yg;
      ++n_free;
    }
  }
  m.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

  m.support = Matrix(0, x.cols());
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0.0) {
      m.support.append_row(x.row(t));
      m.coef.push_back(y[t] * alpha[t]);
      m.alpha.push_back(alpha[t]);
      m.sign.push_back(y[t]);
    }
  return m;
}

}  // namespace detail

class SvmModel {
 public:
  static double default_gamma(const Matrix& x) {
    double mean_var = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double sd = detail::mean_and_pstd(x.column(c)).second;
      mean_var += sd * sd;
    }
    mean_var /= static_cast<double>(x.cols());
    return mean_var > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * mean_var) : 1.0;
  }

  static SvmModel train(const Matrix& x, std::span<const ZoneLabel> y, const SvmParams& params) {
    detail::check_training_set(x, y);
    if (!(params.c > 0.0)) throw ConfigError("svm: C must be > 0");
    if (params.gamma && !(*params.gamma > 0.0)) throw ConfigError("svm: gamma must be > 0");
    SvmModel m;
    m.params_ = params;
    m.width_ = x.cols();
    m.gamma_ = params.gamma.value_or(default_gamma(x));
    std::array<bool, kZoneCount> present{};
    for (auto l : y) present[static_cast<std::size_t>(to_int(l))] = true;
    for (int a = 0; a < kZoneCount; ++a)
      for (int b = a + 1; b < kZoneCount; ++b) {
        if (!present[static_cast<std::size_t>(a)] || !present[static_cast<std::size_t>(b)]) continue;
        Matrix sub(0, x.cols());
        std::vector<int> sy;
        for (std::size_t i = 0; i < x.rows(); ++i) {
          const int l = to_int(y[i]);
          if (l != a && l != b) continue;
          sub.append_row(x.row(i));
          sy.push_back(l == a ? 1 : -1);
        }
        BinaryMachine bm = detail::train_binary(sub, sy, params, m.gamma_);
        bm.positive = a;
        bm.negative = b;
        m.machines_.push_back(std::move(bm));
      }
    return m;
  }

  /// One-vs-one vote. Ties go to the class with the largest summed |f| over
  /// the machines it won, then to the smallest label.
  ZoneLabel predict_one(std::span<const double> q) const {
    if (q.size() != width_) throw ConfigError("svm: feature width mismatch");
    std::array<int, kZoneCount> votes{};
    std::array<double, kZoneCount> strength{};
    for (const auto& bm : machines_) {
      const double f = bm.decision(q, gamma_);
      const int winner = f > 0.0 ? bm.positive : bm.negative;
      ++votes[static_cast<std::size_t>(winner)];
      strength[static_cast<std::size_t>(winner)] += std::abs(f);
    }
    int best = 0;
    for (int c = 1; c < kZoneCount; ++c) {
      const auto cu = static_cast<std::size_t>(c), bu = static_cast<std::size_t>(best);
      if (votes[cu] > votes[bu] || (votes[cu] == votes[bu] && strength[cu] > strength[bu])) best = c;
    }
    return static_cast<ZoneLabel>(best);
  }

  double gamma() const noexcept { return gamma_; }
  std::size_t width() const noexcept { return width_; }
  const std::vector<BinaryMachine>& machines() const noexcept { return machines_; }
  const SvmParams& params() const noexcept { return params_; }

  nlohmann::json parameters_json() const {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& bm : machines_)
      ms.push_back({{"positive", bm.positive},
                    {"negative", bm.negative},
                    {"rho", bm.rho},
                    {"support", detail::matrix_to_json(bm.support)},
                    {"alpha", bm.alpha},
                    {"sign", bm.sign},
                    {"iterations", bm.iterations},
                    {"converged", bm.converged}});
    return {{"width", width_}, {"gamma", gamma_}, {"machines", ms}};
  }

  static SvmModel from_json(const nlohmann::json& hyper, const nlohmann::json& params) {
    SvmModel m;
    m.params_.c = hyper.at("c").get<double>();
    m.params_.tolerance = hyper.at("tolerance").get<double>();
    m.params_.max_iterations = hyper.at("max_iterations").get<std::size_t>();
    if (!hyper.at("gamma").is_null()) m.params_.gamma = hyper.at("gamma").get<double>();
    m.width_ = params.at("width").get<std::size_t>();
    m.gamma_ = params.at("gamma").get<double>();
    for (const auto& j : params.at("machines")) {
      BinaryMachine bm;
      bm.positive = j.at("positive").get<int>();
      bm.negative = j.at("negative").get<int>();
      bm.rho = j.at("rho").get<double>();
      bm.support = detail::matrix_from_json(j.at("support"));
      bm.alpha = j.at("alpha").get<std::vector<double>>();
      bm.sign = j.at("sign").get<std::vector<int>>();
      bm.iterations = j.at("iterations").get<std::size_t>();
      bm.converged = j.at("converged").get<bool>();
      if (bm.alpha.size() != bm.support.rows() || bm.sign.size() != bm.alpha.size())
        throw ConfigError("svm: parameter size mismatch");
      for (std::size_t i = 0; i < bm.alpha.size(); ++i) bm.coef.push_back(bm.sign[i] * bm.alpha[i]);
      m.machines_.push_back(std::move(bm));
    }
    return m;
  }

 private:
  SvmParams params_;
  std::size_t width_ = 0;
  double gamma_ = 1.0;
  std::vector<BinaryMachine> machines_;
};

// ---------------------------------------------------------------------------
// Type-erased classifier

class Classifier {
 public:
  Classifier() = default;

  static Classifier train(Algorithm algorithm, const Matrix& x, std::span<const ZoneLabel> y,
                          const ClassifierParams& params = {}, std::uint64_t seed = 0) {
    Classifier c;
    switch (algorithm) {
      case Algorithm::Knn: c.model_ = KnnModel::train(x, y, params.knn); break;
      case Algorithm::RandomForest: c.model_ = ForestModel::train(x, y, params.forest, seed); break;
      case Algorithm::Svm: c.model_ = SvmModel::train(x, y, params.svm); break;
    }
    return c;
  }

  static Classifier train(Algorithm algorithm, const LabeledFeatureMatrix& m, const ClassifierParams& params = {},
                          std::uint64_t seed = 0) {
    return train(algorithm, m.rows, m.labels, params, seed);
  }

  Algorithm algorithm() const {
    if (std::holds_alternative<KnnModel>(model_)) return Algorithm::Knn;
    if (std::holds_alternative<ForestModel>(model_)) return Algorithm::RandomForest;
    return Algorithm::Svm;
  }

  std::size_t width() const {
    return std::visit([](const auto& m) { return m.width(); }, model_);
  }

  ZoneLabel predict_one(std::span<const double> q) const {
    return std::visit([&](const auto& m) { return m.predict_one(q); }, model_);
  }

  std::vector<ZoneLabel> predict(const Matrix& rows) const {
    if (!rows.empty() && rows.cols() != width())
      throw ConfigError("feature width " + std::to_string(rows.cols()) + " does not match model width " +
                        std::to_string(width()));
    std::vector<ZoneLabel> out;
    out.reserve(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) out.push_back(predict_one(rows.row(r)));
    return out;
  }

  template <typename M>
  const M* get() const noexcept {
    return std::get_if<M>(&model_);
  }

  nlohmann::json to_json() const {
    nlohmann::json hyper;
    nlohmann::json params;
    if (const auto* k = get<KnnModel>()) {
      hyper = {{"k", k->params().k}};
      params = k->parameters_json();
    } else if (const auto* f = get<ForestModel>()) {
      const auto& p = f->params();
      hyper = {{"n_trees", p.n_trees},
               {"criterion", "gini"},
               {"bootstrap", p.bootstrap},
               {"max_features", p.max_features},
               {"min_samples_leaf", p.min_samples_leaf},
               {"max_depth", p.max_depth}};
      params = f->parameters_json();
    } else if (const auto* s = get<SvmModel>()) {
      const auto& p = s->params();
      hyper = {{"kernel", "rbf"},
               {"c", p.c},
               {"gamma", p.gamma ? nlohmann::json(*p.gamma) : nlohmann::json(nullptr)},
               {"tolerance", p.tolerance},
               {"max_iterations", p.max_iterations}};
      params = s->parameters_json();
    }
    return {{"algorithm", to_string(algorithm())}, {"hyperparams", hyper}, {"parameters", params}};
  }

  static Classifier from_json(const nlohmann::json& j) {
    Classifier c;
    try {
      const auto alg = algorithm_from_string(j.at("algorithm").get<std::string>());
      const auto& hyper = j.at("hyperparams");
      const auto& params = j.at("parameters");
      switch (alg) {
        case Algorithm::Knn: c.model_ = KnnModel::from_json(hyper, params); break;
        case Algorithm::RandomForest: c.model_ = ForestModel::from_json(hyper, params); break;
        case Algorithm::Svm: c.model_ = SvmModel::from_json(hyper, params); break;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    return c;
  }

 private:
  std::variant<KnnModel, ForestModel, SvmModel> model_;
};

}  // namespace rssiloc
