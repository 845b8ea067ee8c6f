#pragma once

// Binary classifiers over tabular features: stratified and majority dummies,
// Gaussian naive Bayes, L2-regularized logistic regression and a random forest
// of CART trees. Every prediction carries the positive-class probability and a
// per-feature explanation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "dysscreen/error.hpp"
#include "dysscreen/rng.hpp"
#include "dysscreen/sessions.hpp"

namespace dysscreen {

enum class ModelKind { DummyStratified, DummyMajority, GaussianNB, Logistic, RandomForest };

inline std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::DummyStratified: return "dummy_stratified";
    case ModelKind::DummyMajority: return "dummy_majority";
    case ModelKind::GaussianNB: return "naive_bayes";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::RandomForest: return "random_forest";
  }
  return "dummy_majority";
}

// Row labels used in evaluation tables.
inline std::string_view display_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::DummyStratified: return "Stratified dummy";
    case ModelKind::DummyMajority: return "Majority class";
    case ModelKind::GaussianNB: return "Naive Bayes";
    case ModelKind::Logistic: return "Logistic reg.";
    case ModelKind::RandomForest: return "Random Forest";
  }
  return "";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "dummy_stratified" || s == "stratified") return ModelKind::DummyStratified;
  if (s == "dummy_majority" || s == "majority") return ModelKind::DummyMajority;
  if (s == "naive_bayes" || s == "nb") return ModelKind::GaussianNB;
  if (s == "logistic" || s == "lr") return ModelKind::Logistic;
  if (s == "random_forest" || s == "rf") return ModelKind::RandomForest;
  throw ContractViolation("unknown model kind '" + std::string(s) + "'");
}

struct LogisticParams {
  double learning_rate = 0.05;
  std::size_t iterations = 2000;
  double l2 = 1e-3;

  friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;           // 0: unlimited
  std::size_t min_leaf = 1;
  std::size_t features_per_split = 0;  // 0: ceil(sqrt(arity))
  bool bootstrap = true;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct ModelSpec {
  ModelKind kind = ModelKind::RandomForest;
  LogisticParams logistic;
  ForestParams forest;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct DummyParams {
  double positive_prior = 0.0;
  bool majority_label = false;

  friend bool operator==(const DummyParams&, const DummyParams&) = default;
};

// Index 0 is the negative class, 1 the positive class.
struct NaiveBayesParams {
  std::array<double, 2> priors{};
  std::array<std::vector<double>, 2> means;
  std::array<std::vector<double>, 2> variances;

  friend bool operator==(const NaiveBayesParams&, const NaiveBayesParams&) = default;
};

// Weights apply to standardized features: z = (x - feature_mean) / feature_scale.
struct LogisticModelParams {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;

  friend bool operator==(const LogisticModelParams&, const LogisticModelParams&) = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double positive_fraction = 0.0;
  std::size_t samples = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i];
  }
  double predict(std::span<const double> x) const { return leaf_for(x).positive_fraction; }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestModelParams {
  std::vector<DecisionTree> trees;

  friend bool operator==(const ForestModelParams&, const ForestModelParams&) = default;
};

using ModelParameters = std::variant<DummyParams, NaiveBayesParams, LogisticModelParams, ForestModelParams>;

struct TrainedModel {
  ModelSpec spec;
  FeatureSchema schema;
  ModelParameters parameters;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

struct Contribution {
  std::string feature;
  double value = 0.0;
  double score = 0.0;  // signed evidence, or split share for forests
  std::string note;
};

struct Prediction {
  bool label = false;
  double probability = 0.0;  // of the positive class
  std::vector<Contribution> explanation;
};

inline constexpr double kVarianceFloor = 1e-9;

// Ties at 0.5 go to the positive class.
constexpr bool decide(double probability) noexcept { return probability >= 0.5; }

// ---------------------------------------------------------------------------
// Building blocks

inline double gini_from_counts(std::size_t positives, std::size_t total) {
  if (total == 0) throw ContractViolation("gini_impurity: empty label set");
  const double p = static_cast<double>(positives) / static_cast<double>(total);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

inline double gini_impurity(const std::vector<bool>& labels) {
  return gini_from_counts(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true)), labels.size());
}

inline double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> weight_gradient;
  double bias_gradient = 0.0;
};

/// Mean log-loss plus (l2/2)|w|^2 and its exact gradient. The bias is not regularized.
inline LossAndGradient logistic_loss_and_gradient(std::span<const double> weights, double bias, const Dataset& data,
                                                  double l2) {
  if (data.rows.empty()) throw ContractViolation("logistic_loss_and_gradient: empty dataset");
  const std::size_t d = weights.size();
  LossAndGradient out;
  out.weight_gradient.assign(d, 0.0);
  for (const auto& row : data.rows) {
    if (row.x.size() != d) throw SchemaError("logistic_loss_and_gradient: arity mismatch");
    double z = bias;
    for (std::size_t j = 0; j < d; ++j) z += weights[j] * row.x[j];
    const double y = row.label ? 1.0 : 0.0;
    out.loss += softplus(z) - y * z;
    const double residual = sigmoid(z) - y;
    for (std::size_t j = 0; j < d; ++j) out.weight_gradient[j] += residual * row.x[j];
    out.bias_gradient += residual;
  }
  const double n = static_cast<double>(data.rows.size());
  out.loss /= n;
  out.bias_gradient /= n;
  double norm2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    out.weight_gradient[j] = out.weight_gradient[j] / n + l2 * weights[j];
    norm2 += weights[j] * weights[j];
  }
  out.loss += 0.5 * l2 * norm2;
  return out;
}

namespace detail {

inline void require_both_classes(const Dataset& data, ModelKind kind) {
  if (data.count(true) == 0 || data.count(false) == 0)
    throw DegenerateDataError(std::string(display_name(kind)) + " needs at least one row of each class (got " +
                              std::to_string(data.count(true)) + " positive, " + std::to_string(data.count(false)) +
                              " negative)");
}

inline DummyParams fit_dummy(const Dataset& data) {
  if (data.rows.empty()) throw DegenerateDataError("dummy classifier needs at least one row");
  const auto pos = data.count(true);
  const auto neg = data.count(false);
  return {static_cast<double>(pos) / static_cast<double>(data.size()), pos >= neg};
}

inline NaiveBayesParams fit_naive_bayes(const Dataset& data) {
  const std::size_t d = data.arity();
  NaiveBayesParams p;
  std::array<std::size_t, 2> n{};
  for (int c = 0; c < 2; ++c) {
    p.means[c].assign(d, 0.0);
    p.variances[c].assign(d, 0.0);
  }
  for (const auto& row : data.rows) {
    const int c = row.label ? 1 : 0;
    ++n[c];
    for (std::size_t j = 0; j < d; ++j) p.means[c][j] += row.x[j];
  }
  for (int c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < d; ++j) p.means[c][j] /= static_cast<double>(n[c]);
  for (const auto& row : data.rows) {
    const int c = row.label ? 1 : 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = row.x[j] - p.means[c][j];
      p.variances[c][j] += dev * dev;
    }
  }
  for (int c = 0; c < 2; ++c) {
    p.priors[c] = static_cast<double>(n[c]) / static_cast<double>(data.size());
    for (std::size_t j = 0; j < d; ++j)
      p.variances[c][j] = std::max(p.variances[c][j] / static_cast<double>(n[c]), kVarianceFloor);
  }
  return p;
}

inline double log_gaussian(double x, double mean, double variance) {
  const double dev = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - dev * dev / (2.0 * variance);
}

inline LogisticModelParams fit_logistic(const Dataset& data, const LogisticParams& hp) {
  if (!(hp.learning_rate > 0.0)) throw ContractViolation("logistic learning_rate must be positive");
  if (hp.iterations == 0) throw ContractViolation("logistic iterations must be positive");
  if (hp.l2 < 0.0) throw ContractViolation("logistic l2 must be non-negative");
  const std::size_t d = data.arity();
  const double n = static_cast<double>(data.size());
  LogisticModelParams p;
  p.feature_mean.assign(d, 0.0);
  p.feature_scale.assign(d, 0.0);
  for (const auto& row : data.rows)
    for (std::size_t j = 0; j < d; ++j) p.feature_mean[j] += row.x[j] / n;
  for (const auto& row : data.rows)
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = row.x[j] - p.feature_mean[j];
      p.feature_scale[j] += dev * dev / n;
    }
  for (auto& s : p.feature_scale) s = s > 0.0 ? std::sqrt(s) : 1.0;

  Dataset standardized{data.schema, data.rows};
  for (auto& row : standardized.rows)
    for (std::size_t j = 0; j < d; ++j) row.x[j] = (row.x[j] - p.feature_mean[j]) / p.feature_scale[j];

  p.weights.assign(d, 0.0);
  p.bias = 0.0;
  for (std::size_t it = 0; it < hp.iterations; ++it) {
    const auto g = logistic_loss_and_gradient(p.weights, p.bias, standardized, hp.l2);
    for (std::size_t j = 0; j < d; ++j) p.weights[j] -= hp.learning_rate * g.weight_gradient[j];
    p.bias -= hp.learning_rate * g.bias_gradient;
  }
  return p;
}

// Grows one CART tree on the given row indices (repeats allowed).
class TreeBuilder {
public:
  TreeBuilder(const Dataset& data, const ForestParams& params, std::size_t features_per_split, std::uint64_t seed)
      : data_(data), params_(params), features_per_split_(features_per_split), rng_(seed) {}

  DecisionTree build(std::vector<std::size_t> indices) {
    tree_.nodes.clear();
    grow(indices, 0);
    return std::move(tree_);
  }

private:
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted child impurity times node size
  };

  std::int32_t grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const auto node_id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t pos = 0;
    for (auto i : idx) pos += data_.rows[i].label ? 1 : 0;
    {
      auto& node = tree_.nodes.back();
      node.samples = idx.size();
      node.positive_fraction = static_cast<double>(pos) / static_cast<double>(idx.size());
    }
    const bool pure = pos == 0 || pos == idx.size();
    const bool depth_reached = params_.max_depth > 0 && depth >= params_.max_depth;
    if (pure || depth_reached || idx.size() < 2 * params_.min_leaf) return node_id;

    const Split best = best_split(idx);
    if (best.feature < 0) return node_id;

    std::vector<std::size_t> left, right;
    for (auto i : idx)
      (data_.rows[i].x[static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return node_id;
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t d = data_.arity();
    std::vector<std::size_t> all(d);
    std::iota(all.begin(), all.end(), 0);
    if (features_per_split_ >= d) return all;
    for (std::size_t i = 0; i < features_per_split_; ++i) std::swap(all[i], all[i + uniform_index(rng_, d - i)]);
    all.resize(features_per_split_);
    std::sort(all.begin(), all.end());
    return all;
  }

  // Lowest weighted Gini over midpoints between consecutive distinct values;
  // ties keep the earlier feature, then the lower threshold.
  Split best_split(const std::vector<std::size_t>& idx) {
    Split best;
    const std::size_t n = idx.size();
    std::size_t total_pos = 0;
    for (auto i : idx) total_pos += data_.rows[i].label ? 1 : 0;
    std::vector<std::pair<double, bool>> column(n);
    for (auto f : candidate_features()) {
      for (std::size_t k = 0; k < n; ++k) column[k] = {data_.rows[idx[k]].x[f], data_.rows[idx[k]].label};
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first || (a.first == b.first && a.second < b.second); });
      std::size_t left_pos = 0;
      for (std::size_t k = 1; k < n; ++k) {
        left_pos += column[k - 1].second ? 1 : 0;
        if (!(column[k - 1].first < column[k].first)) continue;
        const std::size_t nl = k, nr = n - k;
        if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
        const double impurity = static_cast<double>(nl) * gini_from_counts(left_pos, nl) +
                                static_cast<double>(nr) * gini_from_counts(total_pos - left_pos, nr);
        if (best.feature < 0 || impurity < best.impurity) {
          double mid = column[k - 1].first + (column[k].first - column[k - 1].first) / 2.0;
          if (!(mid < column[k].first)) mid = column[k - 1].first;
          best = {static_cast<std::int32_t>(f), mid, impurity};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const ForestParams& params_;
  std::size_t features_per_split_;
  Rng rng_;
  DecisionTree tree_;
};

inline std::size_t resolve_features_per_split(const ForestParams& p, std::size_t arity) {
  if (p.features_per_split == 0)
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(arity))));
  if (p.features_per_split > arity)
    throw ContractViolation("features_per_split " + std::to_string(p.features_per_split) + " exceeds feature arity " +
                            std::to_string(arity));
  return p.features_per_split;
}

inline DecisionTree grow_tree(const Dataset& data, const ForestParams& p, std::size_t features_per_split,
                              std::uint64_t forest_seed, std::size_t tree_index) {
  const std::uint64_t seed = derive_seed(forest_seed, tree_index);
  Rng bootstrap_rng(derive_seed(seed, 1));
  std::vector<std::size_t> idx(data.size());
  if (p.bootstrap)
    for (auto& i : idx) i = uniform_index(bootstrap_rng, data.size());
  else
    std::iota(idx.begin(), idx.end(), 0);
  return TreeBuilder(data, p, features_per_split, derive_seed(seed, 2)).build(std::move(idx));
}

inline ForestModelParams fit_forest(const Dataset& data, const ForestParams& p, std::uint64_t seed,
                                    unsigned threads) {
  if (p.n_trees == 0) throw ContractViolation("random forest needs at least one tree");
  if (p.min_leaf == 0) throw ContractViolation("min_leaf must be positive");
  const std::size_t fps = resolve_features_per_split(p, data.arity());
  ForestModelParams forest;
  forest.trees.resize(p.n_trees);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(p.n_trees)));
  if (threads == 1) {
    for (std::size_t t = 0; t < p.n_trees; ++t) forest.trees[t] = grow_tree(data, p, fps, seed, t);
    return forest;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t t = w; t < p.n_trees; t += threads) forest.trees[t] = grow_tree(data, p, fps, seed, t);
    });
  for (auto& th : pool) th.join();
  return forest;
}

inline std::string percent(double share) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << share * 100.0 << '%';
  return os.str();
}

}  // namespace detail

/// Fits `spec` to `data`. Dummy models accept any non-empty data; the others
/// need both classes. Forest trees may be grown on `threads` workers; the
/// result does not depend on the thread count.
inline TrainedModel fit(const ModelSpec& spec, const Dataset& data, unsigned threads = 1) {
  data.validate();
  TrainedModel model{spec, data.schema, DummyParams{}};
  switch (spec.kind) {
    case ModelKind::DummyStratified:
    case ModelKind::DummyMajority:
      model.parameters = detail::fit_dummy(data);
      break;
    case ModelKind::GaussianNB:
      detail::require_both_classes(data, spec.kind);
      model.parameters = detail::fit_naive_bayes(data);
      break;
    case ModelKind::Logistic:
      detail::require_both_classes(data, spec.kind);
      model.parameters = detail::fit_logistic(data, spec.logistic);
      break;
    case ModelKind::RandomForest:
      detail::require_both_classes(data, spec.kind);
      model.parameters = detail::fit_forest(data, spec.forest, spec.seed, threads);
      break;
  }
  return model;
}

inline void check_schema(const TrainedModel& model, const FeatureSchema& schema) {
  if (model.schema != schema)
    throw SchemaError("model expects schema " + model.schema.name + "/" + std::to_string(model.schema.version) +
                      " but data has " + schema.name + "/" + std::to_string(schema.version));
}

/// Positive-class probability, decision and explanation for one feature vector.
inline Prediction predict(const TrainedModel& model, std::span<const double> x) {
  const auto& names = model.schema.features;
  if (x.size() != names.size())
    throw SchemaError("feature vector has " + std::to_string(x.size()) + " values, model schema " + model.schema.name +
                      " expects " + std::to_string(names.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw SchemaError("feature vector contains a non-finite value");

  Prediction out;
  const std::size_t d = x.size();
  if (const auto* p = std::get_if<DummyParams>(&model.parameters)) {
    out.probability = model.spec.kind == ModelKind::DummyMajority ? (p->majority_label ? 1.0 : 0.0) : p->positive_prior;
  } else if (const auto* p = std::get_if<NaiveBayesParams>(&model.parameters)) {
    std::array<double, 2> log_joint{};
    for (int c = 0; c < 2; ++c) {
      log_joint[c] = std::log(p->priors[c]);
      for (std::size_t j = 0; j < d; ++j) log_joint[c] += detail::log_gaussian(x[j], p->means[c][j], p->variances[c][j]);
    }
    const double top = std::max(log_joint[0], log_joint[1]);
    const double lse = top + std::log(std::exp(log_joint[0] - top) + std::exp(log_joint[1] - top));
    out.probability = std::exp(log_joint[1] - lse);
    for (std::size_t j = 0; j < d; ++j) {
      const double llr = detail::log_gaussian(x[j], p->means[1][j], p->variances[1][j]) -
                         detail::log_gaussian(x[j], p->means[0][j], p->variances[0][j]);
      out.explanation.push_back(
          {names[j], x[j], llr, llr >= 0 ? "log-likelihood ratio favours positive" : "log-likelihood ratio favours negative"});
    }
  } else if (const auto* p = std::get_if<LogisticModelParams>(&model.parameters)) {
    double z = p->bias;
    for (std::size_t j = 0; j < d; ++j) {
      const double term = p->weights[j] * (x[j] - p->feature_mean[j]) / p->feature_scale[j];
      z += term;
      out.explanation.push_back({names[j], x[j], term, term >= 0 ? "raises the logit" : "lowers the logit"});
    }
    out.probability = sigmoid(z);
  } else if (const auto* p = std::get_if<ForestModelParams>(&model.parameters)) {
    double sum = 0.0;
    std::vector<std::size_t> split_counts(d, 0);
    std::size_t splits = 0;
    for (const auto& tree : p->trees) {
      sum += tree.predict(x);
      for (const auto& node : tree.nodes)
        if (!node.is_leaf()) {
          ++split_counts[static_cast<std::size_t>(node.feature)];
          ++splits;
        }
    }
    out.probability = sum / static_cast<double>(p->trees.size());
    for (std::size_t j = 0; j < d; ++j) {
      const double share = splits ? static_cast<double>(split_counts[j]) / static_cast<double>(splits) : 0.0;
      out.explanation.push_back({names[j], x[j], share, "used in " + detail::percent(share) + " of splits"});
    }
  }
  out.probability = std::clamp(out.probability, 0.0, 1.0);
  out.label = decide(out.probability);
  return out;
}

/// As predict, but the stratified dummy draws its label with probability equal
/// to the stored prior (random guessing at the training class rates).
inline Prediction predict_sampled(const TrainedModel& model, std::span<const double> x, Rng& rng) {
  Prediction out = predict(model, x);
  if (model.spec.kind == ModelKind::DummyStratified) out.label = uniform01(rng) < out.probability;
  return out;
}

}  // namespace dysscreen
