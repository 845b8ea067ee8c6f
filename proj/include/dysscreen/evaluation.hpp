#pragma once

// Confusion counts, imbalance-aware metrics, stratified k-fold cross-validation,
// per-class group comparisons and synthetic cohort generation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "dysscreen/error.hpp"
#include "dysscreen/hash.hpp"
#include "dysscreen/learners.hpp"
#include "dysscreen/rng.hpp"
#include "dysscreen/sessions.hpp"

namespace dysscreen {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

namespace flag {
inline constexpr const char* no_positive_predictions = "no-positive-predictions";
inline constexpr const char* no_positive_labels = "no-positive-labels";
inline constexpr const char* f1_undefined = "f1-undefined";
}  // namespace flag

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::set<std::string> flags;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline ConfusionCounts confusion(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size())
    throw ContractViolation("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                            std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw ContractViolation("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i])
      ++(labels[i] ? c.tp : c.fp);
    else
      ++(labels[i] ? c.fn : c.tn);
  }
  return c;
}

/// Accuracy, precision, recall and F1. An undefined ratio is reported as 0
/// and the reason is recorded in flags.
inline Metrics metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw ContractViolation("metrics: empty confusion counts");
  Metrics m;
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  m.accuracy = d(c.tp + c.tn) / d(c.total());
  if (c.tp + c.fp == 0)
    m.flags.insert(flag::no_positive_predictions);
  else
    m.precision = d(c.tp) / d(c.tp + c.fp);
  if (c.tp + c.fn == 0)
    m.flags.insert(flag::no_positive_labels);
  else
    m.recall = d(c.tp) / d(c.tp + c.fn);
  if (m.precision + m.recall == 0.0)
    m.flags.insert(flag::f1_undefined);
  else
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

/// Partitions 0..n-1 into k folds preserving class proportions. Each class is
/// shuffled, then the positives followed by the negatives are dealt
/// round-robin, so fold sizes and per-fold positive counts differ by at most 1.
inline std::vector<std::vector<std::size_t>> stratified_kfold(std::size_t n, const std::vector<bool>& labels,
                                                              std::size_t k, std::uint64_t seed) {
  if (labels.size() != n)
    throw ContractViolation("stratified_kfold: n = " + std::to_string(n) + " but " + std::to_string(labels.size()) +
                            " labels");
  if (k < 2) throw ContractViolation("stratified_kfold: k must be at least 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) (labels[i] ? pos : neg).push_back(i);
  if (pos.size() < k || neg.size() < k)
    throw StratificationError("cannot stratify into " + std::to_string(k) + " folds: " + std::to_string(pos.size()) +
                              " positive and " + std::to_string(neg.size()) + " negative rows (each class needs >= k)");
  Rng rng(seed);
  shuffle(pos, rng);
  shuffle(neg, rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (const auto* group : {&pos, &neg})
    for (auto i : *group) folds[next++ % k].push_back(i);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation

  friend bool operator==(const Summary&, const Summary&) = default;
};

inline Summary summarize(const std::vector<double>& values) {
  if (values.empty()) return {};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

struct FoldResult {
  std::size_t test_size = 0;
  ConfusionCounts confusion;
  Metrics metrics;

  friend bool operator==(const FoldResult&, const FoldResult&) = default;
};

struct EvaluationReport {
  ModelSpec spec;
  std::string schema;
  std::string dataset_fingerprint;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;
  Summary accuracy, precision, recall, f1;
  ConfusionCounts total;

  // Number of folds carrying each degeneracy flag.
  std::vector<std::pair<std::string, std::size_t>> flag_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& f : folds)
      for (const auto& fl : f.metrics.flags) ++counts[fl];
    return {counts.begin(), counts.end()};
  }

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

inline std::string dataset_fingerprint(const Dataset& data) {
  std::ostringstream os;
  os << data.schema.name << '/' << data.schema.version << '\n';
  write_csv(data, os);
  return to_hex(fnv1a64(os.str()));
}

namespace detail {

inline FoldResult evaluate_fold(const ModelSpec& spec, const Dataset& data, const std::vector<std::size_t>& test,
                                std::uint64_t fold_seed) {
  std::vector<std::size_t> train;
  train.reserve(data.size() - test.size());
  for (std::size_t i = 0, t = 0; i < data.size(); ++i) {
    if (t < test.size() && test[t] == i)
      ++t;
    else
      train.push_back(i);
  }
  ModelSpec fold_spec = spec;
  fold_spec.seed = derive_seed(fold_seed, 1);
  const TrainedModel model = fit(fold_spec, data.subset(train));
  Rng rng(derive_seed(fold_seed, 2));
  std::vector<bool> predicted, actual;
  for (auto i : test) {
    predicted.push_back(predict_sampled(model, data.rows[i].x, rng).label);
    actual.push_back(data.rows[i].label);
  }
  FoldResult r;
  r.test_size = test.size();
  r.confusion = confusion(predicted, actual);
  r.metrics = metrics(r.confusion);
  return r;
}

}  // namespace detail

/// Stratified k-fold cross-validation. Fold models get seeds derived from
/// (seed, spec.seed, fold index), so concurrent and serial runs agree.
inline EvaluationReport cross_validate(const ModelSpec& spec, const Dataset& data, std::size_t k, std::uint64_t seed,
                                       unsigned threads = 1) {
  data.validate();
  const auto folds = stratified_kfold(data.size(), data.labels(), k, seed);
  EvaluationReport report;
  report.spec = spec;
  report.schema = data.schema.name;
  report.dataset_fingerprint = dataset_fingerprint(data);
  report.k = k;
  report.seed = seed;
  report.folds.resize(k);

  const std::uint64_t base = derive_seed(seed, spec.seed);
  const auto run = [&](std::size_t f) {
    try {
      report.folds[f] = detail::evaluate_fold(spec, data, folds[f], derive_seed(base, f));
    } catch (const DegenerateDataError& e) {
      throw DegenerateDataError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }
  };
  if (threads <= 1) {
    for (std::size_t f = 0; f < k; ++f) run(f);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t f = 0; f < k; ++f) pending.push_back(std::async(std::launch::async, run, f));
    for (auto& p : pending) p.get();
  }

  std::vector<double> acc, prec, rec, f1;
  for (const auto& f : report.folds) {
    acc.push_back(f.metrics.accuracy);
    prec.push_back(f.metrics.precision);
    rec.push_back(f.metrics.recall);
    f1.push_back(f.metrics.f1);
    report.total += f.confusion;
  }
  report.accuracy = summarize(acc);
  report.precision = summarize(prec);
  report.recall = summarize(rec);
  report.f1 = summarize(f1);
  return report;
}

// ---------------------------------------------------------------------------
// Group comparison (class x word kind)

struct GroupRow {
  bool positive = false;
  std::string word_kind;  // "real" or "pseudo"
  std::size_t n = 0;
  Summary error_rate;
  Summary reaction_ms;

  friend bool operator==(const GroupRow&, const GroupRow&) = default;
};

/// Error rate and reading time per class and word kind, in the order
/// (negative, real), (negative, pseudo), (positive, real), (positive, pseudo).
inline std::vector<GroupRow> group_comparison(const Dataset& data) {
  if (data.schema != dyslexia_schema())
    throw SchemaError("group comparison needs the dyslexia-features schema, got " + data.schema.name);
  if (data.count(true) == 0 || data.count(false) == 0)
    throw DegenerateDataError("group comparison needs rows of both classes");
  namespace ix = dyslexia_index;
  std::vector<GroupRow> out;
  for (bool positive : {false, true}) {
    for (const auto& [kind, err_col, rt_col] :
         {std::tuple{"real", ix::error_real, ix::reaction_real}, std::tuple{"pseudo", ix::error_pseudo, ix::reaction_pseudo}}) {
      std::vector<double> err, rt;
      for (const auto& row : data.rows) {
        if (row.label != positive) continue;
        err.push_back(row.x[err_col]);
        rt.push_back(row.x[rt_col]);
      }
      out.push_back({positive, kind, err.size(), summarize(err), summarize(rt)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

enum class CohortTask { Dyslexia, Dysgraphia };

inline std::string_view to_string(CohortTask t) noexcept { return t == CohortTask::Dyslexia ? "dyslexia" : "dysgraphia"; }

inline CohortTask parse_cohort_task(std::string_view s) {
  if (s == "dyslexia") return CohortTask::Dyslexia;
  if (s == "dysgraphia") return CohortTask::Dysgraphia;
  throw ContractViolation("unknown task '" + std::string(s) + "'");
}

struct FeatureDistribution {
  double mean = 0.0;
  double sd = 0.0;
};

/// Per-class normal profiles. Dyslexia profiles have 7 entries
/// (age, error/backtrack/reaction for real words, then for pseudo words);
/// overall averages are derived from the 17 real / 15 pseudo split of every
/// list. Dysgraphia profiles have the 8 ratings.
struct CohortSpec {
  CohortTask task = CohortTask::Dyslexia;
  std::size_t n_total = 0;
  double positive_fraction = 0.0;
  std::vector<FeatureDistribution> negative;
  std::vector<FeatureDistribution> positive;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDyslexiaProfileArity = 7;
inline constexpr double kRealWordsPerList = 17.0;
inline constexpr double kPseudoWordsPerList = 15.0;

// Round half up.
inline std::size_t cohort_positive_count(const CohortSpec& spec) {
  return static_cast<std::size_t>(std::floor(spec.positive_fraction * static_cast<double>(spec.n_total) + 0.5));
}

namespace detail {

struct Range {
  double lo, hi;
};

inline std::vector<Range> profile_ranges(CohortTask task) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (task == CohortTask::Dysgraphia) return std::vector<Range>(kHandwritingFeatureCount, {0.0, 1.0});
  return {{6.0, 120.0}, {0.0, 1.0}, {0.0, 1.0}, {0.0, inf}, {0.0, 1.0}, {0.0, 1.0}, {0.0, inf}};
}

}  // namespace detail

inline void validate(const CohortSpec& spec) {
  std::vector<std::string> errors;
  if (!(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0))
    errors.push_back("positive_fraction must lie strictly between 0 and 1");
  const auto n_pos = cohort_positive_count(spec);
  if (n_pos == 0 || n_pos >= spec.n_total) errors.push_back("cohort must contain rows of both classes");
  const auto ranges = detail::profile_ranges(spec.task);
  for (const auto& [name, profile] : {std::pair{"negative", &spec.negative}, std::pair{"positive", &spec.positive}}) {
    if (profile->size() != ranges.size()) {
      errors.push_back(std::string(name) + " profile has " + std::to_string(profile->size()) + " entries, expected " +
                       std::to_string(ranges.size()));
      continue;
    }
    for (std::size_t j = 0; j < ranges.size(); ++j) {
      const auto& d = (*profile)[j];
      if (!std::isfinite(d.mean) || d.mean < ranges[j].lo || d.mean > ranges[j].hi)
        errors.push_back(std::string(name) + " profile entry " + std::to_string(j) + ": mean out of range");
      if (!std::isfinite(d.sd) || d.sd < 0.0)
        errors.push_back(std::string(name) + " profile entry " + std::to_string(j) + ": sd must be finite and >= 0");
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

/// Seeded synthetic dataset: rates and ratings clipped to [0, 1], times to >= 0,
/// ages rounded to whole years. Row order is shuffled.
inline Dataset make_cohort(const CohortSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const auto n_pos = cohort_positive_count(spec);
  std::vector<bool> labels(spec.n_total, false);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), true);
  shuffle(labels, rng);

  const auto ranges = detail::profile_ranges(spec.task);
  Dataset data{spec.task == CohortTask::Dyslexia ? dyslexia_schema() : dysgraphia_schema(), {}};
  data.rows.reserve(spec.n_total);
  for (bool label : labels) {
    const auto& profile = label ? spec.positive : spec.negative;
    std::vector<double> draw(profile.size());
    for (std::size_t j = 0; j < profile.size(); ++j) {
      double v = profile[j].mean + profile[j].sd * standard_normal(rng);
      draw[j] = std::clamp(v, ranges[j].lo, ranges[j].hi);
    }
    if (spec.task == CohortTask::Dysgraphia) {
      data.rows.push_back({std::move(draw), label});
      continue;
    }
    const double age = std::round(draw[0]);
    std::vector<double> x(kDyslexiaFeatureCount);
    x[dyslexia_index::age] = age;
    for (std::size_t m = 0; m < 3; ++m) {
      const double real = draw[1 + m], pseudo = draw[4 + m];
      x[dyslexia_index::error + m] =
          (kRealWordsPerList * real + kPseudoWordsPerList * pseudo) / (kRealWordsPerList + kPseudoWordsPerList);
      x[dyslexia_index::error_real + m] = real;
      x[dyslexia_index::error_pseudo + m] = pseudo;
    }
    data.rows.push_back({std::move(x), label});
  }
  return data;
}

/// Profile shaped like observed reading behaviour: dyslexic readers err and
/// backtrack more and start reading later, most of all on pseudo-words.
inline CohortSpec default_dyslexia_cohort(std::size_t n_total, double positive_fraction, std::uint64_t seed) {
  CohortSpec spec;
  spec.task = CohortTask::Dyslexia;
  spec.n_total = n_total;
  spec.positive_fraction = positive_fraction;
  spec.seed = seed;
  spec.negative = {{11.0, 3.0}, {0.05, 0.04}, {0.04, 0.04}, {850.0, 200.0}, {0.15, 0.07}, {0.10, 0.06}, {1250.0, 300.0}};
  spec.positive = {{11.0, 3.0}, {0.20, 0.08}, {0.15, 0.07}, {1500.0, 400.0}, {0.45, 0.12}, {0.35, 0.10}, {2600.0, 600.0}};
  return spec;
}

/// Dysgraphic handwriting: lower regularity, weaker x-height contrast, wider spacing.
inline CohortSpec default_dysgraphia_cohort(std::size_t n_total, double positive_fraction, std::uint64_t seed) {
  CohortSpec spec;
  spec.task = CohortTask::Dysgraphia;
  spec.n_total = n_total;
  spec.positive_fraction = positive_fraction;
  spec.seed = seed;
  spec.negative = {{0.55, 0.12}, {0.50, 0.15}, {0.50, 0.12}, {0.35, 0.12},
                   {0.45, 0.12}, {0.75, 0.10}, {0.75, 0.10}, {0.78, 0.10}};
  spec.positive = {{0.50, 0.18}, {0.62, 0.15}, {0.35, 0.12}, {0.55, 0.14},
                   {0.60, 0.14}, {0.40, 0.12}, {0.38, 0.12}, {0.42, 0.12}};
  return spec;
}

}  // namespace dysscreen
