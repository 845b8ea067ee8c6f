#pragma once

// Rendering of evaluation results: the algorithm-by-metric text table,
// confusion grids, JSON documents and the group-comparison CSV.

#include <cstdio>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dysscreen/evaluation.hpp"
#include "dysscreen/io.hpp"

namespace dysscreen {

namespace detail {

inline std::string printf_string(const char* fmt, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace detail

// Accuracy as a percentage with one decimal, the rest as fractions with two.
inline std::string accuracy_cell(const Summary& s) { return detail::printf_string("%.1f [%.1f]", 100.0 * s.mean, 100.0 * s.sd); }
inline std::string ratio_cell(const Summary& s) { return detail::printf_string("%.2f [%.2f]", s.mean, s.sd); }

/// One row per algorithm, "mean [sd]" cells, followed by a protocol footer.
inline std::string render_table(std::span<const EvaluationReport> reports) {
  constexpr std::size_t name_w = 18, cell_w = 13;
  std::ostringstream os;
  const auto rule = [&] {
    os << '+' << std::string(name_w + 2, '-');
    for (int i = 0; i < 4; ++i) os << '+' << std::string(cell_w + 2, '-');
    os << "+\n";
  };
  const auto row = [&](const std::string& name, const std::vector<std::string>& cells) {
    os << "| " << detail::pad(name, name_w) << ' ';
    for (const auto& c : cells) os << "| " << detail::pad(c, cell_w) << ' ';
    os << "|\n";
  };
  rule();
  row("Alg.", {"Accuracy", "Precision", "Recall", "f1"});
  rule();
  for (const auto& r : reports)
    row(std::string(display_name(r.spec.kind)),
        {accuracy_cell(r.accuracy), ratio_cell(r.precision), ratio_cell(r.recall), ratio_cell(r.f1)});
  rule();
  if (!reports.empty()) {
    const auto& first = reports.front();
    os << "protocol: " << first.k << "-fold stratified cross-validation, seed " << first.seed << ", " << first.schema
       << " dataset " << first.dataset_fingerprint << '\n';
    os << "cells: mean [population sd] over folds; accuracy in percent\n";
    for (const auto& r : reports) {
      const auto flags = r.flag_counts();
      if (flags.empty()) continue;
      os << "flags: " << display_name(r.spec.kind) << ':';
      for (const auto& [name, n] : flags) os << ' ' << name << ' ' << n << '/' << r.k;
      os << '\n';
    }
  }
  return os.str();
}

inline std::string render_confusion(const ConfusionCounts& c) {
  std::vector<std::string> cells{std::to_string(c.tn), std::to_string(c.fp), std::to_string(c.fn), std::to_string(c.tp)};
  std::size_t w = 8;
  for (const auto& s : cells) w = std::max(w, s.size() + 1);
  std::ostringstream os;
  os << std::string(14, ' ') << "predicted\n";
  os << std::string(12, ' ') << detail::pad_left("neg", w) << detail::pad_left("pos", w) << '\n';
  os << "actual neg  " << detail::pad_left(cells[0], w) << detail::pad_left(cells[1], w) << '\n';
  os << "actual pos  " << detail::pad_left(cells[2], w) << detail::pad_left(cells[3], w) << '\n';
  return os.str();
}

inline json to_json(const ConfusionCounts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}; }

inline json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"flags", m.flags}};
}

inline json to_json(const Summary& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

inline json to_json(const EvaluationReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"test_size", f.test_size}, {"confusion", to_json(f.confusion)}, {"metrics", to_json(f.metrics)}});
  return {{"algorithm", display_name(r.spec.kind)},
          {"spec", to_json(r.spec)},
          {"schema", r.schema},
          {"dataset_fingerprint", r.dataset_fingerprint},
          {"k", r.k},
          {"seed", r.seed},
          {"stratified", true},
          {"sd", "population"},
          {"folds", std::move(folds)},
          {"accuracy", to_json(r.accuracy)},
          {"precision", to_json(r.precision)},
          {"recall", to_json(r.recall)},
          {"f1", to_json(r.f1)},
          {"confusion", to_json(r.total)}};
}

inline ConfusionCounts parse_confusion(const json& j) {
  return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("tn").get<std::size_t>(),
          j.at("fn").get<std::size_t>()};
}

inline Summary parse_summary(const json& j) { return {j.at("mean").get<double>(), j.at("sd").get<double>()}; }

/// Reads a report written by to_json(EvaluationReport).
inline EvaluationReport parse_evaluation_report(const json& j) {
  try {
    EvaluationReport r;
    r.spec = parse_model_spec(j.at("spec"));
    r.schema = j.at("schema").get<std::string>();
    r.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    r.k = j.at("k").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("folds")) {
      FoldResult fold;
      fold.test_size = f.at("test_size").get<std::size_t>();
      fold.confusion = parse_confusion(f.at("confusion"));
      const auto& m = f.at("metrics");
      fold.metrics = {m.at("accuracy").get<double>(), m.at("precision").get<double>(), m.at("recall").get<double>(),
                      m.at("f1").get<double>(), m.at("flags").get<std::set<std::string>>()};
      r.folds.push_back(std::move(fold));
    }
    r.accuracy = parse_summary(j.at("accuracy"));
    r.precision = parse_summary(j.at("precision"));
    r.recall = parse_summary(j.at("recall"));
    r.f1 = parse_summary(j.at("f1"));
    r.total = parse_confusion(j.at("confusion"));
    return r;
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed evaluation report: ") + e.what()});
  }
}

inline json to_json(const Prediction& p) {
  json expl = json::array();
  for (const auto& c : p.explanation)
    expl.push_back({{"feature", c.feature}, {"value", c.value}, {"score", c.score}, {"note", c.note}});
  return {{"probability", p.probability}, {"label", p.label}, {"explanation", std::move(expl)}};
}

inline std::string group_comparison_csv(const std::vector<GroupRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "class,word_kind,n,error_rate_mean,error_rate_sd,reaction_ms_mean,reaction_ms_sd\n";
  for (const auto& r : rows)
    os << (r.positive ? "positive" : "negative") << ',' << r.word_kind << ',' << r.n << ',' << r.error_rate.mean << ','
       << r.error_rate.sd << ',' << r.reaction_ms.mean << ',' << r.reaction_ms.sd << '\n';
  return os.str();
}

}  // namespace dysscreen
