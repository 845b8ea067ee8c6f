#pragma once

// On-disk formats: word banks (.bank.json), trained models (.model.json),
// corpus directories, and atomic file replacement.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dysscreen/corpus.hpp"
#include "dysscreen/error.hpp"
#include "dysscreen/learners.hpp"
#include "dysscreen/sessions.hpp"

namespace dysscreen {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Writes next to the target, then renames over it, so readers never see a partial file.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw Error("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError({"'" + path.string() + "' is not valid JSON: " + e.what()});
  }
}

/// Every .txt file of a directory, sorted by file name.
inline std::vector<Document> load_corpus_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("corpus directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& f : files) docs.push_back({f.filename().string(), read_file(f)});
  return docs;
}

// ---------------------------------------------------------------------------
// Word bank

inline json to_json(const WordBank& bank) {
  const auto tokens = [](const std::vector<Token>& list) {
    json arr = json::array();
    for (const auto& t : list) arr.push_back({{"word", t.text}, {"count", t.count}});
    return arr;
  };
  json easy = json::array();
  for (const auto& t : bank.easy_words()) easy.push_back(t.text);
  return {{"dictionary", bank.dictionary()},
          {"short_list", tokens(bank.short_list())},
          {"long_list", tokens(bank.long_list())},
          {"easy_words", std::move(easy)}};
}

/// Rebuilds a bank; the 4-gram index is recomputed from the dictionary.
inline WordBank parse_word_bank(const json& j) {
  try {
    Dictionary dictionary;
    for (const auto& w : j.at("dictionary")) dictionary.insert(w.get<std::string>());
    const auto tokens = [](const json& arr) {
      std::vector<Token> out;
      for (const auto& t : arr) out.push_back({t.at("word").get<std::string>(), t.at("count").get<std::uint64_t>()});
      return out;
    };
    auto short_list = tokens(j.at("short_list"));
    auto long_list = tokens(j.at("long_list"));
    std::vector<Token> easy;
    for (const auto& w : j.at("easy_words")) {
      const auto text = w.get<std::string>();
      auto it = std::find_if(short_list.begin(), short_list.end(), [&](const Token& t) { return t.text == text; });
      if (it == short_list.end()) throw ValidationError({"easy word '" + text + "' is not in short_list"});
      easy.push_back(*it);
    }
    return WordBank(std::move(dictionary), std::move(short_list), std::move(long_list), std::move(easy));
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed word bank: ") + e.what()});
  } catch (const ContractViolation& e) {
    throw ValidationError({std::string("inconsistent word bank: ") + e.what()});
  }
}

// ---------------------------------------------------------------------------
// Models

inline constexpr int kModelFormatVersion = 1;

inline json to_json(const FeatureSchema& s) {
  return {{"name", s.name}, {"version", s.version}, {"features", s.features}};
}

inline FeatureSchema parse_feature_schema(const json& j) {
  return {j.at("name").get<std::string>(), j.at("version").get<int>(), j.at("features").get<std::vector<std::string>>()};
}

inline json to_json(const ModelSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"seed", s.seed},
          {"logistic",
           {{"learning_rate", s.logistic.learning_rate}, {"iterations", s.logistic.iterations}, {"l2", s.logistic.l2}}},
          {"forest",
           {{"n_trees", s.forest.n_trees},
            {"max_depth", s.forest.max_depth},
            {"min_leaf", s.forest.min_leaf},
            {"features_per_split", s.forest.features_per_split},
            {"bootstrap", s.forest.bootstrap}}}};
}

inline ModelSpec parse_model_spec(const json& j) {
  ModelSpec s;
  s.kind = parse_model_kind(j.at("kind").get<std::string>());
  s.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("logistic")) {
    const auto& l = j.at("logistic");
    s.logistic.learning_rate = l.value("learning_rate", s.logistic.learning_rate);
    s.logistic.iterations = l.value("iterations", s.logistic.iterations);
    s.logistic.l2 = l.value("l2", s.logistic.l2);
  }
  if (j.contains("forest")) {
    const auto& f = j.at("forest");
    s.forest.n_trees = f.value("n_trees", s.forest.n_trees);
    s.forest.max_depth = f.value("max_depth", s.forest.max_depth);
    s.forest.min_leaf = f.value("min_leaf", s.forest.min_leaf);
    s.forest.features_per_split = f.value("features_per_split", s.forest.features_per_split);
    s.forest.bootstrap = f.value("bootstrap", s.forest.bootstrap);
  }
  return s;
}

namespace detail {

struct ParamsToJson {
  json operator()(const DummyParams& p) const {
    return {{"positive_prior", p.positive_prior}, {"majority_label", p.majority_label}};
  }
  json operator()(const NaiveBayesParams& p) const {
    return {{"priors", p.priors},
            {"means", {p.means[0], p.means[1]}},
            {"variances", {p.variances[0], p.variances[1]}}};
  }
  json operator()(const LogisticModelParams& p) const {
    return {{"weights", p.weights}, {"bias", p.bias}, {"feature_mean", p.feature_mean}, {"feature_scale", p.feature_scale}};
  }
  json operator()(const ForestModelParams& p) const {
    json trees = json::array();
    for (const auto& t : p.trees) {
      json nodes = json::array();
      for (const auto& n : t.nodes)
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.positive_fraction, n.samples});
      trees.push_back({{"nodes", std::move(nodes)}});
    }
    return {{"trees", std::move(trees)}};
  }
};

inline void check_model(const TrainedModel& m) {
  std::vector<std::string> errors;
  const std::size_t d = m.schema.features.size();
  const auto arity = [&](const std::vector<double>& v, const char* what) {
    if (v.size() != d) errors.push_back(std::string(what) + " has " + std::to_string(v.size()) + " entries, expected " + std::to_string(d));
  };
  if (const auto* p = std::get_if<DummyParams>(&m.parameters)) {
    if (!(p->positive_prior >= 0.0 && p->positive_prior <= 1.0)) errors.push_back("dummy prior outside [0, 1]");
  } else if (const auto* p = std::get_if<NaiveBayesParams>(&m.parameters)) {
    if (std::abs(p->priors[0] + p->priors[1] - 1.0) > 1e-9) errors.push_back("naive Bayes priors do not sum to 1");
    for (int c = 0; c < 2; ++c) {
      if (!(p->priors[c] > 0.0)) errors.push_back("naive Bayes prior must be positive");
      arity(p->means[c], "means");
      arity(p->variances[c], "variances");
      for (double v : p->variances[c])
        if (!(v >= kVarianceFloor)) errors.push_back("variance below floor");
    }
  } else if (const auto* p = std::get_if<LogisticModelParams>(&m.parameters)) {
    arity(p->weights, "weights");
    arity(p->feature_mean, "feature_mean");
    arity(p->feature_scale, "feature_scale");
    for (double s : p->feature_scale)
      if (!(s > 0.0)) errors.push_back("feature_scale must be positive");
  } else if (const auto* p = std::get_if<ForestModelParams>(&m.parameters)) {
    if (p->trees.empty()) errors.push_back("forest has no trees");
    for (const auto& t : p->trees) {
      if (t.nodes.empty()) errors.push_back("tree has no nodes");
      const auto size = static_cast<std::int32_t>(t.nodes.size());
      for (std::int32_t i = 0; i < size; ++i) {
        const auto& n = t.nodes[static_cast<std::size_t>(i)];
        if (n.is_leaf()) continue;
        if (n.feature >= static_cast<std::int32_t>(d)) errors.push_back("split feature out of range");
        if (!std::isfinite(n.threshold)) errors.push_back("non-finite threshold");
        if (n.left <= i || n.right <= i || n.left >= size || n.right >= size) errors.push_back("bad child index");
      }
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

}  // namespace detail

inline json to_json(const TrainedModel& m) {
  return {{"schema_version", kModelFormatVersion},
          {"spec", to_json(m.spec)},
          {"feature_schema", to_json(m.schema)},
          {"parameters", std::visit(detail::ParamsToJson{}, m.parameters)}};
}

/// Parses and checks a model document. With `expected`, the stored feature
/// schema must match it exactly.
inline TrainedModel parse_model(const json& j, const FeatureSchema* expected = nullptr) {
  TrainedModel m;
  try {
    if (j.at("schema_version").get<int>() != kModelFormatVersion)
      throw SchemaError("unsupported model schema_version " + j.at("schema_version").dump());
    m.spec = parse_model_spec(j.at("spec"));
    m.schema = parse_feature_schema(j.at("feature_schema"));
    const auto& p = j.at("parameters");
    switch (m.spec.kind) {
      case ModelKind::DummyStratified:
      case ModelKind::DummyMajority:
        m.parameters = DummyParams{p.at("positive_prior").get<double>(), p.at("majority_label").get<bool>()};
        break;
      case ModelKind::GaussianNB: {
        NaiveBayesParams nb;
        nb.priors = p.at("priors").get<std::array<double, 2>>();
        for (int c = 0; c < 2; ++c) {
          nb.means[c] = p.at("means").at(c).get<std::vector<double>>();
          nb.variances[c] = p.at("variances").at(c).get<std::vector<double>>();
        }
        m.parameters = std::move(nb);
        break;
      }
      case ModelKind::Logistic:
        m.parameters = LogisticModelParams{p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>(),
                                           p.at("feature_mean").get<std::vector<double>>(),
                                           p.at("feature_scale").get<std::vector<double>>()};
        break;
      case ModelKind::RandomForest: {
        ForestModelParams forest;
        for (const auto& t : p.at("trees")) {
          DecisionTree tree;
          for (const auto& n : t.at("nodes"))
            tree.nodes.push_back({n.at(0).get<std::int32_t>(), n.at(1).get<double>(), n.at(2).get<std::int32_t>(),
                                  n.at(3).get<std::int32_t>(), n.at(4).get<double>(), n.at(5).get<std::size_t>()});
          forest.trees.push_back(std::move(tree));
        }
        m.parameters = std::move(forest);
        break;
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed model: ") + e.what()});
  }
  detail::check_model(m);
  if (expected) check_schema(m, *expected);
  return m;
}

}  // namespace dysscreen
