// dysscreen command-line front end. Exit codes: 0 success, 1 pipeline error,
// 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "dysscreen/config.hpp"
#include "dysscreen/evaluation.hpp"
#include "dysscreen/io.hpp"
#include "dysscreen/report.hpp"
#include "dysscreen/service.hpp"

namespace fs = std::filesystem;
using namespace dysscreen;

namespace {

struct UsageError : Error {
  using Error::Error;
};

void emit(const std::string& text, const std::optional<fs::path>& out) {
  if (out)
    write_file_atomic(*out, text);
  else
    std::cout << text;
}

Dataset load_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_csv(in);
}

FeatureSchema schema_for(const std::string& task) {
  if (task == "dyslexia") return dyslexia_schema();
  if (task == "dysgraphia") return dysgraphia_schema();
  throw UsageError("unknown task '" + task + "' (expected dyslexia or dysgraphia)");
}

// Data must carry the task's schema; a custom header is accepted when the
// column count matches, so hand-made CSVs with renamed columns still work.
Dataset load_task_data(const std::string& task, const fs::path& path) {
  Dataset data = load_csv(path);
  const FeatureSchema expected = schema_for(task);
  if (data.schema.name == "custom" && data.arity() == expected.features.size()) data.schema = expected;
  if (data.schema != expected)
    throw SchemaError(path.string() + " has schema " + data.schema.name + ", task " + task + " needs " + expected.name);
  return data;
}

std::vector<ModelKind> model_kinds(const std::vector<std::string>& names) {
  if (names.empty() || (names.size() == 1 && names[0] == "all"))
    return {ModelKind::DummyStratified, ModelKind::DummyMajority, ModelKind::GaussianNB, ModelKind::Logistic,
            ModelKind::RandomForest};
  std::vector<ModelKind> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse_model_kind(n));
    } catch (const ContractViolation& e) {
      throw UsageError(e.what());
    }
  }
  return out;
}

struct ModelOptions {
  std::size_t trees = ForestParams{}.n_trees;
  std::size_t max_depth = 0;
  std::size_t min_leaf = 1;
  std::size_t features_per_split = 0;
  double learning_rate = LogisticParams{}.learning_rate;
  std::size_t iterations = LogisticParams{}.iterations;
  double l2 = LogisticParams{}.l2;

  void add(CLI::App* cmd) {
    cmd->add_option("--trees", trees, "Random forest size")->capture_default_str();
    cmd->add_option("--max-depth", max_depth, "Tree depth limit (0: none)")->capture_default_str();
    cmd->add_option("--min-leaf", min_leaf, "Minimum rows per leaf")->capture_default_str();
    cmd->add_option("--features-per-split", features_per_split, "Candidate features per split (0: sqrt)");
    cmd->add_option("--learning-rate", learning_rate, "Logistic step size")->capture_default_str();
    cmd->add_option("--iterations", iterations, "Logistic gradient steps")->capture_default_str();
    cmd->add_option("--l2", l2, "Logistic L2 penalty")->capture_default_str();
  }

  ModelSpec spec(ModelKind kind, std::uint64_t seed) const {
    ModelSpec s;
    s.kind = kind;
    s.seed = seed;
    s.forest = {trees, max_depth, min_leaf, features_per_split, true};
    s.logistic = {learning_rate, iterations, l2};
    return s;
  }
};

ReadingSession load_session(const fs::path& path, const std::optional<WordBank>& bank, const AppConfig& cfg) {
  const json doc = read_json_file(path);
  if (!bank) return parse_session(doc);
  const ReadingSession shape = parse_session(doc);
  const auto model = train_char_model(*bank, cfg.model_order, cfg.seed);
  return validate_session(doc, assemble_word_list(*bank, model, cfg.difficulty(), shape.age_years, shape.wordlist_seed));
}

void print_validation(const ValidationError& e) {
  std::cerr << "error: " << e.what() << '\n';
  for (const auto& d : e.details()) std::cerr << "  - " << d << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reading and handwriting screening toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::optional<fs::path> config_file;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::size_t> order_flag;
  std::optional<std::string> letters_flag, combos_flag;
  app.add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);

  const auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed_flag, "Seed (default: config seed)"); };
  const auto add_generation = [&](CLI::App* cmd) {
    cmd->add_option("--order", order_flag, "Character model order");
    cmd->add_option("--letters", letters_flag, "Difficulty letters, e.g. bdpq");
    cmd->add_option("--combinations", combos_flag, "Difficulty combinations, comma separated");
  };

  // bank build
  auto* bank_cmd = app.add_subcommand("bank", "Word bank commands")->require_subcommand(1);
  auto* bank_build = bank_cmd->add_subcommand("build", "Tokenize a corpus directory into a word bank");
  std::optional<fs::path> corpus_dir;
  fs::path bank_out;
  std::size_t bucket_cap = kDefaultBucketCap, easy_count = kDefaultEasyCount;
  bank_build->add_option("--corpus", corpus_dir, "Directory of UTF-8 .txt files");
  bank_build->add_option("--out", bank_out, "Bank JSON to write")->required();
  bank_build->add_option("--cap", bucket_cap, "Entries kept per length bucket")->capture_default_str();
  bank_build->add_option("--easy", easy_count, "Most frequent short words kept as easy words")->capture_default_str();

  // wordlist gen
  auto* wl_cmd = app.add_subcommand("wordlist", "Assessment word lists")->require_subcommand(1);
  auto* wl_gen = wl_cmd->add_subcommand("gen", "Assemble the 32-word list for an age");
  std::optional<fs::path> bank_path;
  int age = 0;
  std::optional<fs::path> out_path;
  wl_gen->add_option("--bank", bank_path, "Word bank JSON");
  wl_gen->add_option("--age", age, "Reader age in years")->required();
  wl_gen->add_option("--out", out_path, "Write here instead of stdout");
  add_seed(wl_gen);
  add_generation(wl_gen);

  // session validate
  auto* sess_cmd = app.add_subcommand("session", "Reading session documents")->require_subcommand(1);
  auto* sess_validate = sess_cmd->add_subcommand("validate", "Validate session files against their word lists");
  std::vector<fs::path> inputs;
  sess_validate->add_option("--bank", bank_path, "Word bank JSON (enables word-set checks)");
  sess_validate->add_option("files", inputs, "Session JSON files")->required()->check(CLI::ExistingFile);
  add_generation(sess_validate);

  // features extract
  auto* feat_cmd = app.add_subcommand("features", "Feature tables")->require_subcommand(1);
  auto* feat_extract = feat_cmd->add_subcommand("extract", "Turn labeled sessions or samples into a CSV table");
  std::string task;
  feat_extract->add_option("--task", task, "dyslexia or dysgraphia")->required();
  feat_extract->add_option("--bank", bank_path, "Word bank JSON (enables word-set checks)");
  feat_extract->add_option("--out", out_path, "CSV to write instead of stdout");
  feat_extract->add_option("files", inputs, "Session or sample JSON files")->required()->check(CLI::ExistingFile);
  add_generation(feat_extract);

  // train
  auto* train_cmd = app.add_subcommand("train", "Fit a model on a feature table");
  fs::path data_path;
  std::string model_name = "random_forest";
  fs::path model_out;
  ModelOptions model_opts;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  train_cmd->add_option("--task", task, "dyslexia or dysgraphia")->required();
  train_cmd->add_option("--data", data_path, "Feature CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--model", model_name, "Model kind")->capture_default_str();
  train_cmd->add_option("--out", model_out, "Model JSON to write")->required();
  train_cmd->add_option("--threads", threads, "Worker threads for forests");
  add_seed(train_cmd);
  model_opts.add(train_cmd);

  // eval cv
  auto* eval_cmd = app.add_subcommand("eval", "Model evaluation")->require_subcommand(1);
  auto* eval_cv = eval_cmd->add_subcommand("cv", "Stratified k-fold cross-validation");
  std::vector<std::string> model_names;
  std::optional<std::size_t> k_flag;
  bool as_json = false, show_confusion = false;
  eval_cv->add_option("--task", task, "dyslexia or dysgraphia")->required();
  eval_cv->add_option("--data", data_path, "Feature CSV")->required()->check(CLI::ExistingFile);
  eval_cv->add_option("--model", model_names, "Model kind, repeatable (default: all)");
  eval_cv->add_option("--k", k_flag, "Folds (default: 5 for dyslexia, 10 for dysgraphia)");
  eval_cv->add_flag("--json", as_json, "Emit JSON reports instead of the table");
  eval_cv->add_flag("--confusion", show_confusion, "Append summed confusion matrices");
  eval_cv->add_option("--out", out_path, "Write here instead of stdout");
  eval_cv->add_option("--threads", threads, "Worker threads for folds");
  add_seed(eval_cv);
  model_opts.add(eval_cv);

  // report compare / groups
  auto* report_cmd = app.add_subcommand("report", "Render saved results")->require_subcommand(1);
  auto* report_compare = report_cmd->add_subcommand("compare", "Table from JSON reports written by eval cv --json");
  report_compare->add_option("files", inputs, "Report JSON files")->required()->check(CLI::ExistingFile);
  report_compare->add_option("--out", out_path, "Write here instead of stdout");
  auto* report_groups = report_cmd->add_subcommand("groups", "Error rate and reading time by class and word kind");
  report_groups->add_option("--data", data_path, "Dyslexia feature CSV")->required()->check(CLI::ExistingFile);
  report_groups->add_option("--out", out_path, "Write here instead of stdout");

  // cohort make
  auto* cohort_cmd = app.add_subcommand("cohort", "Synthetic cohorts")->require_subcommand(1);
  auto* cohort_make = cohort_cmd->add_subcommand("make", "Generate a seeded synthetic feature table");
  std::size_t n_total = 0;
  double positive_fraction = 0.13;
  cohort_make->add_option("--task", task, "dyslexia or dysgraphia")->required();
  cohort_make->add_option("--n", n_total, "Rows")->required();
  cohort_make->add_option("--positive-fraction", positive_fraction, "Share of positive rows")->capture_default_str();
  cohort_make->add_option("--out", out_path, "CSV to write instead of stdout");
  add_seed(cohort_make);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Score one session or handwriting sample");
  fs::path model_path, input_path;
  predict_cmd->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--task", task, "dyslexia or dysgraphia")->required();
  predict_cmd->add_option("--input", input_path, "Session or sample JSON")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--bank", bank_path, "Word bank JSON (enables word-set checks)");
  add_generation(predict_cmd);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::optional<fs::path> dys_model, graph_model, data_dir, ui_dir;
  std::optional<std::string> host;
  std::optional<int> port;
  serve_cmd->add_option("--bank", bank_path, "Word bank JSON");
  serve_cmd->add_option("--dyslexia-model", dys_model, "Dyslexia model JSON");
  serve_cmd->add_option("--dysgraphia-model", graph_model, "Dysgraphia model JSON");
  serve_cmd->add_option("--data-dir", data_dir, "Session and sample store");
  serve_cmd->add_option("--ui-dir", ui_dir, "Static assets served at /");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port");
  add_seed(serve_cmd);
  add_generation(serve_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    AppConfig cfg;
    if (config_file) apply_config(cfg, parse_config_text(read_file(*config_file)));
    if (seed_flag) cfg.seed = *seed_flag;
    if (order_flag) cfg.model_order = *order_flag;
    if (letters_flag) cfg.difficulty_letters = *letters_flag;
    if (combos_flag) cfg.difficulty_combinations = *combos_flag;
    if (corpus_dir) cfg.corpus_dir = *corpus_dir;
    if (bank_path) cfg.bank_path = *bank_path;
    if (dys_model) cfg.dyslexia_model_path = *dys_model;
    if (graph_model) cfg.dysgraphia_model_path = *graph_model;
    if (data_dir) cfg.data_dir = *data_dir;
    if (ui_dir) cfg.ui_dir = *ui_dir;
    if (host) cfg.host = *host;
    if (port) cfg.port = *port;
    cfg.validate();

    const auto require_bank = [&]() -> WordBank {
      if (cfg.bank_path.empty()) throw UsageError("no word bank: pass --bank or set bank_path");
      return parse_word_bank(read_json_file(cfg.bank_path));
    };
    const auto optional_bank = [&]() -> std::optional<WordBank> {
      if (cfg.bank_path.empty()) return std::nullopt;
      return parse_word_bank(read_json_file(cfg.bank_path));
    };

    if (bank_build->parsed()) {
      if (cfg.corpus_dir.empty()) throw UsageError("no corpus: pass --corpus or set corpus_dir");
      const auto docs = load_corpus_dir(cfg.corpus_dir);
      if (docs.empty()) throw Error("no .txt files in " + cfg.corpus_dir.string());
      const WordBank bank = build_word_bank(tokenize_corpus(docs), bucket_cap, easy_count);
      write_file_atomic(bank_out, to_json(bank).dump(1) + "\n");
      std::printf("documents %zu\ndictionary %zu\nshort %zu\nlong %zu\neasy %zu\nfourgrams %zu\n", docs.size(),
                  bank.dictionary().size(), bank.short_list().size(), bank.long_list().size(),
                  bank.easy_words().size(), bank.fourgram_count());
    } else if (wl_gen->parsed()) {
      const WordBank bank = require_bank();
      const auto model = train_char_model(bank, cfg.model_order, cfg.seed);
      const WordList list = assemble_word_list(bank, model, cfg.difficulty(), age, cfg.seed);
      emit(to_json(list).dump(1) + "\n", out_path);
    } else if (sess_validate->parsed()) {
      const auto bank = optional_bank();
      int failures = 0;
      for (const auto& path : inputs) {
        try {
          const auto s = load_session(path, bank, cfg);
          std::cout << path.string() << ": ok (" << s.session_id << ", age " << s.age_years << ")\n";
        } catch (const ValidationError& e) {
          ++failures;
          std::cerr << path.string() << ":\n";
          print_validation(e);
        }
      }
      return failures ? 1 : 0;
    } else if (feat_extract->parsed()) {
      const FeatureSchema schema = schema_for(task);
      Dataset data;
      if (schema == dyslexia_schema()) {
        const auto bank = optional_bank();
        std::vector<ReadingSession> sessions;
        for (const auto& p : inputs) sessions.push_back(load_session(p, bank, cfg));
        data = to_dataset(std::span<const ReadingSession>(sessions));
      } else {
        std::vector<HandwritingSample> samples;
        for (const auto& p : inputs) samples.push_back(parse_handwriting(read_json_file(p)));
        data = to_dataset(std::span<const HandwritingSample>(samples));
      }
      std::ostringstream os;
      write_csv(data, os);
      emit(os.str(), out_path);
    } else if (train_cmd->parsed()) {
      const Dataset data = load_task_data(task, data_path);
      const auto kinds = model_kinds({model_name});
      const TrainedModel model = fit(model_opts.spec(kinds.front(), cfg.seed), data, threads);
      write_file_atomic(model_out, to_json(model).dump() + "\n");
      std::printf("trained %s on %zu rows (%zu positive)\n", std::string(display_name(model.spec.kind)).c_str(),
                  data.size(), data.count(true));
    } else if (eval_cv->parsed()) {
      const Dataset data = load_task_data(task, data_path);
      const std::size_t k = k_flag.value_or(task == "dyslexia" ? 5 : 10);
      std::vector<EvaluationReport> reports;
      for (auto kind : model_kinds(model_names))
        reports.push_back(cross_validate(model_opts.spec(kind, cfg.seed), data, k, cfg.seed, threads));
      std::string text;
      if (as_json) {
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(to_json(r));
        text = (reports.size() == 1 ? arr[0] : arr).dump(1) + "\n";
      } else {
        text = render_table(reports);
        if (show_confusion)
          for (const auto& r : reports) text += "\n" + std::string(display_name(r.spec.kind)) + "\n" + render_confusion(r.total);
      }
      emit(text, out_path);
    } else if (report_compare->parsed()) {
      std::vector<EvaluationReport> reports;
      for (const auto& p : inputs) {
        const json j = read_json_file(p);
        if (j.is_array())
          for (const auto& item : j) reports.push_back(parse_evaluation_report(item));
        else
          reports.push_back(parse_evaluation_report(j));
      }
      emit(render_table(reports), out_path);
    } else if (report_groups->parsed()) {
      emit(group_comparison_csv(group_comparison(load_task_data("dyslexia", data_path))), out_path);
    } else if (cohort_make->parsed()) {
      const CohortSpec spec = task == "dyslexia" ? default_dyslexia_cohort(n_total, positive_fraction, cfg.seed)
                            : task == "dysgraphia" ? default_dysgraphia_cohort(n_total, positive_fraction, cfg.seed)
                                                   : throw UsageError("unknown task '" + task + "'");
      std::ostringstream os;
      write_csv(make_cohort(spec), os);
      emit(os.str(), out_path);
    } else if (predict_cmd->parsed()) {
      const FeatureSchema schema = schema_for(task);
      const TrainedModel model = parse_model(read_json_file(model_path), &schema);
      Prediction p;
      if (task == "dyslexia") {
        p = predict(model, extract_dyslexia_features(load_session(input_path, optional_bank(), cfg)).values);
      } else {
        p = predict(model, parse_handwriting(read_json_file(input_path)).ratings);
      }
      std::cout << to_json(p).dump(1) << '\n';
    } else if (serve_cmd->parsed()) {
      Service service(cfg);
      httplib::Server server;
      service.mount(server);
      if (!server.bind_to_port(cfg.host, cfg.port)) throw Error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
      std::cerr << "listening on http://" << cfg.host << ':' << cfg.port << '\n';
      server.listen_after_bind();
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    print_validation(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
