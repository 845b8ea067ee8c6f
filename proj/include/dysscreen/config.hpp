#pragma once

// Application configuration: a flat `key = value` file that command-line flags override.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dysscreen/error.hpp"
#include "dysscreen/wordgen.hpp"

namespace dysscreen {

struct AppConfig {
  std::filesystem::path corpus_dir;
  std::filesystem::path bank_path;
  std::filesystem::path dyslexia_model_path;
  std::filesystem::path dysgraphia_model_path;
  std::filesystem::path data_dir = "store";
  std::filesystem::path ui_dir;
  std::optional<std::string> difficulty_letters;       // e.g. "bdpq"
  std::optional<std::string> difficulty_combinations;  // e.g. "ie,ei,ou"
  std::uint64_t seed = 42;
  std::size_t model_order = kDefaultModelOrder;
  std::string host = "127.0.0.1";
  int port = 8080;

  DifficultySet difficulty() const {
    DifficultySet d = default_difficulty();
    if (difficulty_letters) d.letters = {difficulty_letters->begin(), difficulty_letters->end()};
    if (difficulty_combinations) {
      d.combinations.clear();
      std::istringstream in(*difficulty_combinations);
      std::string item;
      while (std::getline(in, item, ','))
        if (!item.empty()) d.combinations.insert(item);
    }
    d.validate();
    return d;
  }

  void validate() const {
    std::vector<std::string> errors;
    if (port < 1 || port > 65535) errors.push_back("port " + std::to_string(port) + " outside [1, 65535]");
    if (model_order < 1) errors.push_back("model_order must be at least 1");
    try {
      (void)difficulty();
    } catch (const ContractViolation& e) {
      errors.push_back(e.what());
    }
    if (!errors.empty()) throw ValidationError(std::move(errors));
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Parses `key = value` lines. `#` starts a comment; values may be quoted.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError({"config line " + std::to_string(line_no) + ": expected key = value"});
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out[key] = value;
  }
  return out;
}

inline void apply_config(AppConfig& cfg, const std::map<std::string, std::string>& kv) {
  std::vector<std::string> errors;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "corpus_dir") cfg.corpus_dir = value;
      else if (key == "bank_path") cfg.bank_path = value;
      else if (key == "dyslexia_model") cfg.dyslexia_model_path = value;
      else if (key == "dysgraphia_model") cfg.dysgraphia_model_path = value;
      else if (key == "data_dir") cfg.data_dir = value;
      else if (key == "ui_dir") cfg.ui_dir = value;
      else if (key == "difficulty_letters") cfg.difficulty_letters = value;
      else if (key == "difficulty_combinations") cfg.difficulty_combinations = value;
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "model_order") cfg.model_order = std::stoul(value);
      else if (key == "host") cfg.host = value;
      else if (key == "port") cfg.port = std::stoi(value);
      else errors.push_back("unknown config key '" + key + "'");
    } catch (const std::logic_error&) {
      errors.push_back("config key '" + key + "': invalid value '" + value + "'");
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

}  // namespace dysscreen
