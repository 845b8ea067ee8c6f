#pragma once

// HTTP/JSON service for the assessment front end. Handlers are plain member
// functions returning (status, body) so they can be called without a socket.

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "httplib.h"
#include "json.hpp"

#include "dysscreen/config.hpp"
#include "dysscreen/corpus.hpp"
#include "dysscreen/error.hpp"
#include "dysscreen/hash.hpp"
#include "dysscreen/io.hpp"
#include "dysscreen/learners.hpp"
#include "dysscreen/report.hpp"
#include "dysscreen/sessions.hpp"
#include "dysscreen/wordgen.hpp"

namespace dysscreen {

struct ApiResponse {
  int status = 200;
  json body;
};

/// Append-only document store: one JSON file per document, named by a
/// content-hash prefix. Writes are serialized; an existing id is never rewritten.
class DocumentStore {
public:
  explicit DocumentStore(std::filesystem::path root) : root_(std::move(root)) {}

  // Returns the id and whether a new file was written.
  std::pair<std::string, bool> put(const std::string& collection, const json& doc) {
    const std::string canonical = doc.dump();
    const std::string id = to_hex(fnv1a64(canonical)).substr(0, 16);
    std::lock_guard lock(mutex_);
    const auto path = root_ / collection / (id + ".json");
    if (std::filesystem::exists(path)) return {id, false};
    write_file_atomic(path, canonical + "\n");
    return {id, true};
  }

  std::optional<json> get(const std::string& collection, const std::string& id) const {
    if (id.empty() || id.find_first_not_of("0123456789abcdef") != std::string::npos) return std::nullopt;
    const auto path = root_ / collection / (id + ".json");
    std::lock_guard lock(mutex_);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return json::parse(read_file(path));
  }

private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

class Service {
public:
  /// Loads the bank (required) and any configured models; throws with a
  /// diagnostic when an artifact cannot be read.
  explicit Service(AppConfig config)
      : config_(std::move(config)), store_(config_.data_dir) {
    config_.validate();
    if (config_.bank_path.empty()) throw Error("service needs bank_path");
    bank_ = std::make_shared<const WordBank>(parse_word_bank(read_json_file(config_.bank_path)));
    char_model_ = std::make_shared<const CharModel>(train_char_model(*bank_, config_.model_order, config_.seed));
    difficulty_ = config_.difficulty();
    if (!config_.dyslexia_model_path.empty()) load_model(Task::Dyslexia, config_.dyslexia_model_path);
    if (!config_.dysgraphia_model_path.empty()) load_model(Task::Dysgraphia, config_.dysgraphia_model_path);
  }

  enum class Task { Dyslexia, Dysgraphia };

  // Reads the model fully before swapping it in; concurrent requests keep the old one.
  void load_model(Task task, const std::filesystem::path& path) {
    const FeatureSchema schema = task == Task::Dyslexia ? dyslexia_schema() : dysgraphia_schema();
    auto model = std::make_shared<const TrainedModel>(parse_model(read_json_file(path), &schema));
    std::lock_guard lock(models_mutex_);
    (task == Task::Dyslexia ? dyslexia_model_ : dysgraphia_model_) = std::move(model);
  }

  WordList wordlist(int age, std::uint64_t seed) const {
    return assemble_word_list(*bank_, *char_model_, difficulty_, age, seed);
  }

  ApiResponse health() const {
    return {200, {{"status", "ok"},
                  {"dictionary_size", bank_->dictionary().size()},
                  {"models", {{"dyslexia", static_cast<bool>(model(Task::Dyslexia))},
                              {"dysgraphia", static_cast<bool>(model(Task::Dysgraphia))}}}}};
  }

  ApiResponse get_wordlist(const std::optional<std::string>& age, const std::optional<std::string>& seed) const {
    return guarded([&]() -> ApiResponse {
      if (!age) return error(400, "missing query parameter 'age'");
      const auto age_v = parse_integer(*age, "age");
      const std::uint64_t seed_v = seed ? static_cast<std::uint64_t>(parse_integer(*seed, "seed")) : config_.seed;
      return {200, to_json(wordlist(static_cast<int>(age_v), seed_v))};
    });
  }

  ApiResponse post_session(const std::string& body) {
    return guarded([&]() -> ApiResponse {
      const json doc = parse_body(body);
      const ReadingSession s = validate_against_list(doc);
      auto [id, created] = store_.put("sessions", to_json(s));
      return {created ? 201 : 200, {{"id", id}}};
    });
  }

  ApiResponse get_session(const std::string& id) const {
    if (auto doc = store_.get("sessions", id)) return {200, *doc};
    return error(404, "no session '" + id + "'");
  }

  ApiResponse post_sample(const std::string& body) {
    return guarded([&]() -> ApiResponse {
      const HandwritingSample h = parse_handwriting(parse_body(body));
      auto [id, created] = store_.put("samples", to_json(h));
      return {created ? 201 : 200, {{"id", id}}};
    });
  }

  ApiResponse predict_dyslexia(const std::string& body) const {
    return guarded([&]() -> ApiResponse {
      const auto m = model(Task::Dyslexia);
      if (!m) return error(503, "no dyslexia model loaded");
      const ReadingSession s = validate_against_list(parse_body(body));
      const auto f = extract_dyslexia_features(s);
      json out = to_json(predict(*m, f.values));
      out["features"] = json::object();
      for (std::size_t i = 0; i < kDyslexiaFeatureCount; ++i) out["features"][dyslexia_feature_names()[i]] = f.values[i];
      return {200, std::move(out)};
    });
  }

  /// Accepts a full dys-hand/1 document or a bare {"ratings": {...}} object.
  ApiResponse predict_dysgraphia(const std::string& body) const {
    return guarded([&]() -> ApiResponse {
      const auto m = model(Task::Dysgraphia);
      if (!m) return error(503, "no dysgraphia model loaded");
      json doc = parse_body(body);
      if (doc.is_object() && !doc.contains("schema")) {
        doc["schema"] = kHandwritingSchema;
        if (!doc.contains("sample_id")) doc["sample_id"] = "anonymous";
      }
      const HandwritingSample h = parse_handwriting(doc);
      return {200, to_json(predict(*m, h.ratings))};
    });
  }

  void mount(httplib::Server& server) {
    const auto send = [](httplib::Response& res, const ApiResponse& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    const auto param = [](const httplib::Request& req, const char* key) -> std::optional<std::string> {
      if (!req.has_param(key)) return std::nullopt;
      return req.get_param_value(key);
    };
    server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    server.Get("/api/wordlist", [this, send, param](const httplib::Request& req, httplib::Response& res) {
      send(res, get_wordlist(param(req, "age"), param(req, "seed")));
    });
    server.Post("/api/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, post_session(req.body));
    });
    server.Get(R"(/api/sessions/([0-9a-zA-Z]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, get_session(req.matches[1]));
    });
    server.Post("/api/samples", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, post_sample(req.body));
    });
    server.Post("/api/predict/dyslexia", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, predict_dyslexia(req.body));
    });
    server.Post("/api/predict/dysgraphia", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, predict_dysgraphia(req.body));
    });
    if (!config_.ui_dir.empty() && std::filesystem::is_directory(config_.ui_dir)) {
      server.set_mount_point("/", config_.ui_dir.string());
    } else {
      server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            "<!doctype html><title>dysscreen</title><p>Assessment UI assets are not installed. "
            "Set <code>ui_dir</code> to serve them. API: <code>/api/health</code>.</p>",
            "text/html");
      });
    }
  }

  const WordBank& bank() const noexcept { return *bank_; }
  const AppConfig& config() const noexcept { return config_; }

private:
  std::shared_ptr<const TrainedModel> model(Task task) const {
    std::lock_guard lock(models_mutex_);
    return task == Task::Dyslexia ? dyslexia_model_ : dysgraphia_model_;
  }

  // The list is regenerated from (age, wordlist_seed), so sessions carry no list copy.
  ReadingSession validate_against_list(const json& doc) const {
    const ReadingSession shape = parse_session(doc);
    return validate_session(doc, wordlist(shape.age_years, shape.wordlist_seed));
  }

  static json parse_body(const std::string& body) {
    try {
      return json::parse(body);
    } catch (const json::parse_error& e) {
      throw BadRequest(std::string("request body is not valid JSON: ") + e.what());
    }
  }

  static long long parse_integer(const std::string& s, const char* name) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw BadRequest(std::string("query parameter '") + name + "' must be an integer");
  }

  struct BadRequest : Error {
    using Error::Error;
  };

  static ApiResponse error(int status, const std::string& message, json details = json::array()) {
    return {status, {{"error", message}, {"details", std::move(details)}}};
  }

  template <typename F>
  static ApiResponse guarded(F&& f) {
    try {
      return f();
    } catch (const BadRequest& e) {
      return error(400, e.what());
    } catch (const ValidationError& e) {
      return error(422, "validation failed", e.details());
    } catch (const UnsupportedAgeError& e) {
      return error(422, e.what());
    } catch (const SchemaError& e) {
      return error(422, e.what());
    } catch (const ContractViolation& e) {
      return error(422, e.what());
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

  AppConfig config_;
  DocumentStore store_;
  std::shared_ptr<const WordBank> bank_;
  std::shared_ptr<const CharModel> char_model_;
  DifficultySet difficulty_;
  mutable std::mutex models_mutex_;
  std::shared_ptr<const TrainedModel> dyslexia_model_;
  std::shared_ptr<const TrainedModel> dysgraphia_model_;
};

}  // namespace dysscreen
