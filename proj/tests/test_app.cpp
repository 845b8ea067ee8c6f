#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "dysscreen/config.hpp"
#include "dysscreen/evaluation.hpp"
#include "dysscreen/service.hpp"
#include "fixtures.hpp"

using namespace dysscreen;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("dysscreen-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// Bank plus one model per task, written the way the CLI writes them.
struct Artifacts {
  TempDir dir;
  AppConfig config;

  Artifacts() {
    write_file_atomic(dir.path / "bank.json", to_json(fixture::sample_bank()).dump());
    ModelSpec spec;
    spec.kind = ModelKind::RandomForest;
    spec.forest.n_trees = 15;
    spec.seed = 3;
    write_file_atomic(dir.path / "dyslexia.model.json",
                      to_json(fit(spec, make_cohort(default_dyslexia_cohort(120, 0.4, 1)))).dump());
    write_file_atomic(dir.path / "dysgraphia.model.json",
                      to_json(fit(spec, make_cohort(default_dysgraphia_cohort(120, 0.3, 1)))).dump());
    config.bank_path = dir.path / "bank.json";
    config.dyslexia_model_path = dir.path / "dyslexia.model.json";
    config.dysgraphia_model_path = dir.path / "dysgraphia.model.json";
    config.data_dir = dir.path / "store";
    config.seed = 11;
  }
};

json as_session(Service& service, int age, std::uint64_t seed) {
  auto s = fixture::uniform_session(service.wordlist(age, seed), age, true, false, 640);
  s.label = false;
  return to_json(s);
}

json ratings_body(double v) {
  json r = json::object();
  for (const auto& name : handwriting_feature_names()) r[name] = v;
  return {{"ratings", r}};
}

}  // namespace

TEST_CASE("config text parsing", "[app]") {
  const auto kv = parse_config_text("# comment\nseed = 7\n  port=9000  # trailing\nhost = \"0.0.0.0\"\n\n");
  AppConfig cfg;
  apply_config(cfg, kv);
  CHECK(cfg.seed == 7);
  CHECK(cfg.port == 9000);
  CHECK(cfg.host == "0.0.0.0");

  CHECK_THROWS_AS(parse_config_text("no equals sign"), ValidationError);
  AppConfig other;
  CHECK_THROWS_AS(apply_config(other, {{"colour", "blue"}}), ValidationError);
  CHECK_THROWS_AS(apply_config(other, {{"port", "eighty"}}), ValidationError);
}

TEST_CASE("config validation", "[app]") {
  AppConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.port = 70000;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.port = 8080;
  cfg.difficulty_letters = "bD";
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.difficulty_letters = "z";
  cfg.difficulty_combinations = "ch,sh";
  const auto d = cfg.difficulty();
  CHECK(d.letters == std::set<char>{'z'});
  CHECK(d.combinations == std::set<std::string>{"ch", "sh"});
}

TEST_CASE("document store is append-only and content addressed", "[app]") {
  TempDir tmp;
  DocumentStore store(tmp.path);
  const json doc{{"a", 1}};
  const auto [id, created] = store.put("things", doc);
  CHECK(created);
  CHECK(id.size() == 16);
  CHECK(store.put("things", doc) == std::pair{id, false});
  CHECK(store.get("things", id) == doc);
  CHECK_FALSE(store.get("things", "0000000000000000"));
  CHECK_FALSE(store.get("things", "../../etc/passwd"));
}

TEST_CASE("service startup diagnostics", "[app]") {
  TempDir tmp;
  AppConfig cfg;
  cfg.data_dir = tmp.path;
  CHECK_THROWS_AS(Service(cfg), Error);
  cfg.bank_path = tmp.path / "missing.json";
  CHECK_THROWS_AS(Service(cfg), Error);

  Artifacts a;
  AppConfig mismatched = a.config;
  mismatched.dyslexia_model_path = a.config.dysgraphia_model_path;
  CHECK_THROWS_AS(Service(mismatched), SchemaError);
}

TEST_CASE("service handlers", "[app]") {
  Artifacts a;
  Service service(a.config);

  SECTION("health") {
    const auto r = service.health();
    CHECK(r.status == 200);
    CHECK(r.body["models"]["dyslexia"] == true);
  }
  SECTION("word lists") {
    const auto r = service.get_wordlist("10", "5");
    REQUIRE(r.status == 200);
    CHECK(parse_wordlist(r.body) == service.wordlist(10, 5));
    CHECK(r.body["age_band"] == "band2");
    CHECK(service.get_wordlist("10", std::nullopt).body["seed"] == 11);
    CHECK(service.get_wordlist(std::nullopt, "5").status == 400);
    CHECK(service.get_wordlist("ten", "5").status == 400);
    CHECK(service.get_wordlist("4", "5").status == 422);
  }
  SECTION("sessions are stored once and read back") {
    const json doc = as_session(service, 12, 99);
    const auto first = service.post_session(doc.dump());
    REQUIRE(first.status == 201);
    const std::string id = first.body["id"];
    CHECK(service.post_session(doc.dump()).status == 200);
    const auto got = service.get_session(id);
    CHECK(got.status == 200);
    CHECK(parse_session(got.body) == parse_session(doc));
    CHECK(service.get_session("ffffffffffffffff").status == 404);
  }
  SECTION("invalid sessions return details") {
    json doc = as_session(service, 12, 99);
    doc["records"][0]["reaction_ms"] = -5;
    doc["records"][1]["text"] = "Qq";
    const auto r = service.post_session(doc.dump());
    CHECK(r.status == 422);
    CHECK(r.body["details"].size() >= 2);
    CHECK(service.post_session("{not json").status == 400);
  }
  SECTION("handwriting samples") {
    json body = ratings_body(0.5);
    body["schema"] = "dys-hand/1";
    body["sample_id"] = "h-1";
    CHECK(service.post_sample(body.dump()).status == 201);
    body["ratings"]["slant"] = 2;
    CHECK(service.post_sample(body.dump()).status == 422);
  }
  SECTION("predictions") {
    const auto d = service.predict_dysgraphia(ratings_body(0.5).dump());
    REQUIRE(d.status == 200);
    CHECK(d.body["explanation"].size() == 8);
    CHECK(d.body["probability"].get<double>() >= 0);
    CHECK(d.body["label"].is_boolean());

    const auto s = service.predict_dyslexia(as_session(service, 8, 3).dump());
    REQUIRE(s.status == 200);
    CHECK(s.body["features"]["avg_reaction_ms"] == 640.0);
    CHECK(s.body["explanation"].size() == 10);
    // Same models, same request: same answer.
    CHECK(service.predict_dyslexia(as_session(service, 8, 3).dump()).body == s.body);
  }
}

TEST_CASE("predictions need a loaded model", "[app]") {
  Artifacts a;
  a.config.dysgraphia_model_path.clear();
  Service service(a.config);
  CHECK(service.predict_dysgraphia(ratings_body(0.5).dump()).status == 503);
  service.load_model(Service::Task::Dysgraphia, a.dir.path / "dysgraphia.model.json");
  CHECK(service.predict_dysgraphia(ratings_body(0.5).dump()).status == 200);
}

TEST_CASE("HTTP interface", "[app][http]") {
  Artifacts a;
  Service service(a.config);
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const auto health = client.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);

  const auto list = client.Get("/api/wordlist?age=10&seed=5");
  REQUIRE(list);
  CHECK(list->status == 200);
  CHECK(json::parse(list->body)["items"].size() == 32);

  const json doc = as_session(service, 10, 5);
  const auto posted = client.Post("/api/sessions", doc.dump(), "application/json");
  REQUIRE(posted);
  CHECK(posted->status == 201);
  const std::string id = json::parse(posted->body)["id"];
  const auto fetched = client.Get(("/api/sessions/" + id).c_str());
  REQUIRE(fetched);
  CHECK(fetched->status == 200);

  const auto bad = client.Post("/api/sessions", json{{"schema", "dys-session/1"}}.dump(), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);

  const auto pred = client.Post("/api/predict/dysgraphia", ratings_body(0.3).dump(), "application/json");
  REQUIRE(pred);
  CHECK(pred->status == 200);
  const auto body = json::parse(pred->body);
  CHECK(body.contains("probability"));
  CHECK(body.contains("label"));
  CHECK(body.contains("explanation"));

  const auto root = client.Get("/");
  REQUIRE(root);
  CHECK(root->status == 200);

  server.stop();
  worker.join();
}

TEST_CASE("static UI assets are served from ui_dir", "[app][http]") {
  Artifacts a;
  fs::create_directories(a.dir.path / "ui");
  std::ofstream(a.dir.path / "ui" / "index.html") << "<p>assessment</p>";
  a.config.ui_dir = a.dir.path / "ui";
  Service service(a.config);
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  const auto page = client.Get("/index.html");
  REQUIRE(page);
  CHECK(page->body == "<p>assessment</p>");
  server.stop();
  worker.join();
}
