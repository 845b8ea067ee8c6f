#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "dysscreen/evaluation.hpp"
#include "dysscreen/io.hpp"
#include "dysscreen/learners.hpp"
#include "oracles.hpp"

using namespace dysscreen;
using Catch::Approx;

namespace {

Dataset custom(std::size_t arity, std::vector<LabeledRow> rows) {
  FeatureSchema s{"custom", 1, {}};
  for (std::size_t j = 0; j < arity; ++j) s.features.push_back("f" + std::to_string(j));
  return {s, std::move(rows)};
}

Dataset one_d_example() { return custom(1, {{{0.0}, false}, {{1.0}, false}, {{10.0}, true}, {{11.0}, true}}); }

Dataset random_dataset(std::mt19937_64& rng, std::size_t rows, std::size_t arity, int distinct_values) {
  std::uniform_int_distribution<int> v(0, distinct_values - 1);
  std::bernoulli_distribution coin(0.5);
  std::vector<LabeledRow> out;
  for (std::size_t i = 0; i < rows; ++i) {
    LabeledRow r;
    for (std::size_t j = 0; j < arity; ++j) r.x.push_back(v(rng));
    r.label = coin(rng);
    out.push_back(std::move(r));
  }
  out[0].label = true;
  out[1].label = false;
  return custom(arity, std::move(out));
}

ModelSpec spec_of(ModelKind kind, std::uint64_t seed = 1) {
  ModelSpec s;
  s.kind = kind;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("naive Bayes closed form on the 1-D example", "[learners]") {
  const auto m = fit(spec_of(ModelKind::GaussianNB), one_d_example());
  const auto& p = std::get<NaiveBayesParams>(m.parameters);
  CHECK(p.means[0][0] == 0.5);
  CHECK(p.means[1][0] == 10.5);
  CHECK(p.variances[0][0] == 0.25);
  CHECK(p.variances[1][0] == 0.25);
  CHECK(p.priors[0] == 0.5);
  CHECK(p.priors[1] == 0.5);

  const double x = 0.2;
  const auto pred = predict(m, std::vector<double>{x});
  CHECK_FALSE(pred.label);
  CHECK(pred.probability < 0.5);
  // Equal priors and variances: the posterior odds are the Gaussian density ratio.
  const double log_odds = (-(x - 10.5) * (x - 10.5) + (x - 0.5) * (x - 0.5)) / (2 * 0.25);
  CHECK(pred.probability == Approx(1 / (1 + std::exp(-log_odds))).margin(1e-300));
  REQUIRE(pred.explanation.size() == 1);
  CHECK(pred.explanation[0].score < 0);
}

TEST_CASE("naive Bayes is invariant to duplicating every row", "[learners][property]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = random_dataset(rng, 12, 3, 7);
    auto doubled = d;
    doubled.rows.insert(doubled.rows.end(), d.rows.begin(), d.rows.end());
    const auto a = fit(spec_of(ModelKind::GaussianNB), d);
    const auto b = fit(spec_of(ModelKind::GaussianNB), doubled);
    for (const auto& row : d.rows)
      CHECK(predict(a, row.x).probability == Approx(predict(b, row.x).probability).epsilon(1e-9));
  }
}

TEST_CASE("naive Bayes floors zero variance", "[learners]") {
  const auto d = custom(2, {{{1.0, 0.0}, false}, {{1.0, 1.0}, false}, {{2.0, 5.0}, true}, {{2.0, 6.0}, true}});
  const auto m = fit(spec_of(ModelKind::GaussianNB), d);
  const auto& p = std::get<NaiveBayesParams>(m.parameters);
  CHECK(p.variances[0][0] == kVarianceFloor);
  const auto pred = predict(m, std::vector<double>{2.0, 5.5});
  CHECK(std::isfinite(pred.probability));
  CHECK(pred.label);
}

TEST_CASE("logistic regression on symmetric 1-D data", "[learners]") {
  const auto d = custom(1, {{{-2.0}, false}, {{-1.0}, false}, {{1.0}, true}, {{2.0}, true}});
  const auto m = fit(spec_of(ModelKind::Logistic), d);
  const auto& p = std::get<LogisticModelParams>(m.parameters);
  CHECK(p.weights[0] > 0);
  CHECK(std::abs(p.bias) < 1e-9);
  CHECK(predict(m, std::vector<double>{1.5}).label);
  CHECK_FALSE(predict(m, std::vector<double>{-1.5}).label);
}

TEST_CASE("a zero-weight logistic model predicts one half and the positive class", "[learners]") {
  TrainedModel m{spec_of(ModelKind::Logistic), custom(2, {}).schema, LogisticModelParams{{0, 0}, 0, {0, 0}, {1, 1}}};
  const auto pred = predict(m, std::vector<double>{3, -4});
  CHECK(pred.probability == 0.5);
  CHECK(pred.label);
}

TEST_CASE("logistic loss at zero weights is ln 2", "[learners]") {
  const auto d = custom(2, {{{1, 2}, true}, {{-3, 0.5}, false}, {{0, 0}, true}, {{4, 4}, false}});
  const std::vector<double> w{0, 0};
  CHECK(logistic_loss_and_gradient(w, 0, d, 0).loss == Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(logistic_loss_and_gradient(w, 0, d, 0.7).loss == Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("logistic gradient agrees with finite differences", "[learners][property]") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng() % 10, rows = 2 + rng() % 29;
    std::vector<LabeledRow> r;
    for (std::size_t i = 0; i < rows; ++i) {
      LabeledRow row;
      for (std::size_t j = 0; j < d; ++j) row.x.push_back(n01(rng));
      row.label = rng() % 2;
      r.push_back(row);
    }
    const auto data = custom(d, r);
    const double l2 = trial % 2 ? 0.1 : 0.0;
    std::vector<double> params(d + 1);
    for (auto& v : params) v = n01(rng);
    const std::vector<double> w(params.begin(), params.end() - 1);
    const auto g = logistic_loss_and_gradient(w, params.back(), data, l2);
    CHECK(g.loss == Approx(oracle::naive_logistic_loss(w, params.back(), data, l2)).epsilon(1e-10));
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& p) {
          return oracle::naive_logistic_loss({p.begin(), p.end() - 1}, p.back(), data, l2);
        },
        params, 1e-5);
    for (std::size_t j = 0; j <= d; ++j) {
      const double analytic = j < d ? g.weight_gradient[j] : g.bias_gradient;
      CHECK(std::abs(analytic - fd[j]) <= 1e-6 * std::max(1.0, std::abs(fd[j])));
    }
  }
}

TEST_CASE("gradient descent with a small step does not increase the loss", "[learners][property]") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n01;
  std::vector<LabeledRow> r;
  for (int i = 0; i < 30; ++i) {
    LabeledRow row{{n01(rng), n01(rng), n01(rng)}, false};
    row.label = row.x[0] + 0.5 * n01(rng) > 0;
    r.push_back(row);
  }
  const auto data = custom(3, r);
  std::vector<double> w(3, 0.0);
  double b = 0, previous = 1e300;
  for (int it = 0; it < 200; ++it) {
    const auto g = logistic_loss_and_gradient(w, b, data, 1e-3);
    CHECK(g.loss <= previous + 1e-15);
    previous = g.loss;
    for (int j = 0; j < 3; ++j) w[j] -= 0.01 * g.weight_gradient[j];
    b -= 0.01 * g.bias_gradient;
  }
}

TEST_CASE("gini impurity", "[learners]") {
  CHECK(gini_impurity({true, true, true}) == 0.0);
  CHECK(gini_impurity({true, false}) == 0.5);
  CHECK(gini_impurity({true, false, false, false}) == 0.375);
  CHECK_THROWS_AS(gini_impurity({}), ContractViolation);
}

TEST_CASE("random forest fits separable training data exactly", "[learners]") {
  const auto d = custom(2, {{{0, 0}, false}, {{0, 1}, false}, {{1, 0}, true}, {{1, 1}, true}, {{0.5, 3}, true}});
  ModelSpec spec = spec_of(ModelKind::RandomForest, 3);
  spec.forest.n_trees = 1;
  spec.forest.bootstrap = false;
  spec.forest.features_per_split = 2;
  const auto m = fit(spec, d);
  for (const auto& row : d.rows) CHECK(predict(m, row.x).probability == (row.label ? 1.0 : 0.0));
}

TEST_CASE("a single unbootstrapped tree matches exhaustive CART", "[learners][property]") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto data = random_dataset(rng, 2 + rng() % 7, 1 + rng() % 3, 4);
    ModelSpec spec = spec_of(ModelKind::RandomForest, trial);
    spec.forest.n_trees = 1;
    spec.forest.bootstrap = false;
    spec.forest.features_per_split = data.arity();
    const auto m = fit(spec, data);
    const oracle::ReferenceCart reference(data);
    for (const auto& row : data.rows) CHECK(predict(m, row.x).probability == reference.predict(row.x));
  }
}

TEST_CASE("forest training does not depend on the thread count", "[learners]") {
  const auto data = make_cohort(default_dysgraphia_cohort(300, 0.2, 4));
  ModelSpec spec = spec_of(ModelKind::RandomForest, 17);
  spec.forest.n_trees = 24;
  CHECK(fit(spec, data, 1) == fit(spec, data, 4));
  ModelSpec reseeded = spec;
  reseeded.seed = 18;
  CHECK_FALSE(fit(spec, data) == fit(reseeded, data));
}

TEST_CASE("forest explanations are split shares", "[learners]") {
  const auto data = make_cohort(default_dysgraphia_cohort(200, 0.3, 9));
  ModelSpec spec = spec_of(ModelKind::RandomForest, 2);
  spec.forest.n_trees = 10;
  const auto pred = predict(fit(spec, data), data.rows[0].x);
  REQUIRE(pred.explanation.size() == 8);
  double total = 0;
  for (const auto& c : pred.explanation) total += c.score;
  CHECK(total == Approx(1.0));
}

TEST_CASE("dummy classifiers", "[learners]") {
  const auto d = custom(1, {{{0}, true}, {{1}, false}, {{2}, false}, {{3}, false}});
  const auto majority = fit(spec_of(ModelKind::DummyMajority), d);
  CHECK(predict(majority, std::vector<double>{9}).probability == 0.0);
  CHECK_FALSE(predict(majority, std::vector<double>{9}).label);

  const auto stratified = fit(spec_of(ModelKind::DummyStratified), d);
  CHECK(predict(stratified, std::vector<double>{9}).probability == 0.25);
  Rng rng(1);
  int positives = 0;
  for (int i = 0; i < 4000; ++i) positives += predict_sampled(stratified, std::vector<double>{9}, rng).label ? 1 : 0;
  CHECK(positives > 850);
  CHECK(positives < 1150);
}

TEST_CASE("degenerate training data is rejected", "[learners]") {
  const auto one_class = custom(1, {{{0}, true}, {{1}, true}});
  for (auto kind : {ModelKind::GaussianNB, ModelKind::Logistic, ModelKind::RandomForest})
    CHECK_THROWS_AS(fit(spec_of(kind), one_class), DegenerateDataError);
  CHECK_NOTHROW(fit(spec_of(ModelKind::DummyMajority), one_class));
  CHECK_THROWS_AS(fit(spec_of(ModelKind::DummyMajority), custom(1, {})), DegenerateDataError);

  ModelSpec too_many = spec_of(ModelKind::RandomForest);
  too_many.forest.features_per_split = 5;
  CHECK_THROWS_AS(fit(too_many, one_d_example()), ContractViolation);
}

TEST_CASE("predictions check the feature vector", "[learners]") {
  const auto m = fit(spec_of(ModelKind::GaussianNB), one_d_example());
  CHECK_THROWS_AS(predict(m, std::vector<double>{1, 2}), SchemaError);
  CHECK_THROWS_AS(predict(m, std::vector<double>{std::nan("")}), SchemaError);
  CHECK_THROWS_AS(check_schema(m, dyslexia_schema()), SchemaError);
  CHECK_NOTHROW(check_schema(m, one_d_example().schema));
}

TEST_CASE("model JSON round trip for every kind", "[learners][io]") {
  const auto data = make_cohort(default_dysgraphia_cohort(120, 0.25, 3));
  for (auto kind : {ModelKind::DummyStratified, ModelKind::DummyMajority, ModelKind::GaussianNB, ModelKind::Logistic,
                    ModelKind::RandomForest}) {
    ModelSpec spec = spec_of(kind, 6);
    spec.forest.n_trees = 5;
    spec.logistic.iterations = 50;
    const auto m = fit(spec, data);
    const auto schema = dysgraphia_schema();
    const auto loaded = parse_model(json::parse(to_json(m).dump()), &schema);
    CHECK(loaded == m);
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(predict(loaded, data.rows[i].x).probability == predict(m, data.rows[i].x).probability);
    const auto other = dyslexia_schema();
    CHECK_THROWS_AS(parse_model(to_json(m), &other), SchemaError);
  }
}

TEST_CASE("malformed model files are rejected", "[learners][io]") {
  const auto m = fit(spec_of(ModelKind::GaussianNB), one_d_example());
  json j = to_json(m);
  SECTION("format version") {
    j["schema_version"] = 99;
    CHECK_THROWS_AS(parse_model(j), SchemaError);
  }
  SECTION("missing parameters") {
    j.erase("parameters");
    CHECK_THROWS_AS(parse_model(j), ValidationError);
  }
  SECTION("variance below the floor") {
    j["parameters"]["variances"][0][0] = 0.0;
    CHECK_THROWS_AS(parse_model(j), ValidationError);
  }
}
