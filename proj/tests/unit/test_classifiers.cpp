// Copyright 2026 The Triage Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "triage/corpus.hpp"
#include "triage/error.hpp"

using namespace triage;

namespace {

FeatureMatrix dense_matrix(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix m;
  m.dim = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) m.rows.push_back(SparseVector::from_dense(r));
  return m;
}

// Two classes, each owning one indicator feature, plus weak noise.
struct Separable {
  FeatureMatrix x;
  std::vector<int> y;
};

Separable separable(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  Separable s;
  for (int i = 0; i < 24; ++i) {
    const int label = i % 2;
    std::vector<double> r{label == 1 ? 1.0 : 0.0, label == 0 ? 1.0 : 0.0};
    for (int j = 0; j < 4; ++j) r.push_back(0.1 * rng.uniform());
    rows.push_back(r);
    s.y.push_back(label);
  }
  s.x = dense_matrix(rows);
  return s;
}

double accuracy(const TrainedModel& m, const FeatureMatrix& x, std::span<const int> y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ok += m.predict(x.rows[i]) == y[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(x.size());
}

// Cheap settings so the property tests stay fast.
ClassifierSpec quick_spec(Algorithm a, std::uint64_t seed) {
  ClassifierSpec s{a, {}, seed};
  switch (a) {
    case Algorithm::RandomForest: s.hyperparams = {{"n_trees", 10}}; break;
    case Algorithm::GradientBoosting: s.hyperparams = {{"n_rounds", 10}}; break;
    case Algorithm::MLP: s.hyperparams = {{"hidden", 8}, {"epochs", 20}}; break;
    default: break;
  }
  return s;
}

void check_simplex(const std::vector<double>& p, std::size_t k) {
  REQUIRE(p.size() == k);
  double sum = 0.0;
  for (double v : p) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) <= 1e-9);
}

}  // namespace

TEST_CASE("multinomial naive Bayes by hand") {
  const auto x = dense_matrix({{2.0, 1.0}, {0.0, 2.0}});
  const std::vector<int> y{0, 1};
  const TrainedModel m = fit({Algorithm::MultinomialNB, {{"alpha", 1.0}}, 0}, x, y);
  const std::vector<double> doc{1.0, 0.0};
  const auto p = m.predict_proba(doc);
  CHECK(p[0] == doctest::Approx(0.3 / 0.425).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.125 / 0.425).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.7059).epsilon(1e-4));
  CHECK(m.predict(doc) == 0);

  // Symmetric classes and an empty document: uniform posterior, class 0 wins.
  const TrainedModel sym =
      fit({Algorithm::MultinomialNB, {}, 0}, dense_matrix({{1, 0}, {0, 1}}), y);
  const std::vector<double> empty{0.0, 0.0};
  CHECK(sym.predict_proba(empty)[0] == doctest::Approx(0.5));
  CHECK(sym.predict(empty) == 0);
}

TEST_CASE("building blocks") {
  const std::vector<double> pure{4, 0}, even{5, 5}, two_one{2, 1};
  CHECK(gini_impurity(pure) == 0.0);
  CHECK(gini_impurity(even) == doctest::Approx(0.5));
  CHECK(gini_impurity(two_one) == doctest::Approx(4.0 / 9.0));
  const std::vector<double> zeros{0, 0};
  CHECK_THROWS_AS(gini_impurity(zeros), std::invalid_argument);

  CHECK(gaussian_log_pdf(3.0, 3.0, 1.0) == doctest::Approx(-0.918939).epsilon(1e-6));
  CHECK(gaussian_log_pdf(4.0, 3.0, 1.0) == doctest::Approx(-1.418939).epsilon(1e-6));
  CHECK(gaussian_log_pdf(3.7, 3.0, 2.0) == gaussian_log_pdf(2.3, 3.0, 2.0));
  CHECK(std::isfinite(gaussian_log_pdf(1.0, 1.0, 0.0)));

  const std::vector<double> u{1, 2}, v{1, 3}, w{5, -7};
  CHECK(rbf_kernel(u, u, 3.0) == 1.0);
  CHECK(rbf_kernel(u, w, 0.0) == 1.0);
  CHECK(rbf_kernel(u, v, 1.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(rbf_kernel(u, v, 1.0) == doctest::Approx(0.367879).epsilon(1e-6));

  const std::vector<double> zero4(4, 0.0);
  for (double p : softmax(zero4)) CHECK(p == 0.25);
  const std::vector<double> big{1000.0, 1000.0, -1000.0};
  check_simplex(softmax(big), 3);
  const std::vector<double> tie{0.3, 0.7, 0.7};
  CHECK(argmax(tie) == 1);
}

TEST_CASE("hinge subgradient step") {
  const std::vector<double> w0{0.0, 0.0}, x{1.0, 0.0};
  const auto s = hinge_subgradient_step(w0, 0.0, x, +1, 0.0, 0.5);
  CHECK(s.weights == std::vector<double>{0.5, 0.0});
  CHECK(s.bias == 0.5);

  const std::vector<double> w{2.0, 0.0};
  const auto same = hinge_subgradient_step(w, 0.0, x, +1, 0.0, 0.5);
  CHECK(same.weights == w);
  CHECK(same.bias == 0.0);

  // Descent on the per-example objective for a small step.
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> wt(5), xt(5);
    for (auto& v : wt) v = rng.normal();
    for (auto& v : xt) v = rng.normal();
    const double b = rng.normal(), lambda = rng.uniform();
    const int y = rng.uniform() < 0.5 ? -1 : 1;
    const auto objective = [&](std::span<const double> ww, double bb) {
      double dot = bb, sq = 0.0;
      for (std::size_t i = 0; i < ww.size(); ++i) {
        dot += ww[i] * xt[i];
        sq += ww[i] * ww[i];
      }
      return std::max(0.0, 1.0 - y * dot) + 0.5 * lambda * sq;
    };
    const auto next = hinge_subgradient_step(wt, b, xt, y, lambda, 1e-4);
    CHECK(objective(next.weights, next.bias) <= objective(wt, b) + 1e-12);
  }
}

TEST_CASE("logistic regression gradient matches finite differences") {
  Rng rng(31);
  for (int draw = 0; draw < 50; ++draw) {
    gradients::LogisticParams p;
    p.n_features = 1 + rng.uniform_index(5);
    p.n_classes = 2 + rng.uniform_index(3);
    p.weights.resize(p.n_features * p.n_classes);
    p.bias.resize(p.n_classes);
    for (auto& v : p.weights) v = rng.normal();
    for (auto& v : p.bias) v = rng.normal();
    std::vector<std::vector<double>> rows(1 + rng.uniform_index(8),
                                          std::vector<double>(p.n_features));
    std::vector<int> y;
    for (auto& r : rows) {
      for (auto& v : r) v = rng.uniform() < 0.3 ? 0.0 : rng.normal();
      y.push_back(static_cast<int>(rng.uniform_index(p.n_classes)));
    }
    const auto x = dense_matrix(rows);
    const double l2 = rng.uniform() * 0.1;

    gradients::LogisticParams g;
    gradients::logistic_loss(p, x, y, l2, &g);
    std::vector<double> analytic = g.weights;
    analytic.insert(analytic.end(), g.bias.begin(), g.bias.end());

    std::vector<double> theta = p.weights;
    theta.insert(theta.end(), p.bias.begin(), p.bias.end());
    const auto f = [&] {
      gradients::LogisticParams q = p;
      std::copy(theta.begin(), theta.begin() + static_cast<long>(q.weights.size()),
                q.weights.begin());
      std::copy(theta.begin() + static_cast<long>(q.weights.size()), theta.end(), q.bias.begin());
      return gradients::logistic_loss(q, x, y, l2);
    };
    CHECK(oracle::relative_error(analytic, oracle::numeric_gradient(theta, f)) <= 1e-4);
  }
}

TEST_CASE("mlp gradient matches finite differences") {
  Rng rng(32);
  for (int draw = 0; draw < 50; ++draw) {
    gradients::MlpParams p;
    p.n_inputs = 1 + rng.uniform_index(5);
    p.n_hidden = 1 + rng.uniform_index(6);
    p.n_outputs = 2 + rng.uniform_index(3);
    p.w1.resize(p.n_inputs * p.n_hidden);
    p.b1.resize(p.n_hidden);
    p.w2.resize(p.n_hidden * p.n_outputs);
    p.b2.resize(p.n_outputs);
    for (auto* v : {&p.w1, &p.b1, &p.w2, &p.b2}) {
      for (auto& e : *v) e = rng.normal();
    }
    std::vector<std::vector<double>> rows(1 + rng.uniform_index(8),
                                          std::vector<double>(p.n_inputs));
    std::vector<int> y;
    for (auto& r : rows) {
      for (auto& v : r) v = rng.normal();
      y.push_back(static_cast<int>(rng.uniform_index(p.n_outputs)));
    }
    const auto x = dense_matrix(rows);

    gradients::MlpParams g;
    gradients::mlp_loss(p, x, y, &g);
    std::vector<double> analytic, theta;
    for (const auto* v : {&g.w1, &g.b1, &g.w2, &g.b2})
      analytic.insert(analytic.end(), v->begin(), v->end());
    for (const auto* v : {&p.w1, &p.b1, &p.w2, &p.b2})
      theta.insert(theta.end(), v->begin(), v->end());
    const auto f = [&] {
      gradients::MlpParams q = p;
      auto it = theta.begin();
      for (auto* v : {&q.w1, &q.b1, &q.w2, &q.b2}) {
        std::copy(it, it + static_cast<long>(v->size()), v->begin());
        it += static_cast<long>(v->size());
      }
      return gradients::mlp_loss(q, x, y);
    };
    CHECK(oracle::relative_error(analytic, oracle::numeric_gradient(theta, f)) <= 1e-4);
  }
}

TEST_CASE("decision tree matches the exhaustive CART oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(15);
    const std::size_t d = 1 + rng.uniform_index(4);
    const int k = 2 + static_cast<int>(rng.uniform_index(2));
    if (n < static_cast<std::size_t>(k)) continue;
    std::vector<std::vector<int>> x(n, std::vector<int>(d));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = static_cast<int>(rng.uniform_index(2));
      y[i] = i < static_cast<std::size_t>(k) ? static_cast<int>(i)
                                             : static_cast<int>(rng.uniform_index(k));
    }
    const TrainedModel tree = fit({Algorithm::DecisionTree, {}, 0}, oracle::binary_matrix(x), y);

    oracle::CartOracle cart;
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    cart.build(x, y, k, rows, 0, 20, 2);

    // Compare on every point of the binary cube, not only the training rows.
    for (std::size_t code = 0; code < (std::size_t{1} << d); ++code) {
      std::vector<int> row(d);
      std::vector<double> dense(d);
      for (std::size_t f = 0; f < d; ++f) {
        row[f] = static_cast<int>((code >> f) & 1U);
        dense[f] = row[f];
      }
      const auto expected = cart.predict_proba(row);
      const auto got = tree.predict_proba(dense);
      for (int c = 0; c < k; ++c) {
        CHECK(got[static_cast<std::size_t>(c)] ==
              doctest::Approx(expected[static_cast<std::size_t>(c)]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("single-tree forest without bootstrap equals the decision tree") {
  const Dataset d = generate_synthetic_corpus(5, {20, 20, 20, 20}, {.purity = 0.6});
  const auto [x, pipeline] = vectorize_dataset(d, PipelineConfig{}, Lexicon::defaults());
  const auto y = d.labels();
  const TrainedModel tree = fit({Algorithm::DecisionTree, {}, 3}, x, y);
  const TrainedModel forest =
      fit({Algorithm::RandomForest,
           {{"n_trees", 1}, {"bootstrap", 0}, {"max_features", static_cast<double>(x.dim)}},
           3},
          x, y);
  const Dataset probe = generate_synthetic_corpus(6, {10, 10, 10, 10}, {.purity = 0.5});
  for (const auto& text : probe.texts()) {
    const auto v = pipeline.transform(text);
    CHECK(forest.predict(v) == tree.predict(v));
  }
}

TEST_CASE("every algorithm: separable data, simplex, determinism, serialization") {
  const Separable s = separable(4);
  Rng rng(99);
  for (Algorithm a : all_algorithms()) {
    CAPTURE(to_string(a));
    ClassifierSpec spec{a, {}, 11};
    const TrainedModel m = fit(spec, s.x, s.y);
    CHECK(accuracy(m, s.x, s.y) == 1.0);

    for (int i = 0; i < 50; ++i) {
      std::vector<double> probe(s.x.dim);
      for (auto& v : probe) v = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 3.0);
      check_simplex(m.predict_proba(probe), 2);
    }

    const TrainedModel again = fit(spec, s.x, s.y);
    CHECK(again.to_json() == m.to_json());

    const TrainedModel back = TrainedModel::from_json(nlohmann::json::parse(m.to_json().dump()));
    CHECK(back.spec() == m.spec());
    for (const auto& row : s.x.rows) CHECK(back.predict_proba(row) == m.predict_proba(row));
  }
}

TEST_CASE("keyword-separable synthetic corpus") {
  const Dataset corpus = generate_synthetic_corpus(21, {250, 250, 250, 250});
  const auto split = stratified_split(corpus, 0.8, 21);
  REQUIRE(class_distribution(split.train).counts == std::vector<std::size_t>{200, 200, 200, 200});
  const auto [x, pipeline] = vectorize_dataset(split.train, PipelineConfig{}, Lexicon::defaults());
  FeatureMatrix test;
  test.dim = x.dim;
  for (const auto& t : split.test.texts()) test.rows.push_back(pipeline.transform(t));
  const auto y_train = split.train.labels();
  const auto y_test = split.test.labels();
  for (Algorithm a : all_algorithms()) {
    CAPTURE(to_string(a));
    const TrainedModel m = fit(quick_spec(a, 5), x, y_train);
    CHECK(accuracy(m, test, y_test) >= 0.9);
  }
}

TEST_CASE("gradient boosting training loss never increases") {
  const Dataset d = generate_synthetic_corpus(13, {30, 30, 30, 30}, {.purity = 0.7});
  const auto [x, pipeline] = vectorize_dataset(d, PipelineConfig{}, Lexicon::defaults());
  FitTrace trace;
  fit({Algorithm::GradientBoosting, {{"n_rounds", 30}}, 1}, x, d.labels(), &trace);
  REQUIRE(trace.loss_history.size() == 31);
  for (std::size_t i = 1; i < trace.loss_history.size(); ++i) {
    CHECK(trace.loss_history[i] <= trace.loss_history[i - 1] + 1e-12);
  }
}

TEST_CASE("zeroed logistic regression predicts class 0") {
  const Separable s = separable(2);
  auto j = fit({Algorithm::LogisticRegression, {}, 0}, s.x, s.y).to_json();
  for (auto& w : j["params"]["weights"]) w = 0.0;
  for (auto& b : j["params"]["bias"]) b = 0.0;
  const TrainedModel zero = TrainedModel::from_json(j);
  for (const auto& row : s.x.rows) CHECK(zero.predict(row) == 0);
}

TEST_CASE("fit and predict errors") {
  const auto x = dense_matrix({{1, 0}, {0, 1}});
  const std::vector<int> one_class{0, 0};
  CHECK_THROWS_AS(fit({Algorithm::LogisticRegression, {}, 0}, x, one_class), DataError);

  FeatureMatrix ragged = x;
  ragged.rows.push_back(SparseVector(3));
  const std::vector<int> y3{0, 1, 1};
  CHECK_THROWS_AS(fit({Algorithm::DecisionTree, {}, 0}, ragged, y3), DataError);

  auto bad = dense_matrix({{1, std::numeric_limits<double>::quiet_NaN()}, {0, 1}});
  const std::vector<int> y{0, 1};
  CHECK_THROWS_AS(fit({Algorithm::GaussianNB, {}, 0}, bad, y), DataError);

  const TrainedModel m = fit({Algorithm::LinearSVM, {}, 0}, x, y);
  const std::vector<double> wrong(3, 0.0);
  CHECK_THROWS_AS(m.predict(wrong), DataError);

  CHECK_THROWS_AS(fit({Algorithm::MLP, {{"learning_rate", -1.0}}, 0}, x, y), std::invalid_argument);
  CHECK_THROWS_AS(fit({Algorithm::MLP, {{"depth", 2.0}}, 0}, x, y), std::invalid_argument);
  CHECK_THROWS_AS(algorithm_from_string("svm"), std::invalid_argument);
}
