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
#include <set>

#include "oracles.hpp"
#include "triage/error.hpp"
#include "triage/fewshot.hpp"

using namespace triage;
using nlohmann::json;

namespace {

double norm(const DenseVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Dataset tiny(const std::vector<int>& severities) {
  std::vector<Report> reports;
  for (std::size_t i = 0; i < severities.size(); ++i) {
    reports.push_back(
        {"t" + std::to_string(i), "text " + std::to_string(i), SeverityClass(severities[i])});
  }
  return Dataset(std::move(reports), Stage::Stage1, Provenance::Original);
}

std::map<std::string, int> labels_by_text(const Dataset& d) {
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < d.size(); ++i) out[d[i].text] = d.label(i);
  return out;
}

RetryPolicy no_sleep() {
  RetryPolicy p;
  p.max_retries = 1;
  p.sleep = [](double) {};
  return p;
}

}  // namespace

TEST_CASE("hashed embedder") {
  const auto e = hashed_embedder(128, 0);
  CHECK(e->dim() == 128);
  const auto a = e->embed("Periapical lesion of tooth #8");
  CHECK(a == e->embed("Periapical lesion of tooth #8"));
  CHECK(std::abs(norm(a) - 1.0) <= 1e-9);
  CHECK(norm(e->embed("the of and")) == 0.0);

  const auto b = e->embed("mandibular canal cortex intact");
  CHECK(std::abs(cosine_similarity(a, b)) < 0.5);

  const std::vector<std::string> batch{"lesion", "tooth"};
  const auto both = e->embed_batch(batch);
  REQUIRE(both.size() == 2);
  CHECK(both[1] == e->embed("tooth"));

  CHECK(provider_from_json(e->config())->embed("lesion") == e->embed("lesion"));
  CHECK_THROWS_AS(hashed_embedder(4, 0), std::invalid_argument);
}

TEST_CASE("remote embedder") {
  std::vector<json> requests;
  const auto serve = [&](std::size_t dim) {
    return std::make_shared<CallbackTransport>([&, dim](const HttpRequest& r) {
      const json body = json::parse(r.body);
      requests.push_back(body);
      json out = {{"dim", dim}, {"embeddings", json::array()}};
      for (const auto& t : body.at("texts")) {
        DenseVector v(dim, 0.0);
        v[t.get<std::string>().size() % dim] = 1.0;
        out["embeddings"].push_back(v);
      }
      return HttpResponse{200, out.dump()};
    });
  };

  const auto remote = remote_embedder("http://embed.test/v1", 4, serve(4), {64, 5.0, no_sleep()});
  const std::vector<std::string> texts{"a", "bb", "ccc"};
  const auto vectors = remote->embed_batch(texts);
  REQUIRE(vectors.size() == 3);
  CHECK(vectors[0] == DenseVector{0, 1, 0, 0});
  CHECK(vectors[1] == DenseVector{0, 0, 1, 0});
  CHECK(vectors[2] == DenseVector{0, 0, 0, 1});
  REQUIRE(requests.size() == 1);
  CHECK(requests[0]["texts"] == json(texts));

  const auto wrong = remote_embedder("http://embed.test/v1", 8, serve(4), {64, 5.0, no_sleep()});
  CHECK_THROWS_AS(wrong->embed("x"), DataError);

  const auto down =
      remote_embedder("http://embed.test/v1", 4,
                      std::make_shared<CallbackTransport>([](const HttpRequest&) -> HttpResponse {
                        throw TransportError("connection refused");
                      }),
                      {64, 5.0, no_sleep()});
  CHECK_THROWS_AS(down->embed("x"), TransportError);
}

TEST_CASE("support set sampling") {
  const Dataset d = generate_synthetic_corpus(1, {67, 354, 219, 64});
  const Dataset s = sample_support_set(d, 200, 9);
  CHECK(class_distribution(s).counts == std::vector<std::size_t>{200, 200, 200, 200});
  std::set<std::string> class2;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.label(i) == 1) class2.insert(s[i].id);
  }
  CHECK(class2.size() == 200);
  CHECK(sample_support_set(d, 200, 9).texts() == s.texts());
  CHECK(class_distribution(sample_support_set(d, 1, 2)).counts ==
        std::vector<std::size_t>{1, 1, 1, 1});
  CHECK_THROWS_AS(sample_support_set(tiny({1, 2, 3}), 2, 0), DataError);
}

TEST_CASE("pair generation") {
  const Dataset d = tiny({1, 1, 2, 2});
  const auto pairs = generate_pairs(d, 2, 5);
  CHECK(pairs.size() == 8);
  const auto label = labels_by_text(d);
  int positive = 0;
  for (const auto& p : pairs) {
    CHECK((p.target == 0.0 || p.target == 1.0));
    CHECK((p.target == 1.0) == (label.at(p.text_a) == label.at(p.text_b)));
    if (p.target == 1.0) {
      ++positive;
      CHECK(p.text_a != p.text_b);
    }
  }
  CHECK(positive == 4);
  CHECK(generate_pairs(d, 2, 5) == pairs);

  const Dataset many = generate_synthetic_corpus(3, {6, 5, 4, 3});
  const auto big = generate_pairs(many, 6, 1);
  CHECK(big.size() == 18 * 6);
  CHECK(std::count_if(big.begin(), big.end(),
                      [](const PairExample& p) { return p.target == 1.0; }) == 18 * 3);

  CHECK_THROWS_AS(generate_pairs(tiny({1, 1, 2}), 2, 0), DataError);
  CHECK_THROWS_AS(generate_pairs(tiny({1, 1}), 2, 0), DataError);
}

TEST_CASE("cosine similarity and pair loss") {
  const DenseVector u{1, 1}, v{1, 0}, w{0, 1}, zero{0, 0};
  CHECK(cosine_similarity(u, u) == doctest::Approx(1.0));
  CHECK(cosine_similarity(v, w) == 0.0);
  CHECK(cosine_similarity(u, v) == doctest::Approx(0.707107).epsilon(1e-6));
  CHECK_THROWS_AS(cosine_similarity(u, zero), std::invalid_argument);

  const auto head = ProjectionHead::identity(2, 2);
  CHECK(pair_loss(head, v, w, 1.0) == 1.0);
  CHECK(pair_loss(head, v, w, 0.0) == 0.0);
  CHECK(pair_loss(head, u, u, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(pair_loss(head, zero, u, 1.0), DegenerateProjection);

  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    DenseVector a(3), b(3);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    const auto id = ProjectionHead::identity(3, 3);
    CHECK(id.project(a) == a);
    const double loss = pair_loss(id, a, b, rng.uniform() < 0.5 ? 0.0 : 1.0);
    CHECK(loss >= 0.0);
    CHECK(loss <= 4.0);
    CHECK(cosine_similarity(id.project(a), id.project(b)) == cosine_similarity(a, b));
  }
}

TEST_CASE("pair loss gradient matches finite differences") {
  Rng rng(44);
  for (int draw = 0; draw < 50; ++draw) {
    ProjectionHead head;
    head.dim_in = 2 + rng.uniform_index(4);
    head.dim_out = 2 + rng.uniform_index(3);
    head.weights.resize(head.dim_in * head.dim_out);
    head.bias.resize(head.dim_out);
    for (auto& x : head.weights) x = rng.normal();
    for (auto& x : head.bias) x = 0.1 * rng.normal();
    DenseVector a(head.dim_in), b(head.dim_in);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    const double target = rng.uniform() < 0.5 ? 0.0 : 1.0;

    ProjectionHead grad;
    pair_loss(head, a, b, target, &grad);
    std::vector<double> analytic = grad.weights;
    analytic.insert(analytic.end(), grad.bias.begin(), grad.bias.end());
    std::vector<double> theta = head.weights;
    theta.insert(theta.end(), head.bias.begin(), head.bias.end());
    const auto f = [&] {
      ProjectionHead h = head;
      std::copy(theta.begin(), theta.begin() + static_cast<long>(h.weights.size()),
                h.weights.begin());
      std::copy(theta.begin() + static_cast<long>(h.weights.size()), theta.end(), h.bias.begin());
      return pair_loss(h, a, b, target);
    };
    CHECK(oracle::relative_error(analytic, oracle::numeric_gradient(theta, f)) <= 1e-4);
  }
}

TEST_CASE("fine-tuning") {
  const auto corpus = make_clustered_corpus(3, 20);
  const auto pairs = generate_pairs(corpus.dataset, 4, 3);
  const auto identity = ProjectionHead::identity(16, 16);
  CHECK(fine_tune_head(identity, pairs, *corpus.provider, 3, 0.0, 1) == identity);

  // A pair already at zero loss contributes nothing.
  const auto self = std::vector<PairExample>{{corpus.dataset[0].text, corpus.dataset[0].text, 1.0}};
  CHECK(fine_tune_head(identity, self, *corpus.provider, 2, 0.5, 1) == identity);

  FineTuneStats stats;
  const auto tuned = fine_tune_head(identity, pairs, *corpus.provider, 10, 0.01, 7, &stats);
  REQUIRE(stats.epoch_loss.size() == 11);
  CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
  CHECK(fine_tune_head(identity, pairs, *corpus.provider, 10, 0.01, 7) == tuned);
  CHECK_THROWS(fine_tune_head(identity, {}, *corpus.provider, 1, 0.01, 7));
}

TEST_CASE("fsbm on the clustered corpus") {
  const auto corpus = make_clustered_corpus(5, 250);
  const auto split = stratified_split(corpus.dataset, 0.8, 5);
  FsbmConfig config;
  const FsbmModel model = fsbm_fit(split.train, corpus.provider, config, 17);
  CHECK(model.classifier().n_features() == 16);

  const auto texts = split.test.texts();
  const auto predicted = model.predict_batch(texts);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    CHECK(predicted[i] >= 0);
    CHECK(predicted[i] < 4);
    CHECK(predicted[i] == fsbm_predict(model, texts[i]));
    correct += predicted[i] == split.test.label(i) ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(texts.size()) >= 0.95);
  CHECK(fsbm_predict(model, split.train[0].text) == split.train.label(0));

  const FsbmModel again = fsbm_fit(split.train, corpus.provider, config, 17);
  CHECK(again.predict_batch(texts) == predicted);

  // Serialization keeps the provider config, the head and the classifier.
  const auto small = make_clustered_corpus(6, 10);
  FsbmConfig quick;
  quick.per_class = 5;
  quick.epochs = 2;
  quick.mlp.hyperparams = {{"hidden", 8}, {"epochs", 5}};
  const FsbmModel m = fsbm_fit(small.dataset, small.provider, quick, 1);
  const FsbmModel back = FsbmModel::from_json(json::parse(m.to_json().dump()));
  CHECK(back.head() == m.head());
  for (const auto& t : small.dataset.texts()) CHECK(back.predict_proba(t) == m.predict_proba(t));
}

TEST_CASE("fsbm with lr 0 equals an MLP on raw embeddings") {
  const auto corpus = make_clustered_corpus(8, 30, 16, 0.6);
  const auto split = stratified_split(corpus.dataset, 0.8, 8);
  FsbmConfig config;
  config.lr = 0.0;
  config.per_class = 10;
  config.mlp.hyperparams = {{"hidden", 16}, {"epochs", 30}};
  const FsbmModel model = fsbm_fit(split.train, corpus.provider, config, 23);
  CHECK(model.head() == ProjectionHead::identity(16, 16));

  FeatureMatrix x;
  x.dim = 16;
  for (const auto& t : split.train.texts())
    x.rows.push_back(SparseVector::from_dense(corpus.provider->embed(t)));
  ClassifierSpec spec = config.mlp;
  spec.seed = derive_seed(23, {"mlp"});
  const TrainedModel raw = fit(spec, x, split.train.labels());
  for (const auto& t : split.test.texts()) {
    CHECK(model.predict(t) == raw.predict(corpus.provider->embed(t)));
  }
}

TEST_CASE("fsbm config validation") {
  FsbmConfig c;
  c.pairs_per_anchor = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = FsbmConfig{};
  c.mlp.algorithm = Algorithm::LinearSVM;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = FsbmConfig{};
  c.lr = 0.25;
  CHECK(FsbmConfig::from_json(c.to_json()).to_json() == c.to_json());
}
