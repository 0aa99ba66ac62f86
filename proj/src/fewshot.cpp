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

#include "triage/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "triage/error.hpp"
#include "triage/preprocess.hpp"
#include "triage/random.hpp"

namespace triage {

DenseVector EmbeddingProvider::embed(const std::string& text) const {
  return embed_batch(std::span<const std::string>(&text, 1)).front();
}

namespace {

void normalize(DenseVector& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq <= 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

class HashedEmbedder final : public EmbeddingProvider {
 public:
  HashedEmbedder(std::size_t dim, std::uint64_t seed)
      : dim_(dim), seed_(seed), salt_(splitmix64(seed)), lexicon_(Lexicon::defaults()) {}

  std::string name() const override { return "hashed"; }
  std::size_t dim() const override { return dim_; }

  std::vector<DenseVector> embed_batch(std::span<const std::string> texts) const override {
    std::vector<DenseVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
      DenseVector v(dim_, 0.0);
      for (const auto& t : lemmatize(remove_stopwords(tokenize(text), lexicon_), lexicon_)) {
        const std::uint64_t h = splitmix64(fnv1a64(t) ^ salt_);
        v[h % dim_] += (h >> 63) != 0 ? -1.0 : 1.0;
      }
      normalize(v);
      out.push_back(std::move(v));
    }
    return out;
  }

  nlohmann::json config() const override {
    return {{"type", "hashed"}, {"dim", dim_}, {"seed", seed_}};
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::uint64_t salt_;
  Lexicon lexicon_;
};

class RemoteEmbedder final : public EmbeddingProvider {
 public:
  RemoteEmbedder(std::string endpoint, std::size_t dim, std::shared_ptr<HttpTransport> transport,
                 RemoteEmbedderOptions options)
      : endpoint_(std::move(endpoint)),
        dim_(dim),
        transport_(std::move(transport)),
        options_(std::move(options)) {}

  std::string name() const override { return "remote"; }
  std::size_t dim() const override { return dim_; }

  std::vector<DenseVector> embed_batch(std::span<const std::string> texts) const override {
    std::vector<DenseVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += options_.batch_size) {
      const auto chunk = texts.subspan(start, std::min(options_.batch_size, texts.size() - start));
      HttpRequest req;
      req.url = endpoint_;
      req.body = nlohmann::json{{"texts", chunk}}.dump();
      req.headers = {{"Content-Type", "application/json"}};
      req.timeout_seconds = options_.timeout_seconds;
      const auto outcome = post_with_retry(*transport_, req, options_.retry);
      if (outcome.response.status != 200) {
        throw TransportError("embedding service returned HTTP " +
                             std::to_string(outcome.response.status));
      }
      parse_chunk(outcome.response.body, chunk.size(), out);
    }
    return out;
  }

  nlohmann::json config() const override {
    return {{"type", "remote"}, {"endpoint", endpoint_}, {"dim", dim_}};
  }

 private:
  void parse_chunk(const std::string& body, std::size_t expected,
                   std::vector<DenseVector>& out) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
      if (j.at("dim").get<std::size_t>() != dim_) {
        throw DataError("embedding dim mismatch: expected " + std::to_string(dim_) + ", got " +
                        j.at("dim").dump());
      }
      const auto& rows = j.at("embeddings");
      if (!rows.is_array() || rows.size() != expected) {
        throw DataError("embedding service returned " + std::to_string(rows.size()) +
                        " vectors for " + std::to_string(expected) + " texts");
      }
      for (const auto& r : rows) {
        auto v = r.get<DenseVector>();
        if (v.size() != dim_) throw DataError("embedding dim mismatch in returned vector");
        for (double x : v) {
          if (!std::isfinite(x)) throw DataError("non-finite value in returned embedding");
        }
        out.push_back(std::move(v));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed embedding response: ") + e.what());
    }
  }

  std::string endpoint_;
  std::size_t dim_;
  std::shared_ptr<HttpTransport> transport_;
  RemoteEmbedderOptions options_;
};

class TableEmbedder final : public EmbeddingProvider {
 public:
  explicit TableEmbedder(std::map<std::string, DenseVector> table) : table_(std::move(table)) {
    if (table_.empty()) throw std::invalid_argument("empty embedding table");
    dim_ = table_.begin()->second.size();
    for (const auto& [text, v] : table_) {
      if (v.size() != dim_) throw std::invalid_argument("embedding table rows differ in length");
    }
  }

  std::string name() const override { return "table"; }
  std::size_t dim() const override { return dim_; }

  std::vector<DenseVector> embed_batch(std::span<const std::string> texts) const override {
    std::vector<DenseVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      auto it = table_.find(t);
      if (it == table_.end()) throw DataError("text not in embedding table: '" + t + "'");
      out.push_back(it->second);
    }
    return out;
  }

  nlohmann::json config() const override {
    return {{"type", "table"}, {"dim", dim_}, {"table", table_}};
  }

 private:
  std::map<std::string, DenseVector> table_;
  std::size_t dim_ = 0;
};

// Non-zero entries of a dense embedding.
struct NonZero {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  explicit NonZero(const DenseVector& v) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] != 0.0) {
        index.push_back(static_cast<std::uint32_t>(j));
        value.push_back(v[j]);
      }
    }
  }
};

void project_nz(const ProjectionHead& head, const NonZero& e, DenseVector& out) {
  out.assign(head.bias.begin(), head.bias.end());
  for (std::size_t q = 0; q < e.index.size(); ++q) {
    const double* w = head.weights.data() + static_cast<std::size_t>(e.index[q]) * head.dim_out;
    const double v = e.value[q];
    for (std::size_t k = 0; k < head.dim_out; ++k) out[k] += v * w[k];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Loss and the gradients with respect to the two projections.
double projected_loss(const DenseVector& a, const DenseVector& b, double target, DenseVector* ga,
                      DenseVector* gb) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw DegenerateProjection("projected embedding is the zero vector");
  const double c = dot(a, b) / (na * nb);
  const double diff = c - target;
  if (ga && gb) {
    const double d = 2.0 * diff;
    ga->resize(a.size());
    gb->resize(b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      (*ga)[k] = d * (b[k] / (na * nb) - c * a[k] / (na * na));
      (*gb)[k] = d * (a[k] / (na * nb) - c * b[k] / (nb * nb));
    }
  }
  return diff * diff;
}

// Embeds each distinct text once.
class EmbeddingCache {
 public:
  EmbeddingCache(const EmbeddingProvider& provider, const std::vector<std::string>& texts) {
    std::vector<std::string> unique;
    for (const auto& t : texts) {
      if (index_.emplace(t, unique.size()).second) unique.push_back(t);
    }
    constexpr std::size_t kChunk = 256;
    for (std::size_t s = 0; s < unique.size(); s += kChunk) {
      const auto part =
          std::span<const std::string>(unique).subspan(s, std::min(kChunk, unique.size() - s));
      for (auto& v : provider.embed_batch(part)) {
        if (v.size() != provider.dim()) throw DataError("provider returned wrong dimension");
        rows_.emplace_back(v);
      }
    }
  }
  const NonZero& operator[](const std::string& text) const { return rows_[index_.at(text)]; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<NonZero> rows_;
};

std::string quote(const std::string& s) {
  return "'" + s + "'";
}

}  // namespace

ProviderPtr hashed_embedder(std::size_t dim, std::uint64_t seed) {
  if (dim < 8) throw std::invalid_argument("hashed embedder dim must be >= 8");
  return std::make_shared<HashedEmbedder>(dim, seed);
}

ProviderPtr remote_embedder(std::string endpoint, std::size_t dim,
                            std::shared_ptr<HttpTransport> transport,
                            RemoteEmbedderOptions options) {
  if (dim == 0) throw std::invalid_argument("remote embedder dim must be > 0");
  if (options.batch_size == 0 || options.batch_size > 64) {
    throw std::invalid_argument("remote embedder batch size must be in [1, 64]");
  }
  if (!transport) transport = make_http_transport();
  return std::make_shared<RemoteEmbedder>(std::move(endpoint), dim, std::move(transport),
                                          std::move(options));
}

ProviderPtr table_embedder(std::map<std::string, DenseVector> table) {
  return std::make_shared<TableEmbedder>(std::move(table));
}

ProviderPtr provider_from_json(const nlohmann::json& config) {
  try {
    const auto type = config.at("type").get<std::string>();
    if (type == "hashed") {
      return hashed_embedder(config.at("dim").get<std::size_t>(),
                             config.at("seed").get<std::uint64_t>());
    }
    if (type == "remote") {
      return remote_embedder(config.at("endpoint").get<std::string>(),
                             config.at("dim").get<std::size_t>());
    }
    if (type == "table") {
      auto provider = table_embedder(config.at("table").get<std::map<std::string, DenseVector>>());
      if (provider->dim() != config.at("dim").get<std::size_t>()) {
        throw DataError("embedding table dim mismatch");
      }
      return provider;
    }
    throw DataError("unknown embedding provider type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed provider config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid provider config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

ProjectionHead ProjectionHead::identity(std::size_t dim_in, std::size_t dim_out) {
  ProjectionHead h;
  h.dim_in = dim_in;
  h.dim_out = dim_out;
  h.weights.assign(dim_in * dim_out, 0.0);
  for (std::size_t i = 0; i < std::min(dim_in, dim_out); ++i) h.weights[i * dim_out + i] = 1.0;
  h.bias.assign(dim_out, 0.0);
  return h;
}

DenseVector ProjectionHead::project(std::span<const double> embedding) const {
  if (embedding.size() != dim_in) throw std::invalid_argument("projection: dimension mismatch");
  DenseVector out(bias);
  for (std::size_t j = 0; j < dim_in; ++j) {
    if (embedding[j] == 0.0) continue;
    const double* w = weights.data() + j * dim_out;
    for (std::size_t k = 0; k < dim_out; ++k) out[k] += embedding[j] * w[k];
  }
  return out;
}

void ProjectionHead::validate() const {
  if (dim_out < 2) throw std::invalid_argument("projection head needs dim_out >= 2");
  if (dim_in == 0) throw std::invalid_argument("projection head needs dim_in >= 1");
  if (weights.size() != dim_in * dim_out || bias.size() != dim_out) {
    throw std::invalid_argument("projection head shape mismatch");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("non-finite projection weight");
  }
  for (double b : bias) {
    if (!std::isfinite(b)) throw std::invalid_argument("non-finite projection bias");
  }
}

nlohmann::json ProjectionHead::to_json() const {
  return {{"dim_in", dim_in}, {"dim_out", dim_out}, {"weights", weights}, {"bias", bias}};
}

ProjectionHead ProjectionHead::from_json(const nlohmann::json& j) {
  ProjectionHead h;
  h.dim_in = j.at("dim_in").get<std::size_t>();
  h.dim_out = j.at("dim_out").get<std::size_t>();
  h.weights = j.at("weights").get<std::vector<double>>();
  h.bias = j.at("bias").get<std::vector<double>>();
  h.validate();
  return h;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine_similarity: zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

// ---------------------------------------------------------------------------

Dataset sample_support_set(const Dataset& train, std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw std::invalid_argument("per_class must be >= 1");
  const int k = train.num_classes();
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < train.size(); ++i) {
    by_class[static_cast<std::size_t>(train.label(i))].push_back(i);
  }
  Rng rng(seed);
  std::vector<Report> out;
  std::set<std::string> used;
  std::size_t dup = 0;
  for (int c = 0; c < k; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) {
      throw DataError("cannot sample support set: class " + std::to_string(c) + " is empty");
    }
    std::vector<std::size_t> picks;
    if (members.size() >= per_class) {
      rng.shuffle(members);
      picks.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(per_class));
    } else {
      for (std::size_t n = 0; n < per_class; ++n) {
        picks.push_back(members[rng.uniform_index(members.size())]);
      }
    }
    for (std::size_t i : picks) {
      Report r = train[i];
      while (!used.insert(r.id).second) {
        r.id = std::string(base_id(train[i].id)) + "#dup" + std::to_string(++dup);
      }
      out.push_back(std::move(r));
    }
  }
  return Dataset(std::move(out), train.stage(), train.provenance());
}

std::vector<PairExample> generate_pairs(const Dataset& support, std::size_t pairs_per_anchor,
                                        std::uint64_t seed) {
  const int k = support.num_classes();
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < support.size(); ++i) {
    by_class[static_cast<std::size_t>(support.label(i))].push_back(i);
  }
  std::size_t present = 0;
  for (const auto& members : by_class) {
    if (members.empty()) continue;
    ++present;
    if (members.size() < 2) {
      throw DataError("cannot generate pairs: a class has a single example");
    }
  }
  if (present < 2) throw DataError("cannot generate pairs: fewer than two classes");

  const std::size_t n_pos = pairs_per_anchor / 2;
  const std::size_t n_neg = pairs_per_anchor - n_pos;
  Rng rng(seed);
  std::vector<PairExample> pairs;
  pairs.reserve(support.size() * pairs_per_anchor);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const auto c = static_cast<std::size_t>(support.label(i));
    const auto& same = by_class[c];
    const std::size_t n_other = support.size() - same.size();
    for (std::size_t p = 0; p < n_pos; ++p) {
      // Uniform over same-class members other than the anchor.
      std::size_t j = rng.uniform_index(same.size() - 1);
      const std::size_t anchor_pos =
          static_cast<std::size_t>(std::find(same.begin(), same.end(), i) - same.begin());
      if (j >= anchor_pos) ++j;
      pairs.push_back({support[i].text, support[same[j]].text, 1.0});
    }
    for (std::size_t q = 0; q < n_neg; ++q) {
      // Uniform over all members of the other classes.
      std::size_t r = rng.uniform_index(n_other);
      std::size_t pick = 0;
      for (std::size_t cc = 0; cc < by_class.size(); ++cc) {
        if (cc == c) continue;
        if (r < by_class[cc].size()) {
          pick = by_class[cc][r];
          break;
        }
        r -= by_class[cc].size();
      }
      pairs.push_back({support[i].text, support[pick].text, 0.0});
    }
  }
  return pairs;
}

double pair_loss(const ProjectionHead& head, std::span<const double> embedding_a,
                 std::span<const double> embedding_b, double target, ProjectionHead* grad) {
  const auto a = head.project(embedding_a);
  const auto b = head.project(embedding_b);
  if (!grad) return projected_loss(a, b, target, nullptr, nullptr);
  DenseVector ga, gb;
  const double loss = projected_loss(a, b, target, &ga, &gb);
  *grad = ProjectionHead{head.dim_in, head.dim_out, std::vector<double>(head.weights.size(), 0.0),
                         DenseVector(head.dim_out)};
  for (std::size_t j = 0; j < head.dim_in; ++j) {
    double* g = grad->weights.data() + j * head.dim_out;
    for (std::size_t k = 0; k < head.dim_out; ++k) {
      g[k] = embedding_a[j] * ga[k] + embedding_b[j] * gb[k];
    }
  }
  for (std::size_t k = 0; k < head.dim_out; ++k) grad->bias[k] = ga[k] + gb[k];
  return loss;
}

double pair_loss(const ProjectionHead& head, const PairExample& pair,
                 const EmbeddingProvider& provider) {
  if (provider.dim() != head.dim_in) {
    throw std::invalid_argument("provider dim does not match projection head input");
  }
  const std::string texts[] = {pair.text_a, pair.text_b};
  const auto e = provider.embed_batch(texts);
  return pair_loss(head, e[0], e[1], pair.target);
}

ProjectionHead fine_tune_head(const ProjectionHead& head, const std::vector<PairExample>& pairs,
                              const EmbeddingProvider& provider, std::size_t epochs, double lr,
                              std::uint64_t seed, FineTuneStats* stats) {
  head.validate();
  if (pairs.empty()) throw std::invalid_argument("fine_tune_head: no pairs");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("fine_tune_head: bad lr");
  if (provider.dim() != head.dim_in) {
    throw std::invalid_argument("provider dim does not match projection head input");
  }
  std::vector<std::string> texts;
  texts.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    texts.push_back(p.text_a);
    texts.push_back(p.text_b);
  }
  const EmbeddingCache cache(provider, texts);

  ProjectionHead h = head;
  DenseVector a, b, ga, gb;
  auto mean_loss = [&] {
    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& p : pairs) {
      project_nz(h, cache[p.text_a], a);
      project_nz(h, cache[p.text_b], b);
      try {
        total += projected_loss(a, b, p.target, nullptr, nullptr);
        ++counted;
      } catch (const DegenerateProjection&) {
      }
    }
    return counted == 0 ? 0.0 : total / static_cast<double>(counted);
  };

  Rng rng(seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t degenerate = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    if (stats) stats->epoch_loss.push_back(mean_loss());
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const auto& p = pairs[idx];
      const auto& ea = cache[p.text_a];
      const auto& eb = cache[p.text_b];
      project_nz(h, ea, a);
      project_nz(h, eb, b);
      double loss;
      try {
        loss = projected_loss(a, b, p.target, &ga, &gb);
      } catch (const DegenerateProjection&) {
        ++degenerate;
        continue;
      }
      if (!std::isfinite(loss)) {
        throw std::runtime_error("non-finite pair loss on pair " + std::to_string(idx) + " (" +
                                 quote(p.text_a) + ", " + quote(p.text_b) + ")");
      }
      if (loss == 0.0 || lr == 0.0) continue;
      for (std::size_t q = 0; q < ea.index.size(); ++q) {
        double* w = h.weights.data() + static_cast<std::size_t>(ea.index[q]) * h.dim_out;
        const double s = lr * ea.value[q];
        for (std::size_t k = 0; k < h.dim_out; ++k) w[k] -= s * ga[k];
      }
      for (std::size_t q = 0; q < eb.index.size(); ++q) {
        double* w = h.weights.data() + static_cast<std::size_t>(eb.index[q]) * h.dim_out;
        const double s = lr * eb.value[q];
        for (std::size_t k = 0; k < h.dim_out; ++k) w[k] -= s * gb[k];
      }
      for (std::size_t k = 0; k < h.dim_out; ++k) h.bias[k] -= lr * (ga[k] + gb[k]);
    }
  }
  if (stats) {
    stats->epoch_loss.push_back(mean_loss());
    stats->degenerate_pairs = degenerate;
  }
  return h;
}

// ---------------------------------------------------------------------------

void FsbmConfig::validate() const {
  if (per_class == 0) throw std::invalid_argument("fsbm per_class must be >= 1");
  if (pairs_per_anchor < 2) throw std::invalid_argument("fsbm pairs_per_anchor must be >= 2");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("fsbm lr must be >= 0");
  if (head_dim_out == 1) throw std::invalid_argument("fsbm head_dim_out must be >= 2");
  if (mlp.algorithm != Algorithm::MLP) throw std::invalid_argument("fsbm head must be an MLP");
  mlp.validate();
}

nlohmann::json FsbmConfig::to_json() const {
  return {{"per_class", per_class},
          {"pairs_per_anchor", pairs_per_anchor},
          {"epochs", epochs},
          {"lr", lr},
          {"head_dim_out", head_dim_out},
          {"mlp", mlp.to_json()}};
}

FsbmConfig FsbmConfig::from_json(const nlohmann::json& j) {
  FsbmConfig c;
  c.per_class = j.at("per_class").get<std::size_t>();
  c.pairs_per_anchor = j.at("pairs_per_anchor").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.head_dim_out = j.at("head_dim_out").get<std::size_t>();
  c.mlp = ClassifierSpec::from_json(j.at("mlp"));
  c.validate();
  return c;
}

FsbmModel::FsbmModel(ProviderPtr provider, ProjectionHead head, TrainedModel classifier)
    : provider_(std::move(provider)), head_(std::move(head)), classifier_(std::move(classifier)) {
  if (!provider_) throw std::invalid_argument("fsbm model needs a provider");
  head_.validate();
  if (head_.dim_in != provider_->dim()) throw DataError("fsbm head does not match provider dim");
  if (classifier_.n_features() != head_.dim_out) {
    throw DataError("fsbm classifier does not match head output dim");
  }
}

SparseVector FsbmModel::features(const DenseVector& embedding) const {
  return SparseVector::from_dense(head_.project(embedding));
}

std::vector<double> FsbmModel::predict_proba(const std::string& text) const {
  return classifier_.predict_proba(features(provider_->embed(text)));
}

int FsbmModel::predict(const std::string& text) const {
  return classifier_.predict(features(provider_->embed(text)));
}

std::vector<int> FsbmModel::predict_batch(const std::vector<std::string>& texts) const {
  std::vector<int> out;
  out.reserve(texts.size());
  for (const auto& e : provider_->embed_batch(texts)) {
    out.push_back(classifier_.predict(features(e)));
  }
  return out;
}

nlohmann::json FsbmModel::to_json() const {
  return {{"format", "triage-fsbm"},
          {"version", 1},
          {"provider", provider_->config()},
          {"head", head_.to_json()},
          {"classifier", classifier_.to_json()}};
}

FsbmModel FsbmModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "triage-fsbm") throw DataError("not an fsbm model");
    if (j.at("version") != 1) throw DataError("unsupported fsbm model version");
    return FsbmModel(provider_from_json(j.at("provider")), ProjectionHead::from_json(j.at("head")),
                     TrainedModel::from_json(j.at("classifier")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fsbm model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed fsbm model: ") + e.what());
  }
}

FsbmModel fsbm_fit(const Dataset& train, ProviderPtr provider, const FsbmConfig& config,
                   std::uint64_t seed, FineTuneStats* stats) {
  config.validate();
  if (!provider) throw std::invalid_argument("fsbm_fit: no provider");
  const auto support = sample_support_set(train, config.per_class, derive_seed(seed, {"support"}));
  const auto pairs = generate_pairs(support, config.pairs_per_anchor, derive_seed(seed, {"pairs"}));
  const std::size_t dim_out = config.head_dim_out == 0 ? provider->dim() : config.head_dim_out;
  auto head = fine_tune_head(ProjectionHead::identity(provider->dim(), dim_out), pairs, *provider,
                             config.epochs, config.lr, derive_seed(seed, {"finetune"}), stats);

  FeatureMatrix x;
  x.dim = dim_out;
  x.rows.reserve(train.size());
  const auto texts = train.texts();
  for (const auto& e : provider->embed_batch(texts)) {
    x.rows.push_back(SparseVector::from_dense(head.project(e)));
  }
  ClassifierSpec spec = config.mlp;
  spec.seed = derive_seed(seed, {"mlp"});
  const auto labels = train.labels();
  auto classifier = fit(spec, x, labels);
  return FsbmModel(std::move(provider), std::move(head), std::move(classifier));
}

int fsbm_predict(const FsbmModel& model, const std::string& text) {
  return model.predict(text);
}

ClusteredCorpus make_clustered_corpus(std::uint64_t seed, std::size_t per_class, std::size_t dim,
                                      double noise) {
  if (dim < 4) throw std::invalid_argument("clustered corpus needs dim >= 4");
  Rng rng(seed);
  std::map<std::string, DenseVector> table;
  std::vector<Report> reports;
  for (int c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      DenseVector v(dim);
      for (std::size_t j = 0; j < dim; ++j) v[j] = noise * rng.normal();
      v[static_cast<std::size_t>(c)] += 1.0;
      char id[32];
      std::snprintf(id, sizeof id, "clu%06zu", reports.size());
      std::string text = "clustered report " + std::string(id);
      table.emplace(text, std::move(v));
      reports.push_back({id, text, SeverityClass(c + 1)});
    }
  }
  rng.shuffle(reports);
  return {Dataset(std::move(reports), Stage::Stage1, Provenance::Synthetic),
          table_embedder(std::move(table))};
}

}  // namespace triage
