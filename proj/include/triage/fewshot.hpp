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

// Few-shot pipeline: support sampling, sentence pairs, cosine-loss tuning
// of an affine projection head over a frozen embedding provider, and an MLP
// on the projected embeddings.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "triage/classifiers.hpp"
#include "triage/corpus.hpp"
#include "triage/http.hpp"

namespace triage {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  /// One vector of length dim() per text, in input order.
  virtual std::vector<DenseVector> embed_batch(std::span<const std::string> texts) const = 0;
  /// Enough to rebuild an equivalent provider with provider_from_json().
  virtual nlohmann::json config() const = 0;

  DenseVector embed(const std::string& text) const;
};

using ProviderPtr = std::shared_ptr<const EmbeddingProvider>;

/// Signed feature hashing of the preprocessed tokens (stopwords removed,
/// lemmatised), L2-normalised. Texts without tokens map to the zero vector.
/// Throws std::invalid_argument if dim < 8.
ProviderPtr hashed_embedder(std::size_t dim = 128, std::uint64_t seed = 0);

struct RemoteEmbedderOptions {
  std::size_t batch_size = 64;
  double timeout_seconds = 30.0;
  RetryPolicy retry;
};

/// POSTs {"texts": [...]} and expects {"embeddings": [[...]], "dim": N}.
/// Throws TransportError when retries run out and DataError on a dim
/// mismatch, a count mismatch or non-finite values.
ProviderPtr remote_embedder(std::string endpoint, std::size_t dim,
                            std::shared_ptr<HttpTransport> transport = nullptr,
                            RemoteEmbedderOptions options = {});

/// Fixed lookup table; unknown texts throw DataError.
ProviderPtr table_embedder(std::map<std::string, DenseVector> table);

ProviderPtr provider_from_json(const nlohmann::json& config);

struct PairExample {
  std::string text_a;
  std::string text_b;
  double target = 0.0;  // 1 when both sources share a class

  friend bool operator==(const PairExample&, const PairExample&) = default;
};

/// h(e) = W^T e + b with W of shape dim_in x dim_out (row-major).
struct ProjectionHead {
  std::size_t dim_in = 0;
  std::size_t dim_out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  /// W = rectangular identity, b = 0.
  static ProjectionHead identity(std::size_t dim_in, std::size_t dim_out);

  DenseVector project(std::span<const double> embedding) const;
  /// Throws std::invalid_argument on shape errors, dim_out < 2 or
  /// non-finite entries.
  void validate() const;

  nlohmann::json to_json() const;
  static ProjectionHead from_json(const nlohmann::json& j);

  friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;
};

/// A pair whose projection is the zero vector has no defined cosine.
class DegenerateProjection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws std::invalid_argument on zero vectors or mismatched dims.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// per_class examples per class, in class order. Classes with at least
/// per_class examples are sampled without replacement, smaller ones with
/// replacement; repeated draws get "#dupN" id suffixes.
Dataset sample_support_set(const Dataset& train, std::size_t per_class, std::uint64_t seed);

/// For every anchor: pairs_per_anchor / 2 same-class partners (other
/// examples) and the remainder from other classes, each drawn uniformly with
/// replacement. Throws DataError with fewer than 2 classes or a class of
/// size 1.
std::vector<PairExample> generate_pairs(const Dataset& support, std::size_t pairs_per_anchor,
                                        std::uint64_t seed);

/// (cos(h(e_a), h(e_b)) - target)^2 on precomputed embeddings. Fills the
/// gradient with respect to weights and bias when `grad` is given.
double pair_loss(const ProjectionHead& head, std::span<const double> embedding_a,
                 std::span<const double> embedding_b, double target,
                 ProjectionHead* grad = nullptr);

double pair_loss(const ProjectionHead& head, const PairExample& pair,
                 const EmbeddingProvider& provider);

struct FineTuneStats {
  /// Mean loss over the non-degenerate pairs, measured before each epoch's
  /// updates, plus a final entry after the last epoch.
  std::vector<double> epoch_loss;
  /// Pairs skipped because a projection was the zero vector.
  std::size_t degenerate_pairs = 0;
};

/// Per-pair SGD on the pair loss with a seeded shuffle each epoch. lr = 0
/// leaves the head unchanged. Throws std::runtime_error naming the pair on a
/// non-finite loss.
ProjectionHead fine_tune_head(const ProjectionHead& head, const std::vector<PairExample>& pairs,
                              const EmbeddingProvider& provider, std::size_t epochs, double lr,
                              std::uint64_t seed, FineTuneStats* stats = nullptr);

struct FsbmConfig {
  std::size_t per_class = 200;
  std::size_t pairs_per_anchor = 20;
  std::size_t epochs = 10;
  double lr = 0.01;
  std::size_t head_dim_out = 0;  // 0 = provider dim
  ClassifierSpec mlp{Algorithm::MLP, {}, 0};

  void validate() const;
  nlohmann::json to_json() const;
  static FsbmConfig from_json(const nlohmann::json& j);
};

class FsbmModel {
 public:
  FsbmModel(ProviderPtr provider, ProjectionHead head, TrainedModel classifier);

  const EmbeddingProvider& provider() const { return *provider_; }
  const ProjectionHead& head() const { return head_; }
  const TrainedModel& classifier() const { return classifier_; }

  std::vector<double> predict_proba(const std::string& text) const;
  int predict(const std::string& text) const;
  /// Batches the provider calls.
  std::vector<int> predict_batch(const std::vector<std::string>& texts) const;

  nlohmann::json to_json() const;
  static FsbmModel from_json(const nlohmann::json& j);

 private:
  SparseVector features(const DenseVector& embedding) const;

  ProviderPtr provider_;
  ProjectionHead head_;
  TrainedModel classifier_;
};

/// Seeds of the stages are derived from `seed`: "support", "pairs",
/// "finetune", and "mlp" for the classifier spec seed.
FsbmModel fsbm_fit(const Dataset& train, ProviderPtr provider, const FsbmConfig& config,
                   std::uint64_t seed, FineTuneStats* stats = nullptr);

int fsbm_predict(const FsbmModel& model, const std::string& text);

/// Corpus whose texts embed, through the returned table provider, into
/// well-separated per-class clusters (Stage1 labels). Seeded.
struct ClusteredCorpus {
  Dataset dataset;
  ProviderPtr provider;
};
ClusteredCorpus make_clustered_corpus(std::uint64_t seed, std::size_t per_class,
                                      std::size_t dim = 16, double noise = 0.15);

}  // namespace triage
