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

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "triage/features.hpp"

namespace triage {

using DenseVector = std::vector<double>;

enum class Algorithm {
  MultinomialNB,
  GaussianNB,
  DecisionTree,
  RandomForest,
  GradientBoosting,
  LinearSVM,
  RbfSVM,
  LogisticRegression,
  MLP,
};

/// All nine algorithms in report order.
const std::vector<Algorithm>& all_algorithms();

/// Stable machine key, e.g. "linear-svm".
std::string_view to_string(Algorithm algorithm);
/// Report row label, e.g. "Linear SVM".
std::string_view display_name(Algorithm algorithm);
Algorithm algorithm_from_string(std::string_view key);

/// Default hyperparameters. Keys:
///   multinomial-nb      alpha
///   gaussian-nb         var_smoothing
///   decision-tree       max_depth, min_samples_split
///   random-forest       n_trees, bootstrap, max_features (0 = ceil(sqrt(d))),
///                       max_depth, min_samples_split
///   gradient-boosting   n_rounds, max_depth, learning_rate, min_samples_split
///   linear-svm          lambda, epochs
///   rbf-svm             lambda, epochs, gamma (0 = 1/(d*Var(X)))
///   logistic-regression l2, iterations, learning_rate
///   mlp                 hidden, learning_rate, beta1, beta2, epsilon, epochs,
///                       batch_size
const std::map<std::string, double>& default_hyperparams(Algorithm algorithm);

struct ClassifierSpec {
  Algorithm algorithm = Algorithm::MultinomialNB;
  /// Overrides of the defaults; unknown keys are rejected by validate().
  std::map<std::string, double> hyperparams;
  std::uint64_t seed = 0;

  /// Override if present, default otherwise.
  double param(const std::string& key) const;
  /// Throws std::invalid_argument on unknown keys or out-of-range values.
  void validate() const;

  nlohmann::json to_json() const;
  static ClassifierSpec from_json(const nlohmann::json& j);

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

namespace detail {
class ModelImpl;
}

/// Immutable fitted classifier. Copies share the same parameters.
class TrainedModel {
 public:
  TrainedModel(ClassifierSpec spec, int n_classes, std::size_t n_features,
               std::shared_ptr<const detail::ModelImpl> impl);

  const ClassifierSpec& spec() const { return spec_; }
  int n_classes() const { return n_classes_; }
  std::size_t n_features() const { return n_features_; }

  /// Non-negative, sums to 1. Margin models use a softmax over margins.
  std::vector<double> predict_proba(const SparseVector& x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;
  /// argmax of predict_proba, ties to the lowest class index.
  int predict(const SparseVector& x) const;
  int predict(std::span<const double> x) const;

  /// Versioned, self-describing JSON blob. Round trip is bit-exact.
  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);

  const detail::ModelImpl& impl() const { return *impl_; }

 private:
  void check_dim(std::size_t dim) const;

  ClassifierSpec spec_;
  int n_classes_;
  std::size_t n_features_;
  std::shared_ptr<const detail::ModelImpl> impl_;
};

/// Optional diagnostics collected during fit.
struct FitTrace {
  /// Gradient boosting: training log-loss before round 1 and after each round.
  /// Logistic regression / MLP: loss per iteration / epoch.
  std::vector<double> loss_history;
};

/// Labels must cover 0..K-1 with K >= 2, each class at least once.
TrainedModel fit(const ClassifierSpec& spec, const FeatureMatrix& features,
                 std::span<const int> labels, FitTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Building blocks

/// 1 - sum p_c^2. Throws on all-zero counts.
double gini_impurity(std::span<const double> counts);

/// Variance is floored at 1e-9.
double gaussian_log_pdf(double x, double mean, double variance);

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma);

struct LinearState {
  DenseVector weights;
  double bias = 0.0;
};

/// One Pegasos step: weights shrink by (1 - step*lambda); the hinge term
/// (step*y*x, step*y) is added only when y*(w.x + b) < 1, evaluated with the
/// incoming weights.
LinearState hinge_subgradient_step(std::span<const double> weights, double bias,
                                   std::span<const double> x, int y, double lambda, double step);

std::vector<double> softmax(std::span<const double> logits);

int argmax(std::span<const double> values);

// Loss/gradient routines exposed for gradient checking.
namespace gradients {

/// Multinomial logistic regression, weights row-major [class][feature].
struct LogisticParams {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Mean cross-entropy + (l2/2)*||W||^2. Fills `grad` (same shape) if given.
double logistic_loss(const LogisticParams& params, const FeatureMatrix& x, std::span<const int> y,
                     double l2, LogisticParams* grad = nullptr);

/// One hidden ReLU layer. w1 row-major [input][hidden], w2 [hidden][output].
struct MlpParams {
  std::size_t n_inputs = 0;
  std::size_t n_hidden = 0;
  std::size_t n_outputs = 0;
  std::vector<double> w1, b1, w2, b2;
};

/// Mean cross-entropy over the rows. Fills `grad` (same shape) if given.
double mlp_loss(const MlpParams& params, const FeatureMatrix& x, std::span<const int> y,
                MlpParams* grad = nullptr);

}  // namespace gradients

}  // namespace triage
