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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "model_impl.hpp"

namespace triage {

namespace {

struct AlgorithmInfo {
  Algorithm algorithm;
  std::string_view key;
  std::string_view display;
};

constexpr AlgorithmInfo kAlgorithms[] = {
    {Algorithm::GaussianNB, "gaussian-nb", "Gaussian Naive Bayes"},
    {Algorithm::DecisionTree, "decision-tree", "Decision Tree"},
    {Algorithm::GradientBoosting, "gradient-boosting", "Gradient Boosting"},
    {Algorithm::RandomForest, "random-forest", "Random Forest"},
    {Algorithm::LinearSVM, "linear-svm", "Linear SVM"},
    {Algorithm::RbfSVM, "rbf-svm", "RBF kernel SVM"},
    {Algorithm::LogisticRegression, "logistic-regression", "Logistic Regression"},
    {Algorithm::MultinomialNB, "multinomial-nb", "Multinomial Naive Bayes"},
    {Algorithm::MLP, "mlp", "MLP"},
};

const AlgorithmInfo& info(Algorithm a) {
  for (const auto& i : kAlgorithms) {
    if (i.algorithm == a) return i;
  }
  throw std::logic_error("unknown algorithm");
}

}  // namespace

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> kAll = [] {
    std::vector<Algorithm> v;
    for (const auto& i : kAlgorithms) v.push_back(i.algorithm);
    return v;
  }();
  return kAll;
}

std::string_view to_string(Algorithm algorithm) {
  return info(algorithm).key;
}
std::string_view display_name(Algorithm algorithm) {
  return info(algorithm).display;
}

Algorithm algorithm_from_string(std::string_view key) {
  for (const auto& i : kAlgorithms) {
    if (i.key == key) return i.algorithm;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(key) + "'");
}

const std::map<std::string, double>& default_hyperparams(Algorithm algorithm) {
  static const std::map<Algorithm, std::map<std::string, double>> kDefaults = {
      {Algorithm::MultinomialNB, {{"alpha", 1.0}}},
      {Algorithm::GaussianNB, {{"var_smoothing", 1e-9}}},
      {Algorithm::DecisionTree, {{"max_depth", 20}, {"min_samples_split", 2}}},
      {Algorithm::RandomForest,
       {{"n_trees", 100},
        {"bootstrap", 1},
        {"max_features", 0},
        {"max_depth", 20},
        {"min_samples_split", 2}}},
      {Algorithm::GradientBoosting,
       {{"n_rounds", 100}, {"max_depth", 3}, {"learning_rate", 0.1}, {"min_samples_split", 2}}},
      {Algorithm::LinearSVM, {{"lambda", 1e-4}, {"epochs", 20}}},
      {Algorithm::RbfSVM, {{"lambda", 1e-4}, {"epochs", 20}, {"gamma", 0}}},
      {Algorithm::LogisticRegression, {{"l2", 1e-4}, {"iterations", 500}, {"learning_rate", 0.1}}},
      {Algorithm::MLP,
       {{"hidden", 100},
        {"learning_rate", 1e-3},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"epsilon", 1e-8},
        {"epochs", 200},
        {"batch_size", 32}}},
  };
  return kDefaults.at(algorithm);
}

double ClassifierSpec::param(const std::string& key) const {
  if (auto it = hyperparams.find(key); it != hyperparams.end()) return it->second;
  const auto& defaults = default_hyperparams(algorithm);
  auto it = defaults.find(key);
  if (it == defaults.end()) {
    throw std::invalid_argument("unknown hyperparameter '" + key + "' for " +
                                std::string(to_string(algorithm)));
  }
  return it->second;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool integral(double v) {
  return std::isfinite(v) && std::floor(v) == v;
}

}  // namespace

void ClassifierSpec::validate() const {
  const auto& defaults = default_hyperparams(algorithm);
  for (const auto& [key, value] : hyperparams) {
    require(defaults.count(key) > 0,
            "unknown hyperparameter '" + key + "' for " + std::string(to_string(algorithm)));
    require(std::isfinite(value), "hyperparameter '" + key + "' must be finite");
  }
  auto positive = [&](const char* key) {
    require(param(key) > 0.0, std::string(key) + " must be > 0");
  };
  auto count_at_least = [&](const char* key, double lo) {
    const double v = param(key);
    require(integral(v) && v >= lo,
            std::string(key) + " must be an integer >= " + std::to_string(static_cast<int>(lo)));
  };
  switch (algorithm) {
    case Algorithm::MultinomialNB: positive("alpha"); break;
    case Algorithm::GaussianNB:
      require(param("var_smoothing") >= 0.0, "var_smoothing must be >= 0");
      break;
    case Algorithm::DecisionTree:
      count_at_least("max_depth", 1);
      count_at_least("min_samples_split", 2);
      break;
    case Algorithm::RandomForest:
      count_at_least("n_trees", 1);
      count_at_least("max_depth", 1);
      count_at_least("min_samples_split", 2);
      count_at_least("max_features", 0);
      require(param("bootstrap") == 0.0 || param("bootstrap") == 1.0, "bootstrap must be 0 or 1");
      break;
    case Algorithm::GradientBoosting:
      count_at_least("n_rounds", 1);
      count_at_least("max_depth", 1);
      count_at_least("min_samples_split", 2);
      positive("learning_rate");
      break;
    case Algorithm::LinearSVM:
      positive("lambda");
      count_at_least("epochs", 1);
      break;
    case Algorithm::RbfSVM:
      positive("lambda");
      count_at_least("epochs", 1);
      require(param("gamma") >= 0.0, "gamma must be >= 0");
      break;
    case Algorithm::LogisticRegression:
      require(param("l2") >= 0.0, "l2 must be >= 0");
      count_at_least("iterations", 0);
      positive("learning_rate");
      break;
    case Algorithm::MLP:
      count_at_least("hidden", 1);
      positive("learning_rate");
      require(param("beta1") >= 0.0 && param("beta1") < 1.0, "beta1 must be in [0,1)");
      require(param("beta2") >= 0.0 && param("beta2") < 1.0, "beta2 must be in [0,1)");
      positive("epsilon");
      count_at_least("epochs", 0);
      count_at_least("batch_size", 1);
      break;
  }
}

nlohmann::json ClassifierSpec::to_json() const {
  nlohmann::json hp = nlohmann::json::object();
  for (const auto& [k, v] : hyperparams) hp[k] = v;
  return {{"algorithm", std::string(to_string(algorithm))}, {"hyperparams", hp}, {"seed", seed}};
}

ClassifierSpec ClassifierSpec::from_json(const nlohmann::json& j) {
  ClassifierSpec s;
  s.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  for (const auto& [k, v] : j.at("hyperparams").items()) s.hyperparams[k] = v.get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// TrainedModel

TrainedModel::TrainedModel(ClassifierSpec spec, int n_classes, std::size_t n_features,
                           std::shared_ptr<const detail::ModelImpl> impl)
    : spec_(std::move(spec)),
      n_classes_(n_classes),
      n_features_(n_features),
      impl_(std::move(impl)) {}

void TrainedModel::check_dim(std::size_t dim) const {
  if (dim != n_features_) {
    throw DataError("feature dimension mismatch: model expects " + std::to_string(n_features_) +
                    ", got " + std::to_string(dim));
  }
}

std::vector<double> TrainedModel::predict_proba(const SparseVector& x) const {
  check_dim(x.dim());
  return impl_->predict_proba(x);
}

std::vector<double> TrainedModel::predict_proba(std::span<const double> x) const {
  check_dim(x.size());
  return impl_->predict_proba(SparseVector::from_dense(x));
}

int TrainedModel::predict(const SparseVector& x) const {
  return argmax(predict_proba(x));
}

int TrainedModel::predict(std::span<const double> x) const {
  return argmax(predict_proba(x));
}

nlohmann::json TrainedModel::to_json() const {
  return {{"format", "triage-classifier"}, {"version", 1},
          {"spec", spec_.to_json()},       {"n_classes", n_classes_},
          {"n_features", n_features_},     {"params", impl_->params_json()}};
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "triage-classifier") throw DataError("not a classifier blob");
    if (j.at("version") != 1) throw DataError("unsupported classifier blob version");
    auto spec = ClassifierSpec::from_json(j.at("spec"));
    const int n_classes = j.at("n_classes").get<int>();
    const auto n_features = j.at("n_features").get<std::size_t>();
    if (n_classes < 2) throw DataError("classifier blob has fewer than 2 classes");
    const detail::LoadInput in{j.at("params"), n_classes, n_features};
    detail::ModelPtr impl;
    switch (spec.algorithm) {
      case Algorithm::MultinomialNB: impl = detail::load_multinomial_nb(in); break;
      case Algorithm::GaussianNB: impl = detail::load_gaussian_nb(in); break;
      case Algorithm::DecisionTree: impl = detail::load_decision_tree(in); break;
      case Algorithm::RandomForest: impl = detail::load_random_forest(in); break;
      case Algorithm::GradientBoosting: impl = detail::load_gradient_boosting(in); break;
      case Algorithm::LinearSVM: impl = detail::load_linear_svm(in); break;
      case Algorithm::RbfSVM: impl = detail::load_rbf_svm(in); break;
      case Algorithm::LogisticRegression: impl = detail::load_logistic_regression(in); break;
      case Algorithm::MLP: impl = detail::load_mlp(in); break;
    }
    return TrainedModel(std::move(spec), n_classes, n_features, std::move(impl));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed classifier blob: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed classifier blob: ") + e.what());
  }
}

TrainedModel fit(const ClassifierSpec& spec, const FeatureMatrix& features,
                 std::span<const int> labels, FitTrace* trace) {
  spec.validate();
  if (features.size() != labels.size()) {
    throw DataError("feature rows and labels differ in length");
  }
  if (features.size() == 0) throw DataError("cannot fit on an empty training set");
  for (const auto& row : features.rows) {
    if (row.dim() != features.dim) throw DataError("feature dimension mismatch between rows");
    for (double v : row.values()) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
  }
  int n_classes = 0;
  for (int y : labels) {
    if (y < 0) throw DataError("negative class label");
    n_classes = std::max(n_classes, y + 1);
  }
  std::vector<std::size_t> per_class(static_cast<std::size_t>(n_classes), 0);
  for (int y : labels) ++per_class[static_cast<std::size_t>(y)];
  if (n_classes < 2) throw DataError("training data must contain at least two classes");
  for (int c = 0; c < n_classes; ++c) {
    if (per_class[static_cast<std::size_t>(c)] == 0) {
      throw DataError("class " + std::to_string(c) + " has no training examples");
    }
  }
  if (trace) trace->loss_history.clear();

  const detail::FitInput in{spec, features, labels, n_classes, trace};
  detail::ModelPtr impl;
  switch (spec.algorithm) {
    case Algorithm::MultinomialNB: impl = detail::fit_multinomial_nb(in); break;
    case Algorithm::GaussianNB: impl = detail::fit_gaussian_nb(in); break;
    case Algorithm::DecisionTree: impl = detail::fit_decision_tree(in); break;
    case Algorithm::RandomForest: impl = detail::fit_random_forest(in); break;
    case Algorithm::GradientBoosting: impl = detail::fit_gradient_boosting(in); break;
    case Algorithm::LinearSVM: impl = detail::fit_linear_svm(in); break;
    case Algorithm::RbfSVM: impl = detail::fit_rbf_svm(in); break;
    case Algorithm::LogisticRegression: impl = detail::fit_logistic_regression(in); break;
    case Algorithm::MLP: impl = detail::fit_mlp(in); break;
  }
  return TrainedModel(spec, n_classes, features.dim, std::move(impl));
}

// ---------------------------------------------------------------------------
// Building blocks

double gini_impurity(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw std::invalid_argument("gini_impurity: negative count");
    total += c;
  }
  if (total <= 0.0) throw std::invalid_argument("gini_impurity: all-zero counts");
  double sum_sq = 0.0;
  for (double c : counts) {
    const double p = c / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

double gaussian_log_pdf(double x, double mean, double variance) {
  const double var = std::max(variance, 1e-9);
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
}

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) {
  if (u.size() != v.size()) throw std::invalid_argument("rbf_kernel: dimension mismatch");
  if (gamma < 0.0) throw std::invalid_argument("rbf_kernel: gamma must be >= 0");
  double sq = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    sq += d * d;
  }
  return std::exp(-gamma * sq);
}

LinearState hinge_subgradient_step(std::span<const double> weights, double bias,
                                   std::span<const double> x, int y, double lambda, double step) {
  if (weights.size() != x.size()) {
    throw std::invalid_argument("hinge_subgradient_step: dimension mismatch");
  }
  double score = bias;
  for (std::size_t i = 0; i < x.size(); ++i) score += weights[i] * x[i];
  const double yy = y > 0 ? 1.0 : -1.0;
  LinearState out{DenseVector(weights.begin(), weights.end()), bias};
  const double shrink = 1.0 - step * lambda;
  for (double& w : out.weights) w *= shrink;
  if (yy * score < 1.0) {
    for (std::size_t i = 0; i < x.size(); ++i) out.weights[i] += step * yy * x[i];
    out.bias += step * yy;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

namespace detail {

nlohmann::json sparse_to_json(const SparseVector& v) {
  return {{"i", std::vector<std::uint32_t>(v.indices().begin(), v.indices().end())},
          {"v", std::vector<double>(v.values().begin(), v.values().end())}};
}

SparseVector sparse_from_json(const nlohmann::json& j, std::size_t dim) {
  const auto idx = j.at("i").get<std::vector<std::uint32_t>>();
  const auto val = j.at("v").get<std::vector<double>>();
  if (idx.size() != val.size()) throw DataError("sparse vector index/value mismatch");
  std::vector<std::pair<std::uint32_t, double>> entries;
  entries.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) entries.emplace_back(idx[k], val[k]);
  try {
    return SparseVector(dim, std::move(entries));
  } catch (const std::exception& e) {
    throw DataError(std::string("bad sparse vector: ") + e.what());
  }
}

}  // namespace detail

}  // namespace triage
