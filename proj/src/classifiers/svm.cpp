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

// One-vs-rest SVMs trained with Pegasos.
//
// Linear: w is kept as scale * v so the per-step shrink is O(1) on sparse
// rows. Step size 1/(lambda * (t + t0)) with t0 = 1/lambda keeps the first
// steps bounded. The bias is updated but not regularised.
//
// RBF: kernelised Pegasos without bias. gamma = 0 selects 1 / (d * Var(X)). Only rows whose alpha
// grows pay for a kernel row; margins of every training row are maintained incrementally.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "model_impl.hpp"
#include "triage/random.hpp"

namespace triage::detail {

namespace {

double sparse_dot(const SparseVector& a, const SparseVector& b) {
  const auto ai = a.indices(), bi = b.indices();
  const auto av = a.values(), bv = b.values();
  std::size_t i = 0, j = 0;
  double s = 0.0;
  while (i < ai.size() && j < bi.size()) {
    if (ai[i] < bi[j]) {
      ++i;
    } else if (bi[j] < ai[i]) {
      ++j;
    } else {
      s += av[i++] * bv[j++];
    }
  }
  return s;
}

double squared_norm(const SparseVector& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

double sparse_rbf(const SparseVector& a, double a_sq, const SparseVector& b, double b_sq,
                  double gamma) {
  const double d2 = std::max(0.0, a_sq + b_sq - 2.0 * sparse_dot(a, b));
  return std::exp(-gamma * d2);
}

// 1 / (d * Var(X)) over all dense entries; 1/d when X is constant.
double scale_gamma(const FeatureMatrix& x) {
  const double cells = static_cast<double>(x.size()) * static_cast<double>(x.dim);
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& row : x.rows) {
    for (double v : row.values()) {
      sum += v;
      sum_sq += v * v;
    }
  }
  const double mean = sum / cells;
  const double var = sum_sq / cells - mean * mean;
  const double d = static_cast<double>(x.dim);
  return var > 0.0 ? 1.0 / (d * var) : 1.0 / d;
}

class LinearSvmModel final : public ModelImpl {
 public:
  LinearSvmModel(std::vector<double> weights, std::vector<double> bias, std::size_t n_features)
      : weights_(std::move(weights)), bias_(std::move(bias)), n_features_(n_features) {}

  std::vector<double> predict_proba(const SparseVector& x) const override {
    std::vector<double> margin(bias_);
    for (std::size_t c = 0; c < margin.size(); ++c) {
      margin[c] += x.dot(std::span<const double>(weights_).subspan(c * n_features_, n_features_));
    }
    return softmax(margin);
  }
  nlohmann::json params_json() const override { return {{"weights", weights_}, {"bias", bias_}}; }

 private:
  std::vector<double> weights_;  // [class][feature]
  std::vector<double> bias_;
  std::size_t n_features_;
};

class RbfSvmModel final : public ModelImpl {
 public:
  RbfSvmModel(std::vector<SparseVector> support, std::vector<double> coef, double gamma,
              std::size_t n_classes)
      : support_(std::move(support)), coef_(std::move(coef)), gamma_(gamma), n_classes_(n_classes) {
    for (const auto& s : support_) support_sq_.push_back(squared_norm(s));
  }

  std::vector<double> predict_proba(const SparseVector& x) const override {
    const std::size_t n_sv = support_.size();
    std::vector<double> margin(n_classes_, 0.0);
    const double x_sq = squared_norm(x);
    for (std::size_t j = 0; j < n_sv; ++j) {
      const double kv = sparse_rbf(x, x_sq, support_[j], support_sq_[j], gamma_);
      for (std::size_t c = 0; c < n_classes_; ++c) margin[c] += coef_[c * n_sv + j] * kv;
    }
    return softmax(margin);
  }
  nlohmann::json params_json() const override {
    nlohmann::json sv = nlohmann::json::array();
    for (const auto& s : support_) sv.push_back(sparse_to_json(s));
    return {{"gamma", gamma_}, {"n_classes", n_classes_}, {"support", sv}, {"coef", coef_}};
  }

 private:
  std::vector<SparseVector> support_;
  std::vector<double> support_sq_;
  std::vector<double> coef_;  // [class][support]
  double gamma_;
  std::size_t n_classes_;
};

}  // namespace

ModelPtr fit_linear_svm(const FitInput& in) {
  const double lambda = in.spec.param("lambda");
  const std::size_t epochs = as_count(in.spec.param("epochs"));
  const std::size_t n = in.x.size();
  const std::size_t d = in.x.dim;
  const auto k = static_cast<std::size_t>(in.n_classes);
  const double t0 = 1.0 / lambda;

  std::vector<double> weights(k * d, 0.0);
  std::vector<double> bias(k, 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < k; ++c) {
    Rng rng(derive_seed(in.spec.seed, c));
    std::span<double> v(weights.data() + c * d, d);
    double scale = 1.0;
    double b = 0.0;
    std::size_t t = 0;
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t e = 0; e < epochs; ++e) {
      rng.shuffle(order);
      for (std::size_t i : order) {
        ++t;
        const double step = 1.0 / (lambda * (static_cast<double>(t) + t0));
        const double y = static_cast<std::size_t>(in.y[i]) == c ? 1.0 : -1.0;
        const auto& x = in.x.rows[i];
        const double score = scale * x.dot(v) + b;
        scale *= 1.0 - step * lambda;
        if (y * score < 1.0) {
          const double a = step * y / scale;
          for (std::size_t q = 0; q < x.nnz(); ++q) v[x.indices()[q]] += a * x.values()[q];
          b += step * y;
        }
        if (scale < 1e-9) {
          for (double& w : v) w *= scale;
          scale = 1.0;
        }
      }
    }
    for (double& w : v) w *= scale;
    bias[c] = b;
  }
  return std::make_shared<LinearSvmModel>(std::move(weights), std::move(bias), d);
}

ModelPtr fit_rbf_svm(const FitInput& in) {
  const double lambda = in.spec.param("lambda");
  const std::size_t epochs = as_count(in.spec.param("epochs"));
  const std::size_t n = in.x.size();
  const auto k = static_cast<std::size_t>(in.n_classes);
  double gamma = in.spec.param("gamma");
  if (gamma == 0.0) gamma = scale_gamma(in.x);

  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = squared_norm(in.x.rows[i]);

  // Kernel rows are computed on first use and shared across classes.
  std::vector<std::vector<double>> kernel_rows(n);
  auto kernel_row = [&](std::size_t j) -> const std::vector<double>& {
    auto& row = kernel_rows[j];
    if (row.empty()) {
      row.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        row[i] = sparse_rbf(in.x.rows[i], sq[i], in.x.rows[j], sq[j], gamma);
      }
    }
    return row;
  };

  std::vector<double> alpha(k * n, 0.0);
  std::vector<std::size_t> order(n);
  std::vector<double> g(n);
  const double total_steps = static_cast<double>(epochs * n);
  for (std::size_t c = 0; c < k; ++c) {
    Rng rng(derive_seed(in.spec.seed, c));
    std::fill(g.begin(), g.end(), 0.0);  // g[i] = sum_j alpha_j y_j K(i, j)
    std::iota(order.begin(), order.end(), 0);
    std::size_t t = 0;
    for (std::size_t e = 0; e < epochs; ++e) {
      rng.shuffle(order);
      for (std::size_t i : order) {
        ++t;
        const double y = static_cast<std::size_t>(in.y[i]) == c ? 1.0 : -1.0;
        if (y * g[i] / (lambda * static_cast<double>(t)) < 1.0) {
          alpha[c * n + i] += 1.0;
          const auto& row = kernel_row(i);
          for (std::size_t q = 0; q < n; ++q) g[q] += y * row[q];
        }
      }
    }
  }

  std::vector<std::size_t> sv;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      if (alpha[c * n + i] > 0.0) {
        sv.push_back(i);
        break;
      }
    }
  }
  std::vector<SparseVector> support;
  std::vector<double> coef(k * sv.size());
  for (std::size_t j = 0; j < sv.size(); ++j) {
    const std::size_t i = sv[j];
    support.push_back(in.x.rows[i]);
    for (std::size_t c = 0; c < k; ++c) {
      const double y = static_cast<std::size_t>(in.y[i]) == c ? 1.0 : -1.0;
      coef[c * sv.size() + j] = alpha[c * n + i] * y / (lambda * total_steps);
    }
  }
  return std::make_shared<RbfSvmModel>(std::move(support), std::move(coef), gamma, k);
}

ModelPtr load_linear_svm(const LoadInput& in) {
  const auto k = static_cast<std::size_t>(in.n_classes);
  return std::make_shared<LinearSvmModel>(
      vector_from_json<double>(in.params.at("weights"), k * in.n_features),
      vector_from_json<double>(in.params.at("bias"), k), in.n_features);
}

ModelPtr load_rbf_svm(const LoadInput& in) {
  const auto k = static_cast<std::size_t>(in.n_classes);
  if (in.params.at("n_classes").get<std::size_t>() != k) {
    throw DataError("rbf-svm class count mismatch");
  }
  std::vector<SparseVector> support;
  for (const auto& s : in.params.at("support")) {
    support.push_back(sparse_from_json(s, in.n_features));
  }
  auto coef = vector_from_json<double>(in.params.at("coef"), k * support.size());
  const double gamma = in.params.at("gamma").get<double>();
  if (!(gamma >= 0.0)) throw DataError("rbf-svm gamma must be >= 0");
  return std::make_shared<RbfSvmModel>(std::move(support), std::move(coef), gamma, k);
}

}  // namespace triage::detail
