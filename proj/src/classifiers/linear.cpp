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

// Multinomial logistic regression (full-batch gradient descent) and a
// one-hidden-layer ReLU network (mini-batch Adam).

#include <algorithm>
#include <cmath>
#include <numeric>

#include "model_impl.hpp"
#include "triage/random.hpp"

namespace triage {

namespace gradients {

namespace {

void check_shape(const LogisticParams& p, const FeatureMatrix& x, std::span<const int> y) {
  if (p.weights.size() != p.n_classes * p.n_features || p.bias.size() != p.n_classes) {
    throw std::invalid_argument("logistic_loss: parameter shape mismatch");
  }
  if (x.dim != p.n_features || x.size() != y.size() || x.size() == 0) {
    throw std::invalid_argument("logistic_loss: data shape mismatch");
  }
}

void check_shape(const MlpParams& p, const FeatureMatrix& x, std::span<const int> y) {
  if (p.w1.size() != p.n_inputs * p.n_hidden || p.b1.size() != p.n_hidden ||
      p.w2.size() != p.n_hidden * p.n_outputs || p.b2.size() != p.n_outputs) {
    throw std::invalid_argument("mlp_loss: parameter shape mismatch");
  }
  if (x.dim != p.n_inputs || x.size() != y.size() || x.size() == 0) {
    throw std::invalid_argument("mlp_loss: data shape mismatch");
  }
}

}  // namespace

std::vector<double> logistic_logits(const LogisticParams& p, const SparseVector& x) {
  std::vector<double> z(p.bias);
  for (std::size_t c = 0; c < p.n_classes; ++c) {
    z[c] += x.dot(std::span<const double>(p.weights).subspan(c * p.n_features, p.n_features));
  }
  return z;
}

double logistic_loss(const LogisticParams& params, const FeatureMatrix& x, std::span<const int> y,
                     double l2, LogisticParams* grad) {
  check_shape(params, x, y);
  const std::size_t k = params.n_classes, d = params.n_features;
  const double inv_n = 1.0 / static_cast<double>(x.size());
  if (grad) {
    grad->n_classes = k;
    grad->n_features = d;
    grad->weights.assign(k * d, 0.0);
    grad->bias.assign(k, 0.0);
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& row = x.rows[i];
    const auto p = softmax(logistic_logits(params, row));
    const auto yi = static_cast<std::size_t>(y[i]);
    loss -= std::log(std::max(p[yi], 1e-300));
    if (!grad) continue;
    for (std::size_t c = 0; c < k; ++c) {
      const double diff = (p[c] - (c == yi ? 1.0 : 0.0)) * inv_n;
      grad->bias[c] += diff;
      double* gw = grad->weights.data() + c * d;
      for (std::size_t q = 0; q < row.nnz(); ++q) gw[row.indices()[q]] += diff * row.values()[q];
    }
  }
  loss *= inv_n;
  double sq = 0.0;
  for (double w : params.weights) sq += w * w;
  loss += 0.5 * l2 * sq;
  if (grad) {
    for (std::size_t j = 0; j < params.weights.size(); ++j) {
      grad->weights[j] += l2 * params.weights[j];
    }
  }
  return loss;
}

// Forward pass for one row; `hidden` receives post-ReLU activations.
std::vector<double> mlp_forward(const MlpParams& p, const SparseVector& x,
                                std::vector<double>& hidden) {
  const std::size_t h = p.n_hidden, o = p.n_outputs;
  hidden.assign(p.b1.begin(), p.b1.end());
  for (std::size_t q = 0; q < x.nnz(); ++q) {
    const double v = x.values()[q];
    const double* w = p.w1.data() + static_cast<std::size_t>(x.indices()[q]) * h;
    for (std::size_t j = 0; j < h; ++j) hidden[j] += v * w[j];
  }
  for (double& a : hidden) a = std::max(a, 0.0);
  std::vector<double> out(p.b2);
  for (std::size_t j = 0; j < h; ++j) {
    if (hidden[j] == 0.0) continue;
    const double* w = p.w2.data() + j * o;
    for (std::size_t c = 0; c < o; ++c) out[c] += hidden[j] * w[c];
  }
  return out;
}

void zero_like(const MlpParams& p, MlpParams& g) {
  g.n_inputs = p.n_inputs;
  g.n_hidden = p.n_hidden;
  g.n_outputs = p.n_outputs;
  g.w1.assign(p.w1.size(), 0.0);
  g.b1.assign(p.b1.size(), 0.0);
  g.w2.assign(p.w2.size(), 0.0);
  g.b2.assign(p.b2.size(), 0.0);
}

// Mean loss over `rows`; accumulates the mean gradient into `grad` if given.
double mlp_batch_loss(const MlpParams& p, const FeatureMatrix& x, std::span<const int> y,
                      std::span<const std::size_t> rows, MlpParams* grad) {
  const std::size_t h = p.n_hidden, o = p.n_outputs;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  std::vector<double> hidden, delta_h(h);
  double loss = 0.0;
  for (std::size_t i : rows) {
    const auto& row = x.rows[i];
    auto prob = softmax(mlp_forward(p, row, hidden));
    const auto yi = static_cast<std::size_t>(y[i]);
    loss -= std::log(std::max(prob[yi], 1e-300));
    if (!grad) continue;
    for (std::size_t c = 0; c < o; ++c) prob[c] = (prob[c] - (c == yi ? 1.0 : 0.0)) * inv_n;
    for (std::size_t c = 0; c < o; ++c) grad->b2[c] += prob[c];
    for (std::size_t j = 0; j < h; ++j) {
      double back = 0.0;
      const double* w = p.w2.data() + j * o;
      double* gw = grad->w2.data() + j * o;
      for (std::size_t c = 0; c < o; ++c) {
        gw[c] += hidden[j] * prob[c];
        back += w[c] * prob[c];
      }
      delta_h[j] = hidden[j] > 0.0 ? back : 0.0;
      grad->b1[j] += delta_h[j];
    }
    for (std::size_t q = 0; q < row.nnz(); ++q) {
      const double v = row.values()[q];
      double* gw = grad->w1.data() + static_cast<std::size_t>(row.indices()[q]) * h;
      for (std::size_t j = 0; j < h; ++j) gw[j] += v * delta_h[j];
    }
  }
  return loss * inv_n;
}

double mlp_loss(const MlpParams& params, const FeatureMatrix& x, std::span<const int> y,
                MlpParams* grad) {
  check_shape(params, x, y);
  if (grad) zero_like(params, *grad);
  std::vector<std::size_t> rows(x.size());
  std::iota(rows.begin(), rows.end(), 0);
  return mlp_batch_loss(params, x, y, rows, grad);
}

}  // namespace gradients

namespace detail {

namespace {

using gradients::LogisticParams;
using gradients::MlpParams;

class LogisticModel final : public ModelImpl {
 public:
  explicit LogisticModel(LogisticParams p) : p_(std::move(p)) {}

  std::vector<double> predict_proba(const SparseVector& x) const override {
    return softmax(gradients::logistic_logits(p_, x));
  }
  nlohmann::json params_json() const override {
    return {{"weights", p_.weights}, {"bias", p_.bias}};
  }

 private:
  LogisticParams p_;
};

class MlpModel final : public ModelImpl {
 public:
  explicit MlpModel(MlpParams p) : p_(std::move(p)) {}

  std::vector<double> predict_proba(const SparseVector& x) const override {
    std::vector<double> hidden;
    return softmax(gradients::mlp_forward(p_, x, hidden));
  }
  nlohmann::json params_json() const override {
    return {{"hidden", p_.n_hidden}, {"w1", p_.w1}, {"b1", p_.b1}, {"w2", p_.w2}, {"b2", p_.b2}};
  }

 private:
  MlpParams p_;
};

// Adam state for one flat parameter block.
struct AdamSlot {
  std::vector<double> m, v;
  explicit AdamSlot(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& w, const std::vector<double>& g, double lr, double b1, double b2,
            double eps, double corr1, double corr2) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      w[i] -= lr * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + eps);
    }
  }
};

void glorot(std::vector<double>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : w) x = rng.uniform(-limit, limit);
}

}  // namespace

ModelPtr fit_logistic_regression(const FitInput& in) {
  const double l2 = in.spec.param("l2");
  const double lr = in.spec.param("learning_rate");
  const std::size_t iterations = as_count(in.spec.param("iterations"));
  LogisticParams p;
  p.n_features = in.x.dim;
  p.n_classes = static_cast<std::size_t>(in.n_classes);
  p.weights.assign(p.n_features * p.n_classes, 0.0);
  p.bias.assign(p.n_classes, 0.0);
  LogisticParams g;
  for (std::size_t it = 0; it < iterations; ++it) {
    const double loss = gradients::logistic_loss(p, in.x, in.y, l2, &g);
    if (in.trace) in.trace->loss_history.push_back(loss);
    for (std::size_t j = 0; j < p.weights.size(); ++j) p.weights[j] -= lr * g.weights[j];
    for (std::size_t c = 0; c < p.bias.size(); ++c) p.bias[c] -= lr * g.bias[c];
  }
  return std::make_shared<LogisticModel>(std::move(p));
}

ModelPtr fit_mlp(const FitInput& in) {
  const std::size_t hidden = as_count(in.spec.param("hidden"));
  const double lr = in.spec.param("learning_rate");
  const double beta1 = in.spec.param("beta1"), beta2 = in.spec.param("beta2");
  const double eps = in.spec.param("epsilon");
  const std::size_t epochs = as_count(in.spec.param("epochs"));
  const std::size_t batch = as_count(in.spec.param("batch_size"));
  const std::size_t n = in.x.size();

  Rng rng(in.spec.seed);
  MlpParams p;
  p.n_inputs = in.x.dim;
  p.n_hidden = hidden;
  p.n_outputs = static_cast<std::size_t>(in.n_classes);
  p.w1.resize(p.n_inputs * hidden);
  p.b1.assign(hidden, 0.0);
  p.w2.resize(hidden * p.n_outputs);
  p.b2.assign(p.n_outputs, 0.0);
  glorot(p.w1, p.n_inputs, hidden, rng);
  glorot(p.w2, hidden, p.n_outputs, rng);

  AdamSlot s_w1(p.w1.size()), s_b1(p.b1.size()), s_w2(p.w2.size()), s_b2(p.b2.size());
  MlpParams g;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t t = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      gradients::zero_like(p, g);
      epoch_loss += gradients::mlp_batch_loss(p, in.x, in.y, rows, &g) * static_cast<double>(len);
      ++t;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
      s_w1.step(p.w1, g.w1, lr, beta1, beta2, eps, c1, c2);
      s_b1.step(p.b1, g.b1, lr, beta1, beta2, eps, c1, c2);
      s_w2.step(p.w2, g.w2, lr, beta1, beta2, eps, c1, c2);
      s_b2.step(p.b2, g.b2, lr, beta1, beta2, eps, c1, c2);
    }
    if (in.trace) in.trace->loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  return std::make_shared<MlpModel>(std::move(p));
}

ModelPtr load_logistic_regression(const LoadInput& in) {
  LogisticParams p;
  p.n_features = in.n_features;
  p.n_classes = static_cast<std::size_t>(in.n_classes);
  p.weights = vector_from_json<double>(in.params.at("weights"), p.n_features * p.n_classes);
  p.bias = vector_from_json<double>(in.params.at("bias"), p.n_classes);
  return std::make_shared<LogisticModel>(std::move(p));
}

ModelPtr load_mlp(const LoadInput& in) {
  MlpParams p;
  p.n_inputs = in.n_features;
  p.n_hidden = in.params.at("hidden").get<std::size_t>();
  p.n_outputs = static_cast<std::size_t>(in.n_classes);
  if (p.n_hidden == 0) throw DataError("mlp without hidden units");
  p.w1 = vector_from_json<double>(in.params.at("w1"), p.n_inputs * p.n_hidden);
  p.b1 = vector_from_json<double>(in.params.at("b1"), p.n_hidden);
  p.w2 = vector_from_json<double>(in.params.at("w2"), p.n_hidden * p.n_outputs);
  p.b2 = vector_from_json<double>(in.params.at("b2"), p.n_outputs);
  return std::make_shared<MlpModel>(std::move(p));
}

}  // namespace detail

}  // namespace triage
