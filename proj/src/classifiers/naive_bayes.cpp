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
#include <limits>

#include "model_impl.hpp"

namespace triage::detail {

namespace {

// Normalises log-joint scores into probabilities.
std::vector<double> normalize_log(std::vector<double> log_joint) {
  return softmax(log_joint);
}

std::vector<double> class_log_priors(std::span<const int> y, int n_classes) {
  std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
  for (int c : y) counts[static_cast<std::size_t>(c)] += 1.0;
  std::vector<double> out(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out[c] = std::log(counts[c] / static_cast<double>(y.size()));
  }
  return out;
}

class MultinomialNb final : public ModelImpl {
 public:
  MultinomialNb(std::vector<double> log_prior, std::vector<double> log_likelihood,
                std::size_t n_features)
      : log_prior_(std::move(log_prior)),
        log_likelihood_(std::move(log_likelihood)),
        n_features_(n_features) {}

  std::vector<double> predict_proba(const SparseVector& x) const override {
    std::vector<double> scores = log_prior_;
    for (std::size_t c = 0; c < scores.size(); ++c) {
      const double* row = log_likelihood_.data() + c * n_features_;
      for (std::size_t k = 0; k < x.nnz(); ++k) {
        scores[c] += x.values()[k] * row[x.indices()[k]];
      }
    }
    return normalize_log(std::move(scores));
  }

  nlohmann::json params_json() const override {
    return {{"log_prior", log_prior_}, {"log_likelihood", log_likelihood_}};
  }

 private:
  std::vector<double> log_prior_;
  std::vector<double> log_likelihood_;  // [class][feature]
  std::size_t n_features_;
};

class GaussianNb final : public ModelImpl {
 public:
  GaussianNb(std::vector<double> log_prior, std::vector<double> mean, std::vector<double> variance,
             std::size_t n_features)
      : log_prior_(std::move(log_prior)),
        mean_(std::move(mean)),
        variance_(std::move(variance)),
        n_features_(n_features) {}

  std::vector<double> predict_proba(const SparseVector& sparse) const override {
    const std::vector<double> x = sparse.to_dense();
    std::vector<double> scores = log_prior_;
    for (std::size_t c = 0; c < scores.size(); ++c) {
      const std::size_t off = c * n_features_;
      double s = 0.0;
      for (std::size_t j = 0; j < n_features_; ++j) {
        s += gaussian_log_pdf(x[j], mean_[off + j], variance_[off + j]);
      }
      scores[c] += s;
    }
    return normalize_log(std::move(scores));
  }

  nlohmann::json params_json() const override {
    return {{"log_prior", log_prior_}, {"mean", mean_}, {"variance", variance_}};
  }

 private:
  std::vector<double> log_prior_;
  std::vector<double> mean_;      // [class][feature]
  std::vector<double> variance_;  // [class][feature], smoothing included
  std::size_t n_features_;
};

}  // namespace

ModelPtr fit_multinomial_nb(const FitInput& in) {
  const double alpha = in.spec.param("alpha");
  const std::size_t d = in.x.dim;
  const auto k = static_cast<std::size_t>(in.n_classes);
  std::vector<double> feature_count(k * d, 0.0);
  for (std::size_t i = 0; i < in.x.size(); ++i) {
    const auto& row = in.x.rows[i];
    double* fc = feature_count.data() + static_cast<std::size_t>(in.y[i]) * d;
    for (std::size_t t = 0; t < row.nnz(); ++t) {
      if (row.values()[t] < 0.0) {
        throw DataError("multinomial naive Bayes requires non-negative features");
      }
      fc[row.indices()[t]] += row.values()[t];
    }
  }
  std::vector<double> log_likelihood(k * d);
  for (std::size_t c = 0; c < k; ++c) {
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) total += feature_count[c * d + j];
    const double denom = std::log(total + alpha * static_cast<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
      log_likelihood[c * d + j] = std::log(feature_count[c * d + j] + alpha) - denom;
    }
  }
  return std::make_shared<MultinomialNb>(class_log_priors(in.y, in.n_classes),
                                         std::move(log_likelihood), d);
}

ModelPtr fit_gaussian_nb(const FitInput& in) {
  const std::size_t d = in.x.dim;
  const std::size_t n = in.x.size();
  const auto k = static_cast<std::size_t>(in.n_classes);

  // Per-class means, then per-class variances from centred sums; absent
  // (zero) entries contribute mean^2 each.
  std::vector<double> count(k, 0.0);
  std::vector<double> mean(k * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(in.y[i]);
    count[c] += 1.0;
    const auto& row = in.x.rows[i];
    for (std::size_t t = 0; t < row.nnz(); ++t) mean[c * d + row.indices()[t]] += row.values()[t];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) mean[c * d + j] /= count[c];
  }
  std::vector<double> sq(k * d, 0.0);
  std::vector<double> nnz(k * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(in.y[i]);
    const auto& row = in.x.rows[i];
    for (std::size_t t = 0; t < row.nnz(); ++t) {
      const std::size_t idx = c * d + row.indices()[t];
      const double dev = row.values()[t] - mean[idx];
      sq[idx] += dev * dev;
      nnz[idx] += 1.0;
    }
  }
  std::vector<double> variance(k * d);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t idx = c * d + j;
      const double zeros = count[c] - nnz[idx];
      variance[idx] = (sq[idx] + zeros * mean[idx] * mean[idx]) / count[c];
    }
  }

  // Smoothing: var_smoothing times the largest per-feature variance over all
  // training rows.
  std::vector<double> gmean(d, 0.0), gsq(d, 0.0), gnnz(d, 0.0);
  for (const auto& row : in.x.rows) {
    for (std::size_t t = 0; t < row.nnz(); ++t) gmean[row.indices()[t]] += row.values()[t];
  }
  for (double& m : gmean) m /= static_cast<double>(n);
  for (const auto& row : in.x.rows) {
    for (std::size_t t = 0; t < row.nnz(); ++t) {
      const double dev = row.values()[t] - gmean[row.indices()[t]];
      gsq[row.indices()[t]] += dev * dev;
      gnnz[row.indices()[t]] += 1.0;
    }
  }
  double max_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double v = (gsq[j] + (static_cast<double>(n) - gnnz[j]) * gmean[j] * gmean[j]) /
                     static_cast<double>(n);
    max_var = std::max(max_var, v);
  }
  const double epsilon = in.spec.param("var_smoothing") * max_var;
  for (double& v : variance) v += epsilon;

  return std::make_shared<GaussianNb>(class_log_priors(in.y, in.n_classes), std::move(mean),
                                      std::move(variance), d);
}

ModelPtr load_multinomial_nb(const LoadInput& in) {
  const auto k = static_cast<std::size_t>(in.n_classes);
  return std::make_shared<MultinomialNb>(
      vector_from_json<double>(in.params.at("log_prior"), k),
      vector_from_json<double>(in.params.at("log_likelihood"), k * in.n_features), in.n_features);
}

ModelPtr load_gaussian_nb(const LoadInput& in) {
  const auto k = static_cast<std::size_t>(in.n_classes);
  return std::make_shared<GaussianNb>(
      vector_from_json<double>(in.params.at("log_prior"), k),
      vector_from_json<double>(in.params.at("mean"), k * in.n_features),
      vector_from_json<double>(in.params.at("variance"), k * in.n_features), in.n_features);
}

}  // namespace triage::detail
