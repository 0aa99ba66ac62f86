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

#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "triage/classifiers.hpp"
#include "triage/error.hpp"

namespace triage::detail {

class ModelImpl {
 public:
  virtual ~ModelImpl() = default;
  virtual std::vector<double> predict_proba(const SparseVector& x) const = 0;
  virtual nlohmann::json params_json() const = 0;
};

using ModelPtr = std::shared_ptr<const ModelImpl>;

struct FitInput {
  const ClassifierSpec& spec;
  const FeatureMatrix& x;
  std::span<const int> y;
  int n_classes;
  FitTrace* trace;
};

ModelPtr fit_multinomial_nb(const FitInput& in);
ModelPtr fit_gaussian_nb(const FitInput& in);
ModelPtr fit_decision_tree(const FitInput& in);
ModelPtr fit_random_forest(const FitInput& in);
ModelPtr fit_gradient_boosting(const FitInput& in);
ModelPtr fit_linear_svm(const FitInput& in);
ModelPtr fit_rbf_svm(const FitInput& in);
ModelPtr fit_logistic_regression(const FitInput& in);
ModelPtr fit_mlp(const FitInput& in);

struct LoadInput {
  const nlohmann::json& params;
  int n_classes;
  std::size_t n_features;
};

ModelPtr load_multinomial_nb(const LoadInput& in);
ModelPtr load_gaussian_nb(const LoadInput& in);
ModelPtr load_decision_tree(const LoadInput& in);
ModelPtr load_random_forest(const LoadInput& in);
ModelPtr load_gradient_boosting(const LoadInput& in);
ModelPtr load_linear_svm(const LoadInput& in);
ModelPtr load_rbf_svm(const LoadInput& in);
ModelPtr load_logistic_regression(const LoadInput& in);
ModelPtr load_mlp(const LoadInput& in);

// JSON helpers shared by the model files.
nlohmann::json sparse_to_json(const SparseVector& v);
SparseVector sparse_from_json(const nlohmann::json& j, std::size_t dim);

template <typename T>
std::vector<T> vector_from_json(const nlohmann::json& j, std::size_t expected_size) {
  auto v = j.get<std::vector<T>>();
  if (v.size() != expected_size) throw DataError("model parameter has wrong length");
  return v;
}

inline std::size_t as_count(double v) {
  return static_cast<std::size_t>(v);
}

}  // namespace triage::detail
