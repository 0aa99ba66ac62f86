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

// On-disk model bundles: a fitted text pipeline plus classifier, or an FSBM
// model, with the stage they were trained for.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "triage/classifiers.hpp"
#include "triage/corpus.hpp"
#include "triage/features.hpp"
#include "triage/fewshot.hpp"

namespace triage {

nlohmann::json pipeline_to_json(const TfidfPipeline& pipeline);
TfidfPipeline pipeline_from_json(const nlohmann::json& j);

class ModelBundle {
 public:
  ModelBundle(Stage stage, TfidfPipeline pipeline, TrainedModel classifier);
  ModelBundle(Stage stage, FsbmModel fsbm);

  Stage stage() const { return stage_; }
  /// Machine key of the classifier, or "fsbm".
  std::string key() const;

  std::vector<double> predict_proba(const std::string& text) const;
  int predict(const std::string& text) const;

  nlohmann::json to_json() const;
  /// Throws DataError on a malformed or mismatched bundle.
  static ModelBundle from_json(const nlohmann::json& j);

  void save(const std::filesystem::path& path) const;
  static ModelBundle load(const std::filesystem::path& path);

 private:
  Stage stage_;
  std::optional<TfidfPipeline> pipeline_;
  std::optional<TrainedModel> classifier_;
  std::optional<FsbmModel> fsbm_;
};

}  // namespace triage
