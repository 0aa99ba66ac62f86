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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "triage/classifiers.hpp"
#include "triage/corpus.hpp"
#include "triage/fewshot.hpp"
#include "triage/llm_icl.hpp"
#include "triage/preprocess.hpp"

namespace triage {

/// Prediction value for an unusable LLM answer; always scored as wrong.
inline constexpr int kParseFailure = -1;

/// counts[t][p], row = true class, column = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n_classes);

  int n_classes() const { return n_classes_; }
  std::uint64_t at(int truth, int predicted) const;
  /// kParseFailure lands in column (truth + 1) mod n.
  void add(int truth, int predicted);
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(int c) const;
  std::uint64_t col_sum(int c) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int n_classes_;
  std::vector<std::uint64_t> counts_;
};

/// Throws std::invalid_argument on length mismatch or out-of-range labels.
ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 int n_classes);

enum class Averaging { Weighted };

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Per-class scores weighted by true-class support. Precision of a class
/// never predicted is 0; F1 is 0 when precision and recall are both 0.
/// Throws std::invalid_argument on an empty matrix.
MetricsReport compute_metrics(const ConfusionMatrix& cm, Averaging averaging = Averaging::Weighted);

enum class Balancing { Imbalanced, Balanced };

std::string_view to_string(Balancing balancing);
Balancing balancing_from_string(std::string_view s);

struct LlmVariant {
  PromptStyle style = PromptStyle::Simple;
  bool few_shot = true;

  std::string key() const;
  std::string display_name() const;
};

struct BenchmarkGrid {
  std::vector<Stage> stages{Stage::Stage1, Stage::Stage2};
  std::vector<Balancing> balancings{Balancing::Imbalanced, Balancing::Balanced};
  /// Seeds are replaced by the per-cell seed.
  std::vector<ClassifierSpec> classifiers = default_classifier_grid();
  bool include_fsbm = true;
  FsbmConfig fsbm;
  ProviderPtr fsbm_provider;  // null: hashed_embedder(128, 0)
  /// LLM cells run only when set.
  std::optional<ChatClientConfig> llm;
  std::vector<LlmVariant> llm_variants{{PromptStyle::Simple, true},
                                       {PromptStyle::Complicated, true}};
  double train_fraction = 0.8;
  PipelineConfig pipeline;
  Lexicon lexicon = Lexicon::defaults();
  /// Cell keys to run ("fsbm", "linear-svm", "llm-simple", ...); empty = all.
  std::vector<std::string> only;

  static std::vector<ClassifierSpec> default_classifier_grid();
  /// Keys in grid order for one (stage, balancing) block.
  std::vector<std::string> cell_keys() const;
  bool selected(const std::string& key) const;
  nlohmann::json to_json() const;
};

struct BenchmarkCell {
  Stage stage = Stage::Stage1;
  Balancing balancing = Balancing::Imbalanced;
  std::string key;           // machine key, e.g. "random-forest"
  std::string display_name;  // report row label
  MetricsReport metrics;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;
  std::optional<std::string> error;
  ClassDistribution train_distribution;
  ClassDistribution test_distribution;
  std::size_t parse_failures = 0;
  std::size_t transport_failures = 0;
};

/// hash(base_seed, stage, balancing, key).
std::uint64_t cell_seed(std::uint64_t base_seed, Stage stage, Balancing balancing,
                        std::string_view key);

struct CellData {
  Dataset train;
  Dataset test;
};

/// Stage mapping, stratified split (seed depends on base_seed and stage
/// only, so both balancings share the test set), then train-only
/// oversampling for Balanced.
CellData prepare_cell_data(const Dataset& corpus, Stage stage, Balancing balancing,
                           double train_fraction, std::uint64_t base_seed);

/// Cells in grid order: stage, balancing, then classifiers, LLM variants,
/// FSBM. A failing cell is kept with its error set.
std::vector<BenchmarkCell> run_benchmark(
    const Dataset& corpus, const BenchmarkGrid& grid, std::uint64_t base_seed,
    const std::function<void(const BenchmarkCell&)>& progress = {});

enum class ReportFormat { Markdown, Csv };

/// Markdown: one table per (stage, balancing) present, columns Classifier,
/// Accuracy, Precision, Recall, F-measure at 3 decimals. CSV: one row per
/// cell with a header. Empty input yields headers only.
std::string emit_report(const std::vector<BenchmarkCell>& cells, ReportFormat format);

struct ReportRow {
  std::string stage;
  std::string balancing;
  std::string classifier;
  MetricsReport metrics;
  std::string error;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Reads emit_report CSV back. Throws DataError on malformed input.
std::vector<ReportRow> parse_report_csv(std::string_view csv);

/// Writes results_stage{1,2}_{balanced,imbalanced}.{md,csv} for every
/// block present, plus benchmark.json (cells, seeds, config) and
/// timings.json (runtimes). Returns the files written.
std::vector<std::filesystem::path> write_benchmark_outputs(const std::vector<BenchmarkCell>& cells,
                                                           const BenchmarkGrid& grid,
                                                           std::uint64_t base_seed,
                                                           const std::filesystem::path& out_dir);

nlohmann::json cell_to_json(const BenchmarkCell& cell);
BenchmarkCell cell_from_json(const nlohmann::json& j);

}  // namespace triage
