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

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace triage {

/// Label stage. Stage1 is the four-level severity task; Stage2 collapses
/// severities {1,2} into class 0 and {3,4} into class 1.
enum class Stage { Stage1, Stage2 };

enum class Provenance { Original, Oversampled, Synthetic };

enum class CorpusFormat { Csv, Jsonl };

std::string_view to_string(Stage stage);
std::string_view to_string(Provenance provenance);

/// Number of class indices used by a stage (4 or 2).
int num_classes(Stage stage);

/// Human-readable description of a stage class index.
std::string_view class_description(Stage stage, int index);

/// Four-level severity: 1 urgent, 2 delayable treatment, 3 optional
/// treatment, 4 no problem.
class SeverityClass {
 public:
  explicit SeverityClass(int value);

  static bool valid(int value) { return value >= 1 && value <= 4; }

  int value() const { return value_; }

  /// 0-based class index of this severity within `stage`.
  int index(Stage stage) const;

  friend bool operator==(SeverityClass, SeverityClass) = default;

 private:
  int value_;
};

struct Report {
  std::string id;
  std::string text;
  SeverityClass severity;
};

/// Ordered, immutable collection of reports with unique ids.
class Dataset {
 public:
  Dataset() = default;
  /// Throws DataError on duplicate ids or blank text.
  Dataset(std::vector<Report> examples, Stage stage, Provenance provenance);

  const std::vector<Report>& examples() const { return examples_; }
  const Report& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }

  Stage stage() const { return stage_; }
  Provenance provenance() const { return provenance_; }
  int num_classes() const { return triage::num_classes(stage_); }

  /// Stage class index of example i.
  int label(std::size_t i) const { return examples_[i].severity.index(stage_); }
  std::vector<int> labels() const;
  std::vector<std::string> texts() const;

 private:
  std::vector<Report> examples_;
  Stage stage_ = Stage::Stage1;
  Provenance provenance_ = Provenance::Original;
};

struct ClassDistribution {
  std::vector<std::size_t> counts;

  std::size_t total() const;
  friend bool operator==(const ClassDistribution&, const ClassDistribution&) = default;
};

Dataset load_corpus(const std::filesystem::path& path, CorpusFormat format);
Dataset parse_corpus(std::istream& in, CorpusFormat format);
void write_corpus(std::ostream& out, const Dataset& dataset, CorpusFormat format);

/// Guesses the format from the file extension (.jsonl/.json -> JSONL).
CorpusFormat format_from_path(const std::filesystem::path& path);

Dataset map_to_stage2(const Dataset& dataset);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

/// Per-class test size max(1, floor(n_c * (1 - train_fraction))).
std::size_t stratified_test_count(std::size_t class_size, double train_fraction);

TrainTestSplit stratified_split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

/// Duplicates minority-class examples uniformly with replacement until
/// every class matches the majority count. Duplicates get `#dupN` ids.
Dataset random_oversample(const Dataset& dataset, std::uint64_t seed);

ClassDistribution class_distribution(const Dataset& dataset);

/// Original id of a possibly duplicated example (strips `#dupN`).
std::string_view base_id(std::string_view id);

struct SyntheticOptions {
  /// Probability that a finding sentence comes from the report's own class
  /// lexicon. 1.0 yields a keyword-separable corpus.
  double purity = 1.0;
  /// Of the off-class sentences, the share drawn from the class that shares
  /// the report's stage-2 group (1<->2, 3<->4).
  double partner_share = 0.75;
  int min_findings = 2;
  int max_findings = 3;
  /// Probability of prepending a class-neutral preamble sentence.
  double preamble_rate = 0.6;
};

/// Generates reports from fixed per-class phrase lexicons. `counts` are the
/// per-severity sizes (severity 1..4).
Dataset generate_synthetic_corpus(std::uint64_t seed, const std::array<std::size_t, 4>& counts,
                                  const SyntheticOptions& options = {});

}  // namespace triage
