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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "triage/corpus.hpp"
#include "triage/preprocess.hpp"

namespace triage {

/// Sparse row with strictly increasing column ids and no stored zeros.
class SparseVector {
 public:
  SparseVector() = default;
  explicit SparseVector(std::size_t dim) : dim_(dim) {}
  /// Entries need not be sorted; zeros are dropped, duplicate ids throw.
  SparseVector(std::size_t dim, std::vector<std::pair<std::uint32_t, double>> entries);

  static SparseVector from_dense(std::span<const double> values);

  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return indices_.size(); }
  std::span<const std::uint32_t> indices() const { return indices_; }
  std::span<const double> values() const { return values_; }

  /// Value at column `col` (0 when absent).
  double at(std::uint32_t col) const;
  double norm() const;
  double dot(std::span<const double> dense) const;
  std::vector<double> to_dense() const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

/// Row-major collection of equal-dimension sparse rows.
struct FeatureMatrix {
  std::vector<SparseVector> rows;
  std::size_t dim = 0;

  std::size_t size() const { return rows.size(); }
};

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Terms in column order; doc_freq aligned with terms.
  Vocabulary(std::vector<std::string> terms, std::vector<std::uint32_t> doc_freq,
             std::uint32_t n_docs);

  std::size_t size() const { return terms_.size(); }
  std::uint32_t n_docs() const { return n_docs_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::uint32_t>& doc_freqs() const { return doc_freq_; }

  std::optional<std::uint32_t> column(std::string_view term) const;
  /// Throws std::out_of_range for unindexed terms.
  std::uint32_t doc_freq(std::string_view term) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.terms_ == b.terms_ && a.doc_freq_ == b.doc_freq_ && a.n_docs_ == b.n_docs_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::uint32_t> doc_freq_;
  std::uint32_t n_docs_ = 0;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Terms with document frequency >= min_df, columns in first-appearance order.
Vocabulary build_vocabulary(const std::vector<TokenList>& docs, std::uint32_t min_df = 1);

/// Smoothed inverse document frequency ln((1 + n) / (1 + df)) + 1.
double idf(std::string_view term, const Vocabulary& vocab);

/// Raw-count tf times idf, L2-normalised unless all-zero. Unknown tokens are
/// ignored.
SparseVector tfidf_vector(const TokenList& doc, const Vocabulary& vocab);

/// Text-to-features transform fitted on a training set: preprocessing
/// settings, the lexicon (with training counts merged) and the vocabulary.
struct TfidfPipeline {
  PipelineConfig config;
  Lexicon lexicon;
  Vocabulary vocabulary;

  TokenList preprocess(std::string_view text) const;
  SparseVector transform(std::string_view text) const;
  FeatureMatrix transform(const Dataset& dataset) const;
};

/// Preprocesses every report, builds the vocabulary on them and returns one
/// vector per report in dataset order plus the fitted pipeline.
std::pair<FeatureMatrix, TfidfPipeline> vectorize_dataset(const Dataset& dataset,
                                                          const PipelineConfig& config,
                                                          const Lexicon& lexicon);

/// TSV dump `term<TAB>column<TAB>doc_freq`.
void write_vocabulary_tsv(std::ostream& out, const Vocabulary& vocab);

}  // namespace triage
