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

#include "triage/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "triage/error.hpp"

namespace triage {

SparseVector::SparseVector(std::size_t dim, std::vector<std::pair<std::uint32_t, double>> entries)
    : dim_(dim) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  indices_.reserve(entries.size());
  values_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto [col, v] = entries[i];
    if (col >= dim) throw std::out_of_range("sparse column id exceeds dimension");
    if (i > 0 && entries[i - 1].first == col) {
      throw std::invalid_argument("duplicate sparse column id");
    }
    if (v == 0.0) continue;
    indices_.push_back(col);
    values_.push_back(v);
  }
}

SparseVector SparseVector::from_dense(std::span<const double> values) {
  SparseVector out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) {
      out.indices_.push_back(static_cast<std::uint32_t>(i));
      out.values_.push_back(values[i]);
    }
  }
  return out;
}

double SparseVector::at(std::uint32_t col) const {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), col);
  if (it == indices_.end() || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - indices_.begin())];
}

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

double SparseVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (std::size_t k = 0; k < indices_.size(); ++k) s += values_[k] * dense[indices_[k]];
  return s;
}

std::vector<double> SparseVector::to_dense() const {
  std::vector<double> out(dim_, 0.0);
  for (std::size_t k = 0; k < indices_.size(); ++k) out[indices_[k]] = values_[k];
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::uint32_t> doc_freq,
                       std::uint32_t n_docs)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), n_docs_(n_docs) {
  if (terms_.size() != doc_freq_.size()) {
    throw DataError("vocabulary terms and document frequencies differ in length");
  }
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (doc_freq_[i] < 1 || doc_freq_[i] > n_docs_) {
      throw DataError("document frequency of '" + terms_[i] + "' out of range");
    }
    if (!index_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second) {
      throw DataError("duplicate vocabulary term '" + terms_[i] + "'");
    }
  }
}

std::optional<std::uint32_t> Vocabulary::column(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::doc_freq(std::string_view term) const {
  auto col = column(term);
  if (!col) throw std::out_of_range("term '" + std::string(term) + "' is not indexed");
  return doc_freq_[*col];
}

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, std::uint32_t min_df) {
  if (docs.empty()) throw std::invalid_argument("cannot build a vocabulary from no documents");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::uint32_t> df;
  for (const auto& doc : docs) {
    std::vector<std::string_view> seen;
    for (const auto& t : doc) {
      if (std::find(seen.begin(), seen.end(), t) != seen.end()) continue;
      seen.push_back(t);
      auto [it, inserted] = df.emplace(t, 0);
      if (inserted) order.push_back(t);
      ++it->second;
    }
  }
  std::vector<std::string> terms;
  std::vector<std::uint32_t> freqs;
  for (auto& t : order) {
    const auto f = df[t];
    if (f >= min_df) {
      terms.push_back(std::move(t));
      freqs.push_back(f);
    }
  }
  return Vocabulary(std::move(terms), std::move(freqs), static_cast<std::uint32_t>(docs.size()));
}

namespace {

double idf_value(std::uint32_t n_docs, std::uint32_t df) {
  return std::log((1.0 + n_docs) / (1.0 + df)) + 1.0;
}

}  // namespace

double idf(std::string_view term, const Vocabulary& vocab) {
  return idf_value(vocab.n_docs(), vocab.doc_freq(term));
}

SparseVector tfidf_vector(const TokenList& doc, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : doc) {
    if (auto col = vocab.column(t)) counts[*col] += 1.0;
  }
  std::vector<std::pair<std::uint32_t, double>> entries;
  entries.reserve(counts.size());
  double sq = 0.0;
  for (const auto& [col, count] : counts) {
    const double w = count * idf_value(vocab.n_docs(), vocab.doc_freqs()[col]);
    entries.emplace_back(col, w);
    sq += w * w;
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& e : entries) e.second *= inv;
  }
  return SparseVector(vocab.size(), std::move(entries));
}

TokenList TfidfPipeline::preprocess(std::string_view text) const {
  return run_pipeline(text, config, lexicon);
}

SparseVector TfidfPipeline::transform(std::string_view text) const {
  return tfidf_vector(preprocess(text), vocabulary);
}

FeatureMatrix TfidfPipeline::transform(const Dataset& dataset) const {
  FeatureMatrix m;
  m.dim = vocabulary.size();
  m.rows.reserve(dataset.size());
  for (const auto& r : dataset.examples()) m.rows.push_back(transform(r.text));
  return m;
}

std::pair<FeatureMatrix, TfidfPipeline> vectorize_dataset(const Dataset& dataset,
                                                          const PipelineConfig& config,
                                                          const Lexicon& lexicon) {
  if (dataset.empty()) throw DataError("cannot vectorize an empty dataset");
  config.validate();
  std::vector<TokenList> raw;
  raw.reserve(dataset.size());
  for (const auto& r : dataset.examples()) raw.push_back(tokenize(r.text));

  TfidfPipeline pipeline{config, lexicon.with_corpus_counts(raw), {}};
  std::vector<TokenList> docs;
  docs.reserve(dataset.size());
  for (const auto& r : dataset.examples()) docs.push_back(pipeline.preprocess(r.text));
  pipeline.vocabulary = build_vocabulary(docs);

  FeatureMatrix m;
  m.dim = pipeline.vocabulary.size();
  m.rows.reserve(docs.size());
  for (const auto& doc : docs) m.rows.push_back(tfidf_vector(doc, pipeline.vocabulary));
  return {std::move(m), std::move(pipeline)};
}

void write_vocabulary_tsv(std::ostream& out, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab.terms()[i] << '\t' << i << '\t' << vocab.doc_freqs()[i] << '\n';
  }
}

}  // namespace triage
