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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace triage {

/// A token is a non-empty lowercase string of letters, digits, '#' and '/'.
/// Bytes >= 0x80 (UTF-8 continuation/lead bytes) count as letters.
using Token = std::string;
using TokenList = std::vector<Token>;

bool is_valid_token(std::string_view s);

/// Stopwords, lemma dictionary and a frequency-annotated vocabulary for
/// spelling correction.
class Lexicon {
 public:
  Lexicon() = default;
  /// Throws std::invalid_argument if the stopword set contains a negation or
  /// a lemma is not a valid token.
  Lexicon(std::set<std::string> stopwords, std::map<std::string, std::string> lemma_map,
          std::map<std::string, std::uint64_t> vocabulary);

  /// The shipped English stoplist (negations excluded), the irregular-form
  /// lemma dictionary and the dental-term vocabulary.
  static Lexicon defaults();

  const std::set<std::string>& stopwords() const { return stopwords_; }
  const std::map<std::string, std::string>& lemma_map() const { return lemma_map_; }
  const std::map<std::string, std::uint64_t>& vocabulary() const { return vocabulary_; }

  bool is_stopword(std::string_view t) const;
  bool in_vocabulary(std::string_view t) const;
  std::uint64_t frequency(std::string_view t) const;

  /// Copy with term counts from `docs` added to the vocabulary.
  Lexicon with_corpus_counts(const std::vector<TokenList>& docs) const;

 private:
  std::set<std::string> stopwords_;
  std::map<std::string, std::string> lemma_map_;
  std::map<std::string, std::uint64_t> vocabulary_;
};

/// Terms that are never removed as stopwords.
const std::set<std::string>& negation_terms();

struct PipelineConfig {
  bool enable_stopwords = true;
  bool enable_lemmatize = true;
  bool enable_spellcheck = true;
  int max_edit_distance = 2;

  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

TokenList tokenize(std::string_view text);
TokenList remove_stopwords(const TokenList& tokens, const Lexicon& lexicon);
TokenList lemmatize(const TokenList& tokens, const Lexicon& lexicon);
TokenList correct_spelling(const TokenList& tokens, const Lexicon& lexicon, int max_edit_distance);

/// tokenize -> spellcheck -> stopwords -> lemmatize, each gated by config.
TokenList run_pipeline(std::string_view text, const PipelineConfig& config, const Lexicon& lexicon);

/// Plain Levenshtein distance.
std::size_t levenshtein(std::string_view a, std::string_view b);

// Lexicon files: one stopword per line; `surface<TAB>lemma`; `term<TAB>count`.
std::set<std::string> load_stopword_file(const std::filesystem::path& path);
std::map<std::string, std::string> load_lemma_file(const std::filesystem::path& path);
std::map<std::string, std::uint64_t> load_vocabulary_file(const std::filesystem::path& path);
void save_lexicon_files(const Lexicon& lexicon, const std::filesystem::path& stopwords,
                        const std::filesystem::path& lemmas,
                        const std::filesystem::path& vocabulary);

}  // namespace triage
