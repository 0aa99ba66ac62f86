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

#include "triage/preprocess.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "triage/error.hpp"

namespace triage {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_token_byte(unsigned char c) {
  return is_word_byte(c) || c == '#' || c == '/';
}

bool has_word_byte(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return is_word_byte(c); });
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

bool is_valid_token(std::string_view s) {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (!is_token_byte(c)) return false;
    if (c >= 'A' && c <= 'Z') return false;
  }
  return true;
}

const std::set<std::string>& negation_terms() {
  static const std::set<std::string> kNegations = {"no",    "not", "without", "cannot",
                                                   "can't", "non", "nor",     "never"};
  return kNegations;
}

Lexicon::Lexicon(std::set<std::string> stopwords, std::map<std::string, std::string> lemma_map,
                 std::map<std::string, std::uint64_t> vocabulary)
    : stopwords_(std::move(stopwords)),
      lemma_map_(std::move(lemma_map)),
      vocabulary_(std::move(vocabulary)) {
  for (const auto& neg : negation_terms()) {
    if (stopwords_.count(neg)) {
      throw std::invalid_argument("stopword list must not contain negation '" + neg + "'");
    }
  }
  for (const auto& [surface, lemma] : lemma_map_) {
    if (!is_valid_token(lemma)) {
      throw std::invalid_argument("lemma '" + lemma + "' for '" + surface +
                                  "' is not a valid token");
    }
  }
}

bool Lexicon::is_stopword(std::string_view t) const {
  return stopwords_.find(std::string(t)) != stopwords_.end();
}

bool Lexicon::in_vocabulary(std::string_view t) const {
  return vocabulary_.find(std::string(t)) != vocabulary_.end();
}

std::uint64_t Lexicon::frequency(std::string_view t) const {
  auto it = vocabulary_.find(std::string(t));
  return it == vocabulary_.end() ? 0 : it->second;
}

Lexicon Lexicon::with_corpus_counts(const std::vector<TokenList>& docs) const {
  Lexicon out = *this;
  for (const auto& doc : docs) {
    for (const auto& t : doc) ++out.vocabulary_[t];
  }
  return out;
}

Lexicon Lexicon::defaults() {
  // English function words, minus negations.
  std::set<std::string> stop = {
      "a",      "about",    "above",      "after", "again",   "against", "all",   "am",
      "an",     "and",      "any",        "are",   "as",      "at",      "be",    "because",
      "been",   "before",   "being",      "below", "between", "both",    "but",   "by",
      "can",    "could",    "did",        "do",    "does",    "doing",   "down",  "during",
      "each",   "few",      "for",        "from",  "further", "had",     "has",   "have",
      "having", "he",       "her",        "here",  "hers",    "herself", "him",   "himself",
      "his",    "how",      "i",          "if",    "in",      "into",    "is",    "it",
      "its",    "itself",   "just",       "me",    "more",    "most",    "my",    "myself",
      "now",    "of",       "off",        "on",    "once",    "only",    "or",    "other",
      "our",    "ours",     "ourselves",  "out",   "over",    "own",     "same",  "she",
      "should", "so",       "some",       "such",  "than",    "that",    "the",   "their",
      "theirs", "them",     "themselves", "then",  "there",   "these",   "they",  "this",
      "those",  "through",  "to",         "too",   "under",   "until",   "up",    "very",
      "was",    "we",       "were",       "what",  "when",    "where",   "which", "while",
      "who",    "whom",     "why",        "will",  "with",    "would",   "you",   "your",
      "yours",  "yourself", "yourselves", "s",     "t",       "also",
  };
  std::map<std::string, std::string> lemmas = {
      {"cortices", "cortex"},
      {"teeth", "tooth"},
      {"apices", "apex"},
      {"foramina", "foramen"},
      {"maxillae", "maxilla"},
      {"diagnoses", "diagnosis"},
      {"sinuses", "sinus"},
      {"radii", "radius"},
      {"was", "be"},
      {"were", "be"},
      {"is", "be"},
      {"are", "be"},
      {"seen", "see"},
      {"found", "find"},
      {"caused", "cause"},
      {"positioned", "position"},
  };
  // Domain terms with nominal frequencies; corpus counts are merged at fit time.
  std::map<std::string, std::uint64_t> vocab;
  for (const char* term : {"lesion",
                           "tooth",
                           "root",
                           "cortex",
                           "buccal",
                           "lingual",
                           "palatal",
                           "maxilla",
                           "mandible",
                           "canal",
                           "resorption",
                           "erosive",
                           "detected",
                           "detect",
                           "continuity",
                           "alveolar",
                           "crest",
                           "osteomyelitis",
                           "fibro",
                           "osseous",
                           "sarcomatosis",
                           "chondrosarcoma",
                           "tumor",
                           "mesiodens",
                           "supernumerary",
                           "missing",
                           "inverted",
                           "invertedly",
                           "impacted",
                           "impaction",
                           "periapical",
                           "radiolucency",
                           "radiolucent",
                           "incisive",
                           "blunting",
                           "sinus",
                           "mucosa",
                           "normal",
                           "intact",
                           "abnormality",
                           "pathology",
                           "pathologic",
                           "fracture",
                           "trabecular",
                           "bone",
                           "jaw",
                           "anterior",
                           "posterior",
                           "border",
                           "mixed",
                           "infected",
                           "surgery",
                           "healing",
                           "destruction",
                           "perforation",
                           "cortical",
                           "malignant",
                           "aggressive",
                           "periosteal",
                           "follicular",
                           "osteosclerosis",
                           "apex",
                           "position",
                           "positioned",
                           "attached",
                           "association",
                           "contact",
                           "middle",
                           "adjacent",
                           "retained",
                           "observed",
                           "seen",
                           "found",
                           "cbct",
                           "image",
                           "patient",
                           "report",
                           "mandibular",
                           "maxillary",
                           "nasal",
                           "floor",
                           "height",
                           "sign",
                           "no",
                           "not",
                           "without"}) {
    vocab[term] = 1;
  }
  return Lexicon(std::move(stop), std::move(lemmas), std::move(vocab));
}

void PipelineConfig::validate() const {
  if (max_edit_distance != 1 && max_edit_distance != 2) {
    throw std::invalid_argument("max_edit_distance must be 1 or 2");
  }
}

TokenList tokenize(std::string_view text) {
  TokenList raw;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_token_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::string tok;
    while (j < text.size() && is_token_byte(static_cast<unsigned char>(text[j]))) {
      char c = text[j];
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      tok.push_back(c);
      ++j;
    }
    raw.push_back(std::move(tok));
    i = j;
  }

  TokenList out;
  out.reserve(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const auto& t = raw[k];
    if (t == "#" && k + 1 < raw.size() && all_digits(raw[k + 1])) {
      out.push_back("#" + raw[k + 1]);
      ++k;
      continue;
    }
    // Runs made only of '#' and '/' carry nothing.
    if (!has_word_byte(t)) continue;
    out.push_back(t);
  }
  return out;
}

TokenList remove_stopwords(const TokenList& tokens, const Lexicon& lexicon) {
  TokenList out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (negation_terms().count(t) || !lexicon.is_stopword(t)) out.push_back(t);
  }
  return out;
}

namespace {

std::string lemma_of(const std::string& t, const Lexicon& lexicon) {
  if (auto it = lexicon.lemma_map().find(t); it != lexicon.lemma_map().end()) {
    return it->second;
  }
  if (has_digit(t) || t.find_first_of("#/") != std::string::npos) return t;
  if (t.size() > 4 && ends_with(t, "ies")) return t.substr(0, t.size() - 3) + "y";
  if (ends_with(t, "sses")) return t.substr(0, t.size() - 2);
  if (t.size() > 4 && ends_with(t, "ing")) {
    const std::string stem = t.substr(0, t.size() - 3);
    if (lexicon.in_vocabulary(stem)) return stem;
    if (lexicon.in_vocabulary(stem + "e")) return stem + "e";
    return t;
  }
  if (t.size() > 3 && ends_with(t, "ed")) {
    const std::string stem = t.substr(0, t.size() - 2);
    if (lexicon.in_vocabulary(stem)) return stem;
    if (lexicon.in_vocabulary(stem + "e")) return stem + "e";
    return t;
  }
  if (t.size() > 3 && ends_with(t, "s") && !ends_with(t, "ss")) {
    const std::string stem = t.substr(0, t.size() - 1);
    if (lexicon.in_vocabulary(stem)) return stem;
  }
  return t;
}

}  // namespace

TokenList lemmatize(const TokenList& tokens, const Lexicon& lexicon) {
  TokenList out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lemma_of(t, lexicon));
  return out;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

// Banded Levenshtein returning limit + 1 once the distance must exceed limit.
std::size_t bounded_levenshtein(std::string_view a, std::string_view b, std::size_t limit) {
  const std::size_t la = a.size(), lb = b.size();
  if ((la > lb ? la - lb : lb - la) > limit) return limit + 1;
  const std::size_t inf = limit + 1;
  std::vector<std::size_t> prev(lb + 1), cur(lb + 1);
  for (std::size_t j = 0; j <= lb; ++j) prev[j] = std::min(j, inf);
  for (std::size_t i = 1; i <= la; ++i) {
    cur[0] = std::min(i, inf);
    std::size_t row_min = cur[0];
    for (std::size_t j = 1; j <= lb; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub, inf});
      row_min = std::min(row_min, cur[j]);
    }
    if (row_min > limit) return inf;
    std::swap(prev, cur);
  }
  return prev[lb];
}

// Tokens with digits, '#', '/' or fewer than four characters are identifiers
// or abbreviations and are never rewritten.
bool correctable(const std::string& t) {
  return t.size() >= 4 && !has_digit(t) && t.find_first_of("#/") == std::string::npos;
}

}  // namespace

TokenList correct_spelling(const TokenList& tokens, const Lexicon& lexicon, int max_edit_distance) {
  if (max_edit_distance != 1 && max_edit_distance != 2) {
    throw std::invalid_argument("max_edit_distance must be 1 or 2");
  }
  const auto limit = static_cast<std::size_t>(max_edit_distance);
  TokenList out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (lexicon.in_vocabulary(t) || !correctable(t)) {
      out.push_back(t);
      continue;
    }
    const std::string* best = nullptr;
    std::size_t best_dist = limit + 1;
    std::uint64_t best_freq = 0;
    // Vocabulary iterates in lexicographic order, so on equal distance and
    // frequency the first candidate seen wins.
    for (const auto& [term, freq] : lexicon.vocabulary()) {
      const std::size_t d = bounded_levenshtein(t, term, limit);
      if (d > limit) continue;
      if (d < best_dist || (d == best_dist && freq > best_freq)) {
        best = &term;
        best_dist = d;
        best_freq = freq;
      }
    }
    out.push_back(best ? *best : t);
  }
  return out;
}

TokenList run_pipeline(std::string_view text, const PipelineConfig& config,
                       const Lexicon& lexicon) {
  TokenList tokens = tokenize(text);
  if (config.enable_spellcheck) {
    tokens = correct_spelling(tokens, lexicon, config.max_edit_distance);
  }
  if (config.enable_stopwords) tokens = remove_stopwords(tokens, lexicon);
  if (config.enable_lemmatize) tokens = lemmatize(tokens, lexicon);
  return tokens;
}

// ---------------------------------------------------------------------------
// Lexicon files

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::set<std::string> load_stopword_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) out.insert(line);
  }
  return out;
}

std::map<std::string, std::string> load_lemma_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("expected surface<TAB>lemma", lineno);
    out[trim(line.substr(0, tab))] = trim(line.substr(tab + 1));
  }
  return out;
}

std::map<std::string, std::uint64_t> load_vocabulary_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::map<std::string, std::uint64_t> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("expected term<TAB>count", lineno);
    const std::string count = trim(line.substr(tab + 1));
    if (!all_digits(count)) throw DataError("count must be a non-negative integer", lineno);
    out[trim(line.substr(0, tab))] = std::stoull(count);
  }
  return out;
}

void save_lexicon_files(const Lexicon& lexicon, const std::filesystem::path& stopwords,
                        const std::filesystem::path& lemmas,
                        const std::filesystem::path& vocabulary) {
  std::ofstream s(stopwords), l(lemmas), v(vocabulary);
  if (!s || !l || !v) throw std::runtime_error("cannot write lexicon files");
  for (const auto& w : lexicon.stopwords()) s << w << '\n';
  for (const auto& [k, m] : lexicon.lemma_map()) l << k << '\t' << m << '\n';
  for (const auto& [k, c] : lexicon.vocabulary()) v << k << '\t' << c << '\n';
}

}  // namespace triage
