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

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "triage/cli.hpp"
#include "triage/error.hpp"

namespace triage {

namespace {

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  for (char c : value + ",") {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!item.empty()) out.push_back(std::move(item));
      item.clear();
    } else {
      item += c;
    }
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": integer out of range '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  const auto u = parse_u64(key, v);
  if (u > 1'000'000'000ULL) throw ConfigError(key + ": value too large '" + v + "'");
  return static_cast<int>(u);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(d)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return d;
}

std::string bool_str(bool b) {
  return b ? "true" : "false";
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  bool quoted = false;
};

#define TRIAGE_STRING(KEY, MEMBER)                                     \
  Field {                                                              \
    KEY, [](const RunConfig& c) { return c.MEMBER; },                  \
        [](RunConfig& c, const std::string& v) { c.MEMBER = v; }, true \
  }
#define TRIAGE_BOOL(KEY, MEMBER)                                                  \
  Field {                                                                         \
    KEY, [](const RunConfig& c) { return bool_str(c.MEMBER); },                   \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); } \
  }
#define TRIAGE_DOUBLE(KEY, MEMBER)                                                  \
  Field {                                                                           \
    KEY, [](const RunConfig& c) { return format_double(c.MEMBER); },                \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); } \
  }
#define TRIAGE_UINT(KEY, MEMBER, TYPE)                                \
  Field {                                                             \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); }, \
        [](RunConfig& c, const std::string& v) {                      \
          c.MEMBER = static_cast<TYPE>(parse_u64(KEY, v));            \
        }                                                             \
  }
#define TRIAGE_INT(KEY, MEMBER)                                                  \
  Field {                                                                        \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },            \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_int(KEY, v); } \
  }
#define TRIAGE_LIST(KEY, MEMBER)                                             \
  Field {                                                                    \
    KEY, [](const RunConfig& c) { return join_list(c.MEMBER); },             \
        [](RunConfig& c, const std::string& v) { c.MEMBER = split_list(v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      TRIAGE_UINT("run.seed", seed, std::uint64_t),
      TRIAGE_STRING("run.out", out),

      TRIAGE_STRING("corpus.path", corpus_path),
      TRIAGE_STRING("corpus.format", corpus_format),
      TRIAGE_BOOL("corpus.synthetic", synthetic),
      {"corpus.synthetic_counts",
       [](const RunConfig& c) {
         std::vector<std::string> s;
         for (auto n : c.synthetic_counts) s.push_back(std::to_string(n));
         return join_list(s);
       },
       [](RunConfig& c, const std::string& v) {
         const auto items = split_list(v);
         if (items.size() != 4) throw ConfigError("corpus.synthetic_counts: expected 4 counts");
         for (std::size_t i = 0; i < 4; ++i) {
           c.synthetic_counts[i] = parse_u64("corpus.synthetic_counts", items[i]);
         }
       }},
      TRIAGE_DOUBLE("corpus.synthetic_purity", synthetic_purity),

      TRIAGE_BOOL("pipeline.stopwords", pipeline.enable_stopwords),
      TRIAGE_BOOL("pipeline.lemmatize", pipeline.enable_lemmatize),
      TRIAGE_BOOL("pipeline.spellcheck", pipeline.enable_spellcheck),
      TRIAGE_INT("pipeline.max_edit_distance", pipeline.max_edit_distance),

      {"benchmark.stages",
       [](const RunConfig& c) {
         std::vector<std::string> s;
         for (int n : c.stages) s.push_back(std::to_string(n));
         return join_list(s);
       },
       [](RunConfig& c, const std::string& v) {
         c.stages.clear();
         for (const auto& s : split_list(v)) c.stages.push_back(parse_int("benchmark.stages", s));
       }},
      TRIAGE_LIST("benchmark.balancings", balancings),
      TRIAGE_LIST("benchmark.classifiers", classifiers),
      TRIAGE_DOUBLE("benchmark.train_fraction", train_fraction),
      TRIAGE_BOOL("benchmark.fsbm", include_fsbm),
      TRIAGE_BOOL("benchmark.llm", llm),
      TRIAGE_LIST("benchmark.llm_styles", llm_styles),
      TRIAGE_BOOL("benchmark.llm_few_shot", llm_few_shot),
      TRIAGE_LIST("benchmark.only", only),

      TRIAGE_UINT("fsbm.per_class", fsbm.per_class, std::size_t),
      TRIAGE_UINT("fsbm.pairs_per_anchor", fsbm.pairs_per_anchor, std::size_t),
      TRIAGE_UINT("fsbm.epochs", fsbm.epochs, std::size_t),
      TRIAGE_DOUBLE("fsbm.lr", fsbm.lr),
      TRIAGE_UINT("fsbm.head_dim_out", fsbm.head_dim_out, std::size_t),

      TRIAGE_STRING("embedder.type", embedder),
      TRIAGE_UINT("embedder.dim", embedder_dim, std::size_t),
      TRIAGE_UINT("embedder.seed", embedder_seed, std::uint64_t),
      TRIAGE_STRING("embedder.endpoint", embedder_endpoint),

      TRIAGE_STRING("llm.endpoint", chat.endpoint),
      TRIAGE_STRING("llm.model", chat.model_name),
      TRIAGE_DOUBLE("llm.temperature", chat.temperature),
      TRIAGE_DOUBLE("llm.timeout_seconds", chat.timeout_seconds),
      TRIAGE_INT("llm.max_retries", chat.max_retries),
      TRIAGE_DOUBLE("llm.initial_backoff_seconds", chat.initial_backoff_seconds),
      TRIAGE_STRING("llm.api_key_env", chat.api_key_env),
      TRIAGE_STRING("llm.auth_header", chat.auth_header),
      TRIAGE_STRING("llm.auth_prefix", chat.auth_prefix),
      TRIAGE_INT("llm.max_in_flight", chat.max_in_flight),
      TRIAGE_DOUBLE("llm.requests_per_second", chat.requests_per_second),

      TRIAGE_STRING("train.algorithm", train_algorithm),
      TRIAGE_INT("train.stage", train_stage),
      TRIAGE_STRING("train.balancing", train_balancing),
  };
  return table;
}

#undef TRIAGE_STRING
#undef TRIAGE_BOOL
#undef TRIAGE_DOUBLE
#undef TRIAGE_UINT
#undef TRIAGE_INT
#undef TRIAGE_LIST

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

/// "classifier.<algo>.<param>" or "fsbm.mlp.<param>" -> (algorithm, param).
bool hyperparam_key(std::string_view key, Algorithm* algorithm, std::string* param,
                    bool* fsbm_mlp) {
  const auto last = key.rfind('.');
  if (last == std::string_view::npos) return false;
  const auto prefix = key.substr(0, last);
  *param = std::string(key.substr(last + 1));
  if (prefix == "fsbm.mlp") {
    *algorithm = Algorithm::MLP;
    *fsbm_mlp = true;
    return true;
  }
  if (prefix.substr(0, 11) != "classifier.") return false;
  try {
    *algorithm = algorithm_from_string(prefix.substr(11));
  } catch (const std::invalid_argument&) {
    throw ConfigError("unknown algorithm in config key '" + std::string(key) + "'");
  }
  *fsbm_mlp = false;
  return true;
}

std::string ini_value(const std::string& v, bool quoted) {
  if (!quoted) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\n') throw ConfigError("config strings cannot hold quotes or newlines");
    out += c;
  }
  return out + "\"";
}

}  // namespace

void RunConfig::set(std::string_view key, const std::string& value) {
  if (const Field* f = find_field(key)) {
    f->set(*this, value);
    return;
  }
  Algorithm algorithm{};
  std::string param;
  bool fsbm_mlp = false;
  if (hyperparam_key(key, &algorithm, &param, &fsbm_mlp)) {
    const auto& defaults = default_hyperparams(algorithm);
    if (!defaults.count(param)) throw ConfigError("unknown config key '" + std::string(key) + "'");
    const double v = parse_double(std::string(key), value);
    if (fsbm_mlp) {
      fsbm.mlp.hyperparams[param] = v;
    } else {
      hyperparams[std::string(to_string(algorithm))][param] = v;
    }
    return;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::get(std::string_view key) const {
  if (const Field* f = find_field(key)) return f->get(*this);
  Algorithm algorithm{};
  std::string param;
  bool fsbm_mlp = false;
  if (hyperparam_key(key, &algorithm, &param, &fsbm_mlp) &&
      default_hyperparams(algorithm).count(param)) {
    if (fsbm_mlp) return format_double(fsbm.mlp.param(param));
    const auto it = hyperparams.find(std::string(to_string(algorithm)));
    if (it != hyperparams.end() && it->second.count(param)) {
      return format_double(it->second.at(param));
    }
    return format_double(default_hyperparams(algorithm).at(param));
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  for (auto a : all_algorithms()) {
    for (const auto& [param, _] : default_hyperparams(a)) {
      out.push_back("classifier." + std::string(to_string(a)) + "." + param);
    }
  }
  for (const auto& [param, _] : default_hyperparams(Algorithm::MLP)) {
    out.push_back("fsbm.mlp." + param);
  }
  return out;
}

std::string RunConfig::to_ini() const {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << ini_value(f.get(*this), f.quoted) << '\n';
  }
  for (const auto& [algo, params] : hyperparams) {
    if (params.empty()) continue;
    out << "\n[classifier." << algo << "]\n";
    for (const auto& [p, v] : params) out << p << " = " << format_double(v) << '\n';
  }
  if (!fsbm.mlp.hyperparams.empty()) {
    out << "\n[fsbm.mlp]\n";
    for (const auto& [p, v] : fsbm.mlp.hyperparams) out << p << " = " << format_double(v) << '\n';
  }
  return out.str();
}

RunConfig RunConfig::from_ini(std::istream& in, RunConfig base) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.parents.empty()) {
      throw ConfigError("config key '" + item.name + "' must be inside a section");
    }
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) {
      value += (i ? "," : "") + item.inputs[i];
    }
    base.set(item.fullname(), value);
  }
  return base;
}

RunConfig RunConfig::from_ini(std::istream& in) {
  return from_ini(in, RunConfig{});
}

void RunConfig::validate() const {
  try {
    pipeline.validate();
    fsbm.validate();
    chat.validate();
    for (const auto& [algo, params] : hyperparams) {
      ClassifierSpec{algorithm_from_string(algo), params, 0}.validate();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (corpus_format != "auto" && corpus_format != "csv" && corpus_format != "jsonl") {
    throw ConfigError("corpus.format must be auto, csv or jsonl");
  }
  if (!(synthetic_purity >= 0.0 && synthetic_purity <= 1.0)) {
    throw ConfigError("corpus.synthetic_purity must lie in [0, 1]");
  }
  if (stages.empty()) throw ConfigError("benchmark.stages is empty");
  for (int s : stages) {
    if (s != 1 && s != 2) throw ConfigError("benchmark.stages accepts 1 and 2");
  }
  if (balancings.empty()) throw ConfigError("benchmark.balancings is empty");
  for (const auto& b : balancings) {
    try {
      balancing_from_string(b);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& k : classifiers) {
    try {
      algorithm_from_string(k);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("benchmark.train_fraction must lie in (0, 1)");
  }
  for (const auto& s : llm_styles) {
    try {
      prompt_style_from_string(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (embedder != "hashed" && embedder != "remote") {
    throw ConfigError("embedder.type must be hashed or remote");
  }
  if (embedder == "hashed" && embedder_dim < 8) throw ConfigError("embedder.dim must be >= 8");
  if (embedder_dim == 0) throw ConfigError("embedder.dim must be positive");
  if (embedder == "remote" && embedder_endpoint.empty()) {
    throw ConfigError("embedder.endpoint is required for a remote embedder");
  }
  if (train_algorithm != "fsbm") {
    try {
      algorithm_from_string(train_algorithm);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (train_stage != 1 && train_stage != 2) throw ConfigError("train.stage must be 1 or 2");
  if (train_balancing != "imbalanced" && train_balancing != "balanced") {
    throw ConfigError("train.balancing must be imbalanced or balanced");
  }
}

BenchmarkGrid RunConfig::grid() const {
  BenchmarkGrid g;
  g.stages.clear();
  for (int s : stages) g.stages.push_back(s == 1 ? Stage::Stage1 : Stage::Stage2);
  g.balancings.clear();
  for (const auto& b : balancings) g.balancings.push_back(balancing_from_string(b));
  g.classifiers.clear();
  for (auto a : all_algorithms()) {
    const std::string key(to_string(a));
    if (!classifiers.empty() &&
        std::find(classifiers.begin(), classifiers.end(), key) == classifiers.end()) {
      continue;
    }
    ClassifierSpec spec{a, {}, 0};
    if (const auto it = hyperparams.find(key); it != hyperparams.end()) {
      spec.hyperparams = it->second;
    }
    g.classifiers.push_back(spec);
  }
  g.include_fsbm = include_fsbm;
  g.fsbm = fsbm;
  g.fsbm_provider = make_provider();
  if (llm) {
    g.llm = chat;
    g.llm_variants.clear();
    for (const auto& s : llm_styles)
      g.llm_variants.push_back({prompt_style_from_string(s), llm_few_shot});
  }
  g.train_fraction = train_fraction;
  g.pipeline = pipeline;
  g.only = only;
  return g;
}

ProviderPtr RunConfig::make_provider() const {
  if (embedder == "remote") return remote_embedder(embedder_endpoint, embedder_dim);
  return hashed_embedder(embedder_dim, embedder_seed);
}

Dataset RunConfig::load_dataset() const {
  if (synthetic) {
    SyntheticOptions options;
    options.purity = synthetic_purity;
    return generate_synthetic_corpus(seed, synthetic_counts, options);
  }
  if (corpus_path.empty()) throw ConfigError("no corpus: pass --corpus PATH or --synthetic");
  CorpusFormat format = format_from_path(corpus_path);
  if (corpus_format == "csv") format = CorpusFormat::Csv;
  if (corpus_format == "jsonl") format = CorpusFormat::Jsonl;
  return load_corpus(corpus_path, format);
}

}  // namespace triage
