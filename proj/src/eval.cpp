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

#include "triage/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "triage/error.hpp"
#include "triage/features.hpp"
#include "triage/random.hpp"

namespace triage {

ConfusionMatrix::ConfusionMatrix(int n_classes) : n_classes_(n_classes) {
  if (n_classes < 2) throw std::invalid_argument("confusion matrix needs >= 2 classes");
  counts_.assign(static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(n_classes), 0);
}

std::uint64_t ConfusionMatrix::at(int truth, int predicted) const {
  if (truth < 0 || truth >= n_classes_ || predicted < 0 || predicted >= n_classes_) {
    throw std::out_of_range("confusion matrix index out of range");
  }
  return counts_[static_cast<std::size_t>(truth * n_classes_ + predicted)];
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= n_classes_) throw std::invalid_argument("true label out of range");
  if (predicted == kParseFailure) {
    predicted = (truth + 1) % n_classes_;
  } else if (predicted < 0 || predicted >= n_classes_) {
    throw std::invalid_argument("predicted label out of range");
  }
  ++counts_[static_cast<std::size_t>(truth * n_classes_ + predicted)];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (int c = 0; c < n_classes_; ++c) t += at(c, c);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(int c) const {
  std::uint64_t s = 0;
  for (int p = 0; p < n_classes_; ++p) s += at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(int c) const {
  std::uint64_t s = 0;
  for (int t = 0; t < n_classes_; ++t) s += at(t, c);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 int n_classes) {
  if (y_true.size() != y_pred.size()) {
    throw std::invalid_argument("confusion_matrix: length mismatch");
  }
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) cm.add(y_true[i], y_pred[i]);
  return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm, Averaging) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("compute_metrics: empty confusion matrix");
  const double n = static_cast<double>(total);
  MetricsReport m;
  m.accuracy = static_cast<double>(cm.trace()) / n;
  // Support-weighted recall sums diag_c / n, i.e. the accuracy.
  m.recall = m.accuracy;
  double precision = 0.0, f1 = 0.0;
  for (int c = 0; c < cm.n_classes(); ++c) {
    const double support = static_cast<double>(cm.row_sum(c));
    if (support == 0.0) continue;
    const double diag = static_cast<double>(cm.at(c, c));
    const double predicted = static_cast<double>(cm.col_sum(c));
    const double p = predicted > 0.0 ? diag / predicted : 0.0;
    const double r = diag / support;
    const double f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    precision += support * p;
    f1 += support * f;
  }
  m.precision = precision / n;
  m.f_measure = f1 / n;
  return m;
}

std::string_view to_string(Balancing balancing) {
  return balancing == Balancing::Imbalanced ? "imbalanced" : "balanced";
}

Balancing balancing_from_string(std::string_view s) {
  if (s == "imbalanced") return Balancing::Imbalanced;
  if (s == "balanced") return Balancing::Balanced;
  throw std::invalid_argument("unknown balancing '" + std::string(s) + "'");
}

std::string LlmVariant::key() const {
  return "llm-" + std::string(to_string(style)) + (few_shot ? "" : "-zero-shot");
}

std::string LlmVariant::display_name() const {
  std::string name = style == PromptStyle::Simple ? "LLM Simple Prompt" : "LLM Complicated Prompt";
  if (!few_shot) name += " (zero-shot)";
  return name;
}

std::vector<ClassifierSpec> BenchmarkGrid::default_classifier_grid() {
  std::vector<ClassifierSpec> out;
  for (auto a : all_algorithms()) out.push_back({a, {}, 0});
  return out;
}

std::vector<std::string> BenchmarkGrid::cell_keys() const {
  std::vector<std::string> keys;
  for (const auto& s : classifiers) keys.emplace_back(to_string(s.algorithm));
  if (llm) {
    for (const auto& v : llm_variants) keys.push_back(v.key());
  }
  if (include_fsbm) keys.emplace_back("fsbm");
  std::vector<std::string> out;
  for (auto& k : keys) {
    if (selected(k)) out.push_back(std::move(k));
  }
  return out;
}

bool BenchmarkGrid::selected(const std::string& key) const {
  return only.empty() || std::find(only.begin(), only.end(), key) != only.end();
}

nlohmann::json BenchmarkGrid::to_json() const {
  nlohmann::json j;
  for (auto s : stages) j["stages"].push_back(to_string(s));
  for (auto b : balancings) j["balancings"].push_back(to_string(b));
  j["classifiers"] = nlohmann::json::array();
  for (const auto& c : classifiers) {
    nlohmann::json spec = c.to_json();
    spec.erase("seed");
    j["classifiers"].push_back(spec);
  }
  j["include_fsbm"] = include_fsbm;
  j["fsbm"] = fsbm.to_json();
  j["fsbm"]["mlp"].erase("seed");
  j["fsbm_provider"] = fsbm_provider ? fsbm_provider->config() : hashed_embedder()->config();
  if (j["fsbm_provider"].contains("table")) j["fsbm_provider"].erase("table");
  if (llm) {
    j["llm"] = {{"endpoint", llm->endpoint},
                {"model", llm->model_name},
                {"temperature", llm->temperature},
                {"max_retries", llm->max_retries}};
    for (const auto& v : llm_variants) j["llm"]["variants"].push_back(v.key());
  } else {
    j["llm"] = nullptr;
  }
  j["train_fraction"] = train_fraction;
  j["pipeline"] = {{"stopwords", pipeline.enable_stopwords},
                   {"lemmatize", pipeline.enable_lemmatize},
                   {"spellcheck", pipeline.enable_spellcheck},
                   {"max_edit_distance", pipeline.max_edit_distance}};
  j["lexicon"] = {{"stopwords", lexicon.stopwords().size()},
                  {"lemmas", lexicon.lemma_map().size()},
                  {"vocabulary", lexicon.vocabulary().size()}};
  j["only"] = only;
  return j;
}

std::uint64_t cell_seed(std::uint64_t base_seed, Stage stage, Balancing balancing,
                        std::string_view key) {
  return derive_seed(base_seed, {to_string(stage), to_string(balancing), key});
}

CellData prepare_cell_data(const Dataset& corpus, Stage stage, Balancing balancing,
                           double train_fraction, std::uint64_t base_seed) {
  if (corpus.stage() != Stage::Stage1) {
    throw DataError("benchmark corpus must carry stage-1 labels");
  }
  const Dataset staged = stage == Stage::Stage1 ? corpus : map_to_stage2(corpus);
  auto split =
      stratified_split(staged, train_fraction, derive_seed(base_seed, {"split", to_string(stage)}));
  if (balancing == Balancing::Balanced) {
    split.train =
        random_oversample(split.train, derive_seed(base_seed, {"oversample", to_string(stage)}));
  }
  return {std::move(split.train), std::move(split.test)};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void score(BenchmarkCell& cell, const std::vector<int>& truth, const std::vector<int>& pred,
           int n_classes) {
  cell.metrics = compute_metrics(confusion_matrix(truth, pred, n_classes));
}

}  // namespace

std::vector<BenchmarkCell> run_benchmark(
    const Dataset& corpus, const BenchmarkGrid& grid, std::uint64_t base_seed,
    const std::function<void(const BenchmarkCell&)>& progress) {
  std::vector<BenchmarkCell> cells;
  const ProviderPtr provider = grid.fsbm_provider ? grid.fsbm_provider : hashed_embedder();
  for (const Stage stage : grid.stages) {
    for (const Balancing balancing : grid.balancings) {
      const auto data = prepare_cell_data(corpus, stage, balancing, grid.train_fraction, base_seed);
      const auto y_train = data.train.labels();
      const auto y_test = data.test.labels();
      const int k = num_classes(stage);

      auto emit = [&](BenchmarkCell cell) {
        cell.stage = stage;
        cell.balancing = balancing;
        cell.train_distribution = class_distribution(data.train);
        cell.test_distribution = class_distribution(data.test);
        if (progress) progress(cell);
        cells.push_back(std::move(cell));
      };
      auto run_cell = [&](const std::string& key, const std::string& display, auto&& body) {
        BenchmarkCell cell;
        cell.key = key;
        cell.display_name = display;
        cell.seed = cell_seed(base_seed, stage, balancing, key);
        const auto t0 = Clock::now();
        try {
          body(cell);
        } catch (const std::exception& e) {
          cell.metrics = {};
          cell.error = e.what();
        }
        cell.runtime_seconds = seconds_since(t0);
        emit(std::move(cell));
      };

      // Classical classifiers share one train-fitted TF-IDF space.
      bool any_classical = false;
      for (const auto& spec : grid.classifiers) {
        any_classical = any_classical || grid.selected(std::string(to_string(spec.algorithm)));
      }
      std::optional<std::pair<FeatureMatrix, FeatureMatrix>> features;
      std::string feature_error;
      if (any_classical) {
        try {
          auto [x_train, pipeline] = vectorize_dataset(data.train, grid.pipeline, grid.lexicon);
          features.emplace(std::move(x_train), pipeline.transform(data.test));
        } catch (const std::exception& e) {
          feature_error = e.what();
        }
      }
      for (const auto& base_spec : grid.classifiers) {
        const std::string key(to_string(base_spec.algorithm));
        if (!grid.selected(key)) continue;
        run_cell(key, std::string(display_name(base_spec.algorithm)), [&](BenchmarkCell& cell) {
          if (!features) throw std::runtime_error("feature extraction failed: " + feature_error);
          ClassifierSpec spec = base_spec;
          spec.seed = cell.seed;
          const auto model = fit(spec, features->first, y_train);
          std::vector<int> pred;
          pred.reserve(features->second.size());
          for (const auto& row : features->second.rows) pred.push_back(model.predict(row));
          score(cell, y_test, pred, k);
        });
      }

      if (grid.llm) {
        for (const auto& variant : grid.llm_variants) {
          if (!grid.selected(variant.key())) continue;
          run_cell(variant.key(), variant.display_name(), [&](BenchmarkCell& cell) {
            ChatClient client(*grid.llm);
            std::vector<Demonstration> shots;
            if (variant.few_shot) {
              shots = select_demonstrations(data.train, derive_seed(cell.seed, {"shots"}));
            }
            const auto tmpl = PromptTemplate::standard(variant.style, stage, shots.size());
            const auto outcomes = classify_batch(client, tmpl, shots, data.test.texts());
            std::vector<int> pred;
            for (const auto& o : outcomes) {
              if (o.kind == LlmOutcome::Kind::Label) {
                pred.push_back(o.label);
              } else {
                pred.push_back(kParseFailure);
                if (o.kind == LlmOutcome::Kind::ParseFailure) ++cell.parse_failures;
                if (o.kind == LlmOutcome::Kind::TransportFailure) ++cell.transport_failures;
              }
            }
            score(cell, y_test, pred, k);
            if (!outcomes.empty() && cell.transport_failures == outcomes.size()) {
              cell.error = "every request failed: " + outcomes.front().error;
            }
          });
        }
      }

      if (grid.include_fsbm && grid.selected("fsbm")) {
        run_cell("fsbm", "FSBM", [&](BenchmarkCell& cell) {
          const auto model = fsbm_fit(data.train, provider, grid.fsbm, cell.seed);
          score(cell, y_test, model.predict_batch(data.test.texts()), k);
        });
      }
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string stage_title(Stage s) {
  return s == Stage::Stage1 ? "Stage 1" : "Stage 2";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_escape(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

constexpr std::string_view kMdHeader =
    "| Classifier | Accuracy | Precision | Recall | F-measure |\n"
    "|---|---|---|---|---|\n";

constexpr std::string_view kCsvHeader =
    "stage,balancing,classifier,accuracy,precision,recall,f_measure,error\n";

}  // namespace

std::string emit_report(const std::vector<BenchmarkCell>& cells, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << kCsvHeader;
    for (const auto& c : cells) {
      out << to_string(c.stage) << ',' << to_string(c.balancing) << ',' << csv_field(c.display_name)
          << ',' << fmt3(c.metrics.accuracy) << ',' << fmt3(c.metrics.precision) << ','
          << fmt3(c.metrics.recall) << ',' << fmt3(c.metrics.f_measure) << ','
          << csv_field(c.error.value_or("")) << '\n';
    }
    return out.str();
  }
  if (cells.empty()) return std::string(kMdHeader);

  // Blocks in first-appearance order; rows keep their input order.
  std::vector<std::pair<Stage, Balancing>> blocks;
  for (const auto& c : cells) {
    const std::pair<Stage, Balancing> b{c.stage, c.balancing};
    if (std::find(blocks.begin(), blocks.end(), b) == blocks.end()) blocks.push_back(b);
  }
  bool first = true;
  for (const auto& [stage, balancing] : blocks) {
    if (!first) out << '\n';
    first = false;
    out << "## " << stage_title(stage) << ", " << to_string(balancing) << " data\n\n" << kMdHeader;
    std::vector<const BenchmarkCell*> failed;
    for (const auto& c : cells) {
      if (c.stage != stage || c.balancing != balancing) continue;
      out << "| " << md_escape(c.display_name);
      if (c.error) {
        out << " | failed | failed | failed | failed |\n";
        failed.push_back(&c);
      } else {
        out << " | " << fmt3(c.metrics.accuracy) << " | " << fmt3(c.metrics.precision) << " | "
            << fmt3(c.metrics.recall) << " | " << fmt3(c.metrics.f_measure) << " |\n";
      }
    }
    if (!failed.empty()) {
      out << '\n';
      for (const auto* c : failed) {
        out << "- " << md_escape(c->display_name) << ": " << md_escape(*c->error) << '\n';
      }
    }
  }
  return out.str();
}

namespace {

std::vector<std::vector<std::string>> read_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
      }
      fields.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted field in report CSV");
  if (any || !field.empty()) {
    fields.push_back(std::move(field));
    records.push_back(std::move(fields));
  }
  return records;
}

double parse_metric(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError("bad metric value '" + s + "' in report CSV");
  }
  if (used != s.size()) throw DataError("bad metric value '" + s + "' in report CSV");
  return v;
}

}  // namespace

std::vector<ReportRow> parse_report_csv(std::string_view csv) {
  const auto records = read_csv_records(csv);
  if (records.empty()) throw DataError("empty report CSV");
  std::string header;
  for (std::size_t i = 0; i < records[0].size(); ++i) {
    header += (i ? "," : "") + records[0][i];
  }
  if (header + "\n" != kCsvHeader) throw DataError("unexpected report CSV header");
  std::vector<ReportRow> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r];
    if (f.size() != 8) throw DataError("report CSV row " + std::to_string(r) + " has wrong width");
    rows.push_back(
        {f[0],
         f[1],
         f[2],
         {parse_metric(f[3]), parse_metric(f[4]), parse_metric(f[5]), parse_metric(f[6])},
         f[7]});
  }
  return rows;
}

nlohmann::json cell_to_json(const BenchmarkCell& c) {
  nlohmann::json j = {{"stage", to_string(c.stage)},
                      {"balancing", to_string(c.balancing)},
                      {"key", c.key},
                      {"classifier", c.display_name},
                      {"seed", c.seed},
                      {"metrics",
                       {{"accuracy", c.metrics.accuracy},
                        {"precision", c.metrics.precision},
                        {"recall", c.metrics.recall},
                        {"f_measure", c.metrics.f_measure}}},
                      {"train_distribution", c.train_distribution.counts},
                      {"test_distribution", c.test_distribution.counts},
                      {"parse_failures", c.parse_failures},
                      {"transport_failures", c.transport_failures}};
  j["error"] = c.error ? nlohmann::json(*c.error) : nlohmann::json(nullptr);
  return j;
}

BenchmarkCell cell_from_json(const nlohmann::json& j) {
  try {
    BenchmarkCell c;
    c.stage = j.at("stage") == "stage1" ? Stage::Stage1 : Stage::Stage2;
    if (j.at("stage") != "stage1" && j.at("stage") != "stage2") throw DataError("bad stage");
    c.balancing = balancing_from_string(j.at("balancing").get<std::string>());
    c.key = j.at("key").get<std::string>();
    c.display_name = j.at("classifier").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& m = j.at("metrics");
    c.metrics = {m.at("accuracy").get<double>(), m.at("precision").get<double>(),
                 m.at("recall").get<double>(), m.at("f_measure").get<double>()};
    c.train_distribution.counts = j.at("train_distribution").get<std::vector<std::size_t>>();
    c.test_distribution.counts = j.at("test_distribution").get<std::vector<std::size_t>>();
    c.parse_failures = j.value("parse_failures", std::size_t{0});
    c.transport_failures = j.value("transport_failures", std::size_t{0});
    if (!j.at("error").is_null()) c.error = j.at("error").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed benchmark cell: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed benchmark cell: ") + e.what());
  }
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> write_benchmark_outputs(const std::vector<BenchmarkCell>& cells,
                                                           const BenchmarkGrid& grid,
                                                           std::uint64_t base_seed,
                                                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (Stage stage : {Stage::Stage1, Stage::Stage2}) {
    for (Balancing balancing : {Balancing::Balanced, Balancing::Imbalanced}) {
      std::vector<BenchmarkCell> block;
      for (const auto& c : cells) {
        if (c.stage == stage && c.balancing == balancing) block.push_back(c);
      }
      if (block.empty()) continue;
      const std::string stem = std::string("results_") +
                               (stage == Stage::Stage1 ? "stage1" : "stage2") + "_" +
                               std::string(to_string(balancing));
      for (auto [format, ext] :
           {std::pair{ReportFormat::Markdown, ".md"}, std::pair{ReportFormat::Csv, ".csv"}}) {
        const auto path = out_dir / (stem + ext);
        write_file(path, emit_report(block, format));
        written.push_back(path);
      }
    }
  }
  nlohmann::json bench = {{"base_seed", base_seed}, {"config", grid.to_json()}};
  bench["cells"] = nlohmann::json::array();
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& c : cells) {
    bench["cells"].push_back(cell_to_json(c));
    timings.push_back({{"stage", to_string(c.stage)},
                       {"balancing", to_string(c.balancing)},
                       {"key", c.key},
                       {"runtime_seconds", c.runtime_seconds}});
  }
  write_file(out_dir / "benchmark.json", bench.dump(2) + "\n");
  written.push_back(out_dir / "benchmark.json");
  write_file(out_dir / "timings.json", timings.dump(2) + "\n");
  written.push_back(out_dir / "timings.json");
  return written;
}

}  // namespace triage
