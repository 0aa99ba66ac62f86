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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "triage/bundle.hpp"
#include "triage/cli.hpp"
#include "triage/error.hpp"
#include "triage/random.hpp"

namespace triage {

namespace {

Stage stage_of(int n) {
  return n == 1 ? Stage::Stage1 : Stage::Stage2;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string counts_str(const ClassDistribution& d) {
  std::string s = "{";
  for (std::size_t i = 0; i < d.counts.size(); ++i) {
    s += (i ? "," : "") + std::to_string(d.counts[i]);
  }
  return s + "}";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

nlohmann::json ids_of(const Dataset& d) {
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& r : d.examples()) ids.push_back(r.id);
  return ids;
}

// ---------------------------------------------------------------------------
// Commands

struct PrepareArgs {
  int stage = 0;  // 0 = both
};

int cmd_prepare(const RunConfig& cfg, const PrepareArgs& args, std::ostream& out) {
  const Dataset corpus = cfg.load_dataset();
  if (corpus.stage() != Stage::Stage1) throw DataError("corpus must carry stage-1 labels");
  out << "corpus: " << corpus.size() << " reports\n";
  std::filesystem::create_directories(cfg.out);
  for (int s : {1, 2}) {
    if (args.stage != 0 && args.stage != s) continue;
    const Stage stage = stage_of(s);
    const Dataset staged = stage == Stage::Stage1 ? corpus : map_to_stage2(corpus);
    const auto dist = class_distribution(staged);
    const std::size_t majority = *std::max_element(dist.counts.begin(), dist.counts.end());

    out << "\nStage " << s << " distribution\n\n";
    out << "| Class | Description | Imbalanced | Balanced |\n|---|---|---|---|\n";
    for (std::size_t c = 0; c < dist.counts.size(); ++c) {
      out << "| " << c + 1 << " | " << class_description(stage, static_cast<int>(c)) << " | "
          << dist.counts[c] << " | " << majority << " |\n";
    }
    out << "| Total | | " << dist.total() << " | " << majority * dist.counts.size() << " |\n";

    const auto imbalanced =
        prepare_cell_data(corpus, stage, Balancing::Imbalanced, cfg.train_fraction, cfg.seed);
    const auto balanced =
        prepare_cell_data(corpus, stage, Balancing::Balanced, cfg.train_fraction, cfg.seed);
    out << "\nsplit " << fmt3(cfg.train_fraction) << ": train "
        << counts_str(class_distribution(imbalanced.train)) << ", test "
        << counts_str(class_distribution(imbalanced.test)) << ", oversampled train "
        << counts_str(class_distribution(balanced.train)) << '\n';

    const nlohmann::json manifest = {{"stage", to_string(stage)},
                                     {"seed", cfg.seed},
                                     {"train_fraction", cfg.train_fraction},
                                     {"train", ids_of(imbalanced.train)},
                                     {"test", ids_of(imbalanced.test)},
                                     {"oversampled_train", ids_of(balanced.train)}};
    const auto path =
        std::filesystem::path(cfg.out) / ("split_stage" + std::to_string(s) + ".json");
    write_text(path, manifest.dump(2) + "\n");
    out << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

int cmd_benchmark(const RunConfig& cfg, bool verbose, std::ostream& out, std::ostream& err) {
  const Dataset corpus = cfg.load_dataset();
  const BenchmarkGrid grid = cfg.grid();
  const auto per_block = grid.cell_keys().size();
  out << "grid: " << grid.stages.size() << " stages x " << grid.balancings.size()
      << " balancings x " << per_block
      << " cells = " << grid.stages.size() * grid.balancings.size() * per_block << " cells\n";
  const auto cells = run_benchmark(corpus, grid, cfg.seed, [&](const BenchmarkCell& c) {
    if (verbose) {
      err << to_string(c.stage) << ' ' << to_string(c.balancing) << ' ' << c.key << ' '
          << (c.error ? "failed: " + *c.error : fmt3(c.metrics.accuracy)) << '\n';
    }
  });
  std::size_t failed = 0;
  for (const auto& c : cells) {
    if (c.error) {
      ++failed;
      err << "cell " << to_string(c.stage) << '/' << to_string(c.balancing) << '/' << c.key
          << " failed: " << *c.error << '\n';
    }
  }
  const auto written = write_benchmark_outputs(cells, grid, cfg.seed, cfg.out);
  out << '\n' << emit_report(cells, ReportFormat::Markdown) << '\n';
  out << "ran " << cells.size() << " cells, " << failed << " failed\n";
  for (const auto& p : written) out << "wrote " << p.string() << '\n';
  if (!cells.empty() && failed == cells.size()) return kExitRuntime;
  return kExitOk;
}

struct TrainArgs {
  std::string model;
};

int cmd_train(const RunConfig& cfg, const TrainArgs& args, std::ostream& out) {
  const Dataset corpus = cfg.load_dataset();
  const Stage stage = stage_of(cfg.train_stage);
  const Balancing balancing = balancing_from_string(cfg.train_balancing);
  const auto data = prepare_cell_data(corpus, stage, balancing, cfg.train_fraction, cfg.seed);
  const std::uint64_t seed = cell_seed(cfg.seed, stage, balancing, cfg.train_algorithm);

  std::optional<ModelBundle> bundle;
  std::string display;
  if (cfg.train_algorithm == "fsbm") {
    bundle.emplace(stage, fsbm_fit(data.train, cfg.make_provider(), cfg.fsbm, seed));
    display = "FSBM";
  } else {
    const Algorithm algorithm = algorithm_from_string(cfg.train_algorithm);
    ClassifierSpec spec{algorithm, {}, seed};
    if (const auto it = cfg.hyperparams.find(cfg.train_algorithm); it != cfg.hyperparams.end()) {
      spec.hyperparams = it->second;
    }
    auto [x, pipeline] = vectorize_dataset(data.train, cfg.pipeline, Lexicon::defaults());
    TrainedModel model = fit(spec, x, data.train.labels());
    bundle.emplace(stage, std::move(pipeline), std::move(model));
    display = std::string(display_name(algorithm));
  }

  std::vector<int> pred;
  for (const auto& r : data.test.examples()) pred.push_back(bundle->predict(r.text));
  const auto m = compute_metrics(confusion_matrix(data.test.labels(), pred, num_classes(stage)));

  const std::filesystem::path path = args.model.empty()
                                         ? std::filesystem::path(cfg.out) / "model.json"
                                         : std::filesystem::path(args.model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bundle->save(path);
  out << "trained " << display << " on " << to_string(stage) << ' ' << to_string(balancing)
      << " train split " << counts_str(class_distribution(data.train)) << '\n'
      << "test accuracy " << fmt3(m.accuracy) << ", precision " << fmt3(m.precision) << ", recall "
      << fmt3(m.recall) << ", f-measure " << fmt3(m.f_measure) << '\n'
      << "wrote " << path.string() << '\n';
  return kExitOk;
}

struct PredictArgs {
  std::string model;
  std::vector<std::string> texts;
  std::string input;
  bool json = false;
};

int cmd_predict(const PredictArgs& args, std::ostream& out) {
  if (args.model.empty()) throw ConfigError("predict needs --model PATH");
  const ModelBundle bundle = ModelBundle::load(args.model);
  std::vector<std::string> texts = args.texts;
  if (!args.input.empty()) {
    std::istringstream lines(read_text(args.input));
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) texts.push_back(line);
    }
  }
  if (texts.empty()) throw ConfigError("predict needs --text or --input");
  for (const auto& text : texts) {
    const auto proba = bundle.predict_proba(text);
    const int label = bundle.predict(text);
    const auto description = std::string(class_description(bundle.stage(), label));
    if (args.json) {
      out << nlohmann::json{{"text", text},
                            {"label", label},
                            {"class", label + 1},
                            {"description", description},
                            {"probabilities", proba}}
                 .dump()
          << '\n';
    } else {
      out << "class " << label + 1 << " (" << description << ")";
      for (std::size_t c = 0; c < proba.size(); ++c) {
        out << (c ? " " : "  p=[") << fmt3(proba[c]);
      }
      out << "]\n";
    }
  }
  return kExitOk;
}

struct LlmEvalArgs {
  int stage = 2;
  std::vector<std::string> styles;
  bool zero_shot = false;
  std::size_t limit = 0;
};

int cmd_llm_eval(const RunConfig& cfg, const LlmEvalArgs& args, std::ostream& out) {
  const Dataset corpus = cfg.load_dataset();
  const Stage stage = stage_of(args.stage);
  const auto data =
      prepare_cell_data(corpus, stage, Balancing::Imbalanced, cfg.train_fraction, cfg.seed);
  std::vector<Report> test_reports = data.test.examples();
  if (args.limit > 0 && test_reports.size() > args.limit) {
    test_reports.erase(test_reports.begin() + static_cast<std::ptrdiff_t>(args.limit),
                       test_reports.end());
  }
  std::vector<std::string> texts;
  std::vector<int> truth;
  for (const auto& r : test_reports) {
    texts.push_back(r.text);
    truth.push_back(r.severity.index(stage));
  }

  const auto styles = args.styles.empty() ? cfg.llm_styles : args.styles;
  std::vector<BenchmarkCell> cells;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& style_name : styles) {
    const LlmVariant variant{prompt_style_from_string(style_name), !args.zero_shot};
    BenchmarkCell cell;
    cell.stage = stage;
    cell.balancing = Balancing::Imbalanced;
    cell.key = variant.key();
    cell.display_name = variant.display_name();
    cell.seed = cell_seed(cfg.seed, stage, Balancing::Imbalanced, cell.key);
    std::vector<Demonstration> shots;
    if (variant.few_shot)
      shots = select_demonstrations(data.train, derive_seed(cell.seed, {"shots"}));
    const auto tmpl = PromptTemplate::standard(variant.style, stage, shots.size());
    ChatClient client(cfg.chat);
    const auto outcomes = classify_batch(client, tmpl, shots, texts);
    std::vector<int> pred;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      pred.push_back(o.kind == LlmOutcome::Kind::Label ? o.label : kParseFailure);
      if (o.kind == LlmOutcome::Kind::ParseFailure) ++cell.parse_failures;
      if (o.kind == LlmOutcome::Kind::TransportFailure) ++cell.transport_failures;
      records.push_back({{"variant", cell.key},
                         {"id", test_reports[i].id},
                         {"truth", truth[i]},
                         {"outcome", to_string(o.kind)},
                         {"label", o.kind == LlmOutcome::Kind::Label ? nlohmann::json(o.label)
                                                                     : nlohmann::json(nullptr)},
                         {"response", o.response},
                         {"error", o.error}});
    }
    if (!texts.empty()) {
      cell.metrics = compute_metrics(confusion_matrix(truth, pred, num_classes(stage)));
    }
    cells.push_back(std::move(cell));
  }

  out << emit_report(cells, ReportFormat::Markdown) << '\n';
  for (const auto& c : cells) {
    out << c.display_name << ": " << texts.size() << " queries, " << c.parse_failures
        << " parse failures, " << c.transport_failures << " transport failures\n";
  }
  std::string jsonl;
  for (const auto& r : records) jsonl += r.dump() + "\n";
  const auto path =
      std::filesystem::path(cfg.out) / ("llm_eval_" + std::string(to_string(stage)) + ".jsonl");
  write_text(path, jsonl);
  out << "wrote " << path.string() << '\n';
  return kExitOk;
}

struct ReportArgs {
  std::string input;
  std::string format = "md";
};

int cmd_report(const RunConfig& cfg, const ReportArgs& args, std::ostream& out) {
  const std::filesystem::path input = args.input.empty()
                                          ? std::filesystem::path(cfg.out) / "benchmark.json"
                                          : std::filesystem::path(args.input);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(input));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(input.string() + " is not valid JSON: " + e.what());
  }
  if (!j.contains("cells") || !j["cells"].is_array()) {
    throw DataError(input.string() + " has no cells array");
  }
  std::vector<BenchmarkCell> cells;
  for (const auto& c : j["cells"]) cells.push_back(cell_from_json(c));
  if (args.format != "md" && args.format != "csv") throw ConfigError("--format must be md or csv");
  out << emit_report(cells, args.format == "md" ? ReportFormat::Markdown : ReportFormat::Csv);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Severity triage of radiology report text", "triage"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path, out_dir, corpus, format;
  std::uint64_t seed = 0;
  bool synthetic = false;
  std::vector<std::string> sets;
  auto* seed_opt = app.add_option("--seed", seed, "Base seed");
  app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  auto* corpus_opt = app.add_option("--corpus", corpus, "Corpus file (.csv or .jsonl)");
  auto* format_opt = app.add_option("--format-corpus", format, "Corpus format: auto, csv, jsonl");
  auto* synthetic_opt = app.add_flag("--synthetic", synthetic, "Use the synthetic corpus");
  app.add_option("--set", sets, "Override a config key: section.key=value");
  bool dump_config = false;
  app.add_flag("--print-config", dump_config, "Print the effective config and exit");

  PrepareArgs prepare_args;
  auto* prepare =
      app.add_subcommand("prepare", "Print class distributions and write split manifests");
  prepare->add_option("--stage", prepare_args.stage, "1 or 2 (default both)")
      ->check(CLI::IsMember({1, 2}));

  bool verbose = false, llm = false, no_llm = false;
  std::vector<std::string> only;
  auto* benchmark = app.add_subcommand("benchmark", "Run the classifier grid and write reports");
  benchmark->add_option("--only", only, "Run only these cell keys");
  auto* llm_flag = benchmark->add_flag("--llm", llm, "Include LLM cells");
  benchmark->add_flag("--no-llm", no_llm, "Skip LLM cells (default)")->excludes(llm_flag);
  benchmark->add_flag("-v,--verbose", verbose, "Print each cell as it finishes");

  TrainArgs train_args;
  std::string algorithm, balancing;
  int train_stage = 0;
  auto* train = app.add_subcommand("train", "Fit one classifier and save a model bundle");
  auto* algo_opt = train->add_option("--algorithm", algorithm, "Classifier key or fsbm");
  auto* tstage_opt =
      train->add_option("--stage", train_stage, "1 or 2")->check(CLI::IsMember({1, 2}));
  auto* bal_opt = train->add_option("--balancing", balancing, "imbalanced or balanced");
  train->add_option("--model", train_args.model, "Output model path (default OUT/model.json)");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Classify texts with a saved model");
  predict->add_option("--model", predict_args.model, "Model bundle")->required();
  predict->add_option("--text", predict_args.texts, "Report text");
  predict->add_option("--input", predict_args.input, "File with one report per line");
  predict->add_flag("--json", predict_args.json, "JSON lines output");

  LlmEvalArgs llm_args;
  std::string endpoint;
  auto* llm_eval = app.add_subcommand("llm-eval", "Classify the test split with a chat model");
  llm_eval->add_option("--stage", llm_args.stage, "1 or 2")->check(CLI::IsMember({1, 2}));
  llm_eval->add_option("--style", llm_args.styles, "simple and/or complicated");
  llm_eval->add_flag("--zero-shot", llm_args.zero_shot, "No demonstrations");
  llm_eval->add_option("--limit", llm_args.limit, "Evaluate at most N test reports");
  auto* endpoint_opt = llm_eval->add_option("--endpoint", endpoint, "Chat endpoint URL or mock://");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Render reports from benchmark.json");
  report->add_option("--input", report_args.input, "benchmark.json (default OUT/benchmark.json)");
  report->add_option("--format", report_args.format, "md or csv");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot open config " + config_path);
      cfg = RunConfig::from_ini(f, cfg);
    }
    if (seed_opt->count()) cfg.seed = seed;
    if (out_opt->count()) cfg.out = out_dir;
    if (corpus_opt->count()) cfg.corpus_path = corpus;
    if (format_opt->count()) cfg.corpus_format = format;
    if (synthetic_opt->count()) cfg.synthetic = synthetic;
    if (!only.empty()) cfg.only = only;
    if (llm) cfg.llm = true;
    if (no_llm) cfg.llm = false;
    if (algo_opt->count()) cfg.train_algorithm = algorithm;
    if (tstage_opt->count()) cfg.train_stage = train_stage;
    if (bal_opt->count()) cfg.train_balancing = balancing;
    if (endpoint_opt->count()) cfg.chat.endpoint = endpoint;
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    if (dump_config) {
      out << cfg.to_ini();
      return kExitOk;
    }

    if (*prepare) return cmd_prepare(cfg, prepare_args, out);
    if (*benchmark) return cmd_benchmark(cfg, verbose, out, err);
    if (*train) return cmd_train(cfg, train_args, out);
    if (*predict) return cmd_predict(predict_args, out);
    if (*llm_eval) return cmd_llm_eval(cfg, llm_args, out);
    if (*report) return cmd_report(cfg, report_args, out);
    err << "a command is required\n" << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace triage
