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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "triage/error.hpp"
#include "triage/eval.hpp"

using namespace triage;

namespace {

std::set<std::string> base_ids(const Dataset& d) {
  std::set<std::string> out;
  for (const auto& r : d.examples()) out.insert(std::string(base_id(r.id)));
  return out;
}

BenchmarkGrid small_grid() {
  BenchmarkGrid g;
  g.classifiers = {{Algorithm::MultinomialNB, {}, 0},
                   {Algorithm::DecisionTree, {{"max_depth", 5}}, 0}};
  g.fsbm.per_class = 10;
  g.fsbm.pairs_per_anchor = 4;
  g.fsbm.epochs = 2;
  g.fsbm.mlp.hyperparams = {{"hidden", 8}, {"epochs", 10}};
  g.fsbm_provider = hashed_embedder(32, 0);
  return g;
}

}  // namespace

TEST_CASE("confusion matrix") {
  const std::vector<int> t{0, 0, 0, 1, 1, 1}, p{0, 0, 1, 1, 1, 1};
  const auto cm = confusion_matrix(t, p, 2);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 3);
  CHECK(cm.total() == 6);
  CHECK(cm.trace() == 5);

  const auto perfect = confusion_matrix(t, t, 2);
  CHECK(perfect.trace() == perfect.total());

  const std::vector<int> none;
  CHECK(confusion_matrix(none, none, 4).total() == 0);

  const std::vector<int> truth{0, 1, 2, 3}, failed(4, kParseFailure);
  const auto pf = confusion_matrix(truth, failed, 4);
  for (int c = 0; c < 4; ++c) CHECK(pf.at(c, (c + 1) % 4) == 1);
  CHECK(pf.trace() == 0);

  const std::vector<int> short_pred{0};
  CHECK_THROWS_AS(confusion_matrix(t, short_pred, 2), std::invalid_argument);
  const std::vector<int> out_of_range{0, 0, 0, 1, 1, 2};
  CHECK_THROWS_AS(confusion_matrix(t, out_of_range, 2), std::invalid_argument);
}

TEST_CASE("metrics by hand") {
  const std::vector<int> t{0, 0, 0, 1, 1, 1}, p{0, 0, 1, 1, 1, 1};
  const auto m = compute_metrics(confusion_matrix(t, p, 2));
  CHECK(m.accuracy == doctest::Approx(5.0 / 6.0));
  CHECK(m.precision == doctest::Approx(0.875));
  CHECK(m.recall == doctest::Approx(0.833).epsilon(1e-3));
  CHECK(m.f_measure == doctest::Approx(0.829).epsilon(1e-3));

  const auto perfect = compute_metrics(confusion_matrix(t, t, 2));
  CHECK(perfect == MetricsReport{1.0, 1.0, 1.0, 1.0});
  CHECK_THROWS_AS(compute_metrics(ConfusionMatrix(2)), std::invalid_argument);
}

TEST_CASE("metrics match the definitional oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(3);
    const auto counts = oracle::random_counts(rng, k, 9);
    const auto cm = oracle::to_matrix(counts);
    const auto got = compute_metrics(cm);
    const auto want = oracle::metrics(counts);
    CHECK(got.accuracy == doctest::Approx(want.accuracy).epsilon(1e-12));
    CHECK(got.precision == doctest::Approx(want.precision).epsilon(1e-12));
    CHECK(got.recall == doctest::Approx(want.recall).epsilon(1e-12));
    CHECK(got.f_measure == doctest::Approx(want.f_measure).epsilon(1e-12));
    // Weighted recall is the accuracy, exactly.
    CHECK(got.recall == got.accuracy);
    CHECK(got.f_measure >= 0.0);
    CHECK(got.f_measure <= 1.0);
  }
}

TEST_CASE("cell data keeps the test split untouched") {
  const Dataset corpus = generate_synthetic_corpus(3, {20, 60, 40, 12});
  for (Stage stage : {Stage::Stage1, Stage::Stage2}) {
    const auto imb = prepare_cell_data(corpus, stage, Balancing::Imbalanced, 0.8, 9);
    const auto bal = prepare_cell_data(corpus, stage, Balancing::Balanced, 0.8, 9);
    CHECK(imb.test.texts() == bal.test.texts());
    CHECK(class_distribution(imb.test) == class_distribution(bal.test));
    const auto counts = class_distribution(bal.train).counts;
    CHECK(std::set<std::size_t>(counts.begin(), counts.end()).size() == 1);
    for (const auto* cell : {&imb, &bal}) {
      const auto train = base_ids(cell->train), test = base_ids(cell->test);
      for (const auto& id : test) CHECK(train.count(id) == 0);
    }
    CHECK(base_ids(bal.train) == base_ids(imb.train));
  }
  CHECK_THROWS_AS(
      prepare_cell_data(map_to_stage2(corpus), Stage::Stage2, Balancing::Balanced, 0.8, 1),
      DataError);
}

TEST_CASE("small benchmark") {
  const Dataset corpus = generate_synthetic_corpus(7, {15, 40, 30, 12});
  BenchmarkGrid grid = small_grid();
  ChatClientConfig llm;
  llm.endpoint = "mock://hash";
  grid.llm = llm;
  grid.llm_variants = {{PromptStyle::Simple, true}};
  CHECK(grid.cell_keys() ==
        std::vector<std::string>{"multinomial-nb", "decision-tree", "llm-simple", "fsbm"});

  std::size_t progress = 0;
  const auto cells = run_benchmark(corpus, grid, 42, [&](const BenchmarkCell&) { ++progress; });
  REQUIRE(cells.size() == 2 * 2 * 4);
  CHECK(progress == cells.size());
  for (const auto& c : cells) {
    CAPTURE(c.key);
    CHECK_FALSE(c.error.has_value());
    CHECK(c.seed == cell_seed(42, c.stage, c.balancing, c.key));
    CHECK(c.metrics.recall == c.metrics.accuracy);
    CHECK(c.test_distribution.total() > 0);
  }
  CHECK(cells[0].key == "multinomial-nb");
  CHECK(cells[0].stage == Stage::Stage1);
  CHECK(cells[0].balancing == Balancing::Imbalanced);
  CHECK(cells[4].balancing == Balancing::Balanced);
  CHECK(cells[8].stage == Stage::Stage2);

  const auto again = run_benchmark(corpus, grid, 42);
  CHECK(emit_report(again, ReportFormat::Csv) == emit_report(cells, ReportFormat::Csv));
  CHECK(emit_report(again, ReportFormat::Markdown) == emit_report(cells, ReportFormat::Markdown));

  grid.only = {"decision-tree"};
  CHECK(run_benchmark(corpus, grid, 42).size() == 4);
}

TEST_CASE("failed cells are recorded") {
  const Dataset corpus = generate_synthetic_corpus(7, {10, 10, 10, 10});
  BenchmarkGrid grid = small_grid();
  grid.stages = {Stage::Stage2};
  grid.balancings = {Balancing::Imbalanced};
  grid.include_fsbm = false;
  grid.classifiers = {{Algorithm::MLP, {{"hidden", 0}}, 0}, {Algorithm::MultinomialNB, {}, 0}};
  ChatClientConfig llm;
  llm.endpoint = "mock://fail";
  llm.max_retries = 0;
  grid.llm = llm;
  grid.llm_variants = {{PromptStyle::Simple, false}};
  const auto cells = run_benchmark(corpus, grid, 1);
  REQUIRE(cells.size() == 3);
  CHECK(cells[0].error.has_value());
  CHECK_FALSE(cells[1].error.has_value());
  CHECK(cells[2].key == "llm-simple-zero-shot");
  CHECK(cells[2].error.has_value());
  CHECK(cells[2].transport_failures == cells[2].test_distribution.total());

  const std::string md = emit_report(cells, ReportFormat::Markdown);
  CHECK(md.find("failed") != std::string::npos);
  const auto rows = parse_report_csv(emit_report(cells, ReportFormat::Csv));
  REQUIRE(rows.size() == 3);
  CHECK_FALSE(rows[0].error.empty());
  CHECK(rows[1].error.empty());
}

TEST_CASE("reports") {
  const std::string empty_csv = emit_report({}, ReportFormat::Csv);
  CHECK(empty_csv == "stage,balancing,classifier,accuracy,precision,recall,f_measure,error\n");
  CHECK(parse_report_csv(empty_csv).empty());
  CHECK(emit_report({}, ReportFormat::Markdown)
            .find("| Classifier | Accuracy | Precision | Recall | F-measure |") !=
        std::string::npos);

  std::vector<BenchmarkCell> cells;
  int i = 0;
  for (Stage s : {Stage::Stage1, Stage::Stage2}) {
    for (Balancing b : {Balancing::Imbalanced, Balancing::Balanced}) {
      BenchmarkCell c;
      c.stage = s;
      c.balancing = b;
      c.key = "linear-svm";
      c.display_name = "Linear SVM, \"quoted\"";
      c.metrics = {0.689 + 0.01 * i, 0.666, 0.689 + 0.01 * i, 0.674};
      cells.push_back(c);
      ++i;
    }
  }
  const std::string md = emit_report(cells, ReportFormat::Markdown);
  CHECK(md.find("## Stage 1, imbalanced data") != std::string::npos);
  CHECK(md.find("## Stage 2, balanced data") != std::string::npos);
  CHECK(md.find("| 0.689 | 0.666 | 0.689 | 0.674 |") != std::string::npos);

  const auto rows = parse_report_csv(emit_report(cells, ReportFormat::Csv));
  REQUIRE(rows.size() == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(rows[r].classifier == cells[r].display_name);
    CHECK(rows[r].metrics.accuracy == doctest::Approx(cells[r].metrics.accuracy).epsilon(1e-3));
    CHECK(rows[r].metrics.f_measure == doctest::Approx(0.674));
  }
  CHECK(rows[3].stage == "stage2");
  CHECK(rows[3].balancing == "balanced");

  CHECK_THROWS_AS(parse_report_csv("a,b\n1,2\n"), DataError);

  const auto back = cell_from_json(cell_to_json(cells[2]));
  CHECK(back.metrics == cells[2].metrics);
  CHECK(back.display_name == cells[2].display_name);
}

TEST_CASE("benchmark output files") {
  const Dataset corpus = generate_synthetic_corpus(2, {12, 20, 16, 10});
  BenchmarkGrid grid = small_grid();
  grid.include_fsbm = false;
  const auto cells = run_benchmark(corpus, grid, 3);
  const auto dir = std::filesystem::temp_directory_path() / "triage_eval_outputs";
  std::filesystem::remove_all(dir);
  const auto files = write_benchmark_outputs(cells, grid, 3, dir);
  for (const char* name : {"results_stage1_imbalanced.md", "results_stage1_balanced.csv",
                           "results_stage2_imbalanced.csv", "results_stage2_balanced.md",
                           "benchmark.json", "timings.json"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  CHECK(files.size() == 10);
  std::filesystem::remove_all(dir);
}
