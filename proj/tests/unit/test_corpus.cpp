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

#include <set>
#include <sstream>

#include "triage/corpus.hpp"
#include "triage/error.hpp"

using namespace triage;

namespace {

Dataset make_dataset(const std::vector<int>& labels) {
  std::vector<Report> reports;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    reports.push_back(
        {"r" + std::to_string(i), "report " + std::to_string(i), SeverityClass(labels[i])});
  }
  return Dataset(std::move(reports), Stage::Stage1, Provenance::Original);
}

std::set<std::string> ids(const Dataset& d) {
  std::set<std::string> out;
  for (const auto& r : d.examples()) out.insert(r.id);
  return out;
}

const std::array<std::size_t, 4> kTable4{67, 354, 219, 64};

}  // namespace

TEST_CASE("csv record from the taxonomy examples") {
  std::istringstream in(
      "id,text,label\nr1,\"No erosive lesion can be detected in ant. maxilla.\",4\n");
  const Dataset d = parse_corpus(in, CorpusFormat::Csv);
  REQUIRE(d.size() == 1);
  CHECK(d[0].id == "r1");
  CHECK(d[0].text == "No erosive lesion can be detected in ant. maxilla.");
  CHECK(d[0].severity.value() == 4);
  CHECK(d.stage() == Stage::Stage1);
  CHECK(d.provenance() == Provenance::Original);
}

TEST_CASE("header-only csv is an empty dataset") {
  std::istringstream in("id,text,label\n");
  CHECK(parse_corpus(in, CorpusFormat::Csv).empty());
}

TEST_CASE("bad records report their line") {
  SUBCASE("label 5") {
    std::istringstream in("id,text,label\na,fine,1\nb,\"bad label\",5\n");
    try {
      parse_corpus(in, CorpusFormat::Csv);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("duplicate id") {
    std::istringstream in("id,text,label\na,x,1\na,y,2\n");
    CHECK_THROWS_AS(parse_corpus(in, CorpusFormat::Csv), DataError);
  }
  SUBCASE("blank text") {
    std::istringstream in("{\"id\":\"a\",\"text\":\"  \",\"label\":1}\n");
    CHECK_THROWS_AS(parse_corpus(in, CorpusFormat::Jsonl), DataError);
  }
  SUBCASE("malformed jsonl") {
    std::istringstream in("{\"id\":\"a\",\"text\":\"x\",\"label\":1}\n{oops\n");
    try {
      parse_corpus(in, CorpusFormat::Jsonl);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(e.line() == 2);
    }
  }
}

TEST_CASE("csv and jsonl round trip") {
  const Dataset d = generate_synthetic_corpus(3, {3, 2, 2, 1});
  for (auto format : {CorpusFormat::Csv, CorpusFormat::Jsonl}) {
    std::stringstream buf;
    write_corpus(buf, d, format);
    const Dataset back = parse_corpus(buf, format);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(back[i].id == d[i].id);
      CHECK(back[i].text == d[i].text);
      CHECK(back[i].severity == d[i].severity);
    }
  }
}

TEST_CASE("stage-2 mapping") {
  const Dataset d = make_dataset({1, 2, 3, 4});
  const Dataset s2 = map_to_stage2(d);
  CHECK(s2.stage() == Stage::Stage2);
  CHECK(s2.labels() == std::vector<int>{0, 0, 1, 1});
  CHECK(ids(s2) == ids(d));
  CHECK_THROWS_AS(map_to_stage2(s2), std::invalid_argument);

  const Dataset big = generate_synthetic_corpus(1, kTable4);
  CHECK(class_distribution(map_to_stage2(big)).counts == std::vector<std::size_t>{421, 283});
}

TEST_CASE("stratified split sizes") {
  CHECK(stratified_test_count(10, 0.8) == 2);
  CHECK(stratified_test_count(2, 0.8) == 1);

  std::vector<int> labels;
  for (int c = 1; c <= 4; ++c) labels.insert(labels.end(), 10, c);
  const auto split = stratified_split(make_dataset(labels), 0.8, 5);
  CHECK(class_distribution(split.train).counts == std::vector<std::size_t>{8, 8, 8, 8});
  CHECK(class_distribution(split.test).counts == std::vector<std::size_t>{2, 2, 2, 2});

  const Dataset big = generate_synthetic_corpus(9, kTable4);
  const auto s = stratified_split(big, 0.8, 42);
  CHECK(class_distribution(s.test).counts == std::vector<std::size_t>{13, 70, 43, 12});
  CHECK(class_distribution(s.train).counts == std::vector<std::size_t>{54, 284, 176, 52});
}

TEST_CASE("stratified split partitions and is deterministic") {
  const Dataset d = generate_synthetic_corpus(4, {7, 11, 5, 3});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = stratified_split(d, 0.8, seed);
    const auto b = stratified_split(d, 0.8, seed);
    CHECK(ids(a.train) == ids(b.train));
    const auto tr = ids(a.train), te = ids(a.test);
    std::set<std::string> both = tr;
    both.insert(te.begin(), te.end());
    CHECK(both.size() == tr.size() + te.size());
    CHECK(both == ids(d));
  }
  CHECK_THROWS_AS(stratified_split(make_dataset({1, 2, 2}), 0.8, 0), DataError);
  CHECK_THROWS_AS(stratified_split(d, 1.0, 0), std::invalid_argument);
}

TEST_CASE("random oversampling") {
  const Dataset big = generate_synthetic_corpus(2, kTable4);
  const Dataset o = random_oversample(big, 7);
  CHECK(class_distribution(o).counts == std::vector<std::size_t>{354, 354, 354, 354});
  CHECK(o.size() == 1416);
  CHECK(o.provenance() == Provenance::Oversampled);

  // Every original id exactly once; duplicates point back to their class.
  std::multiset<std::string> originals;
  for (const auto& r : o.examples()) {
    if (r.id.find("#dup") == std::string::npos) {
      originals.insert(r.id);
    } else {
      bool found = false;
      for (const auto& src : big.examples()) {
        if (src.id == base_id(r.id)) {
          CHECK(src.text == r.text);
          CHECK(src.severity == r.severity);
          found = true;
        }
      }
      CHECK(found);
    }
  }
  CHECK(originals.size() == big.size());
  CHECK(std::set<std::string>(originals.begin(), originals.end()).size() == big.size());

  const Dataset s2 = map_to_stage2(big);
  CHECK(class_distribution(random_oversample(s2, 1)).counts == std::vector<std::size_t>{421, 421});

  const Dataset even = make_dataset({1, 1, 2, 2, 3, 3, 4, 4});
  CHECK(ids(random_oversample(even, 3)) == ids(even));

  CHECK(class_distribution(random_oversample(o, 99)) == class_distribution(o));
  CHECK(ids(random_oversample(big, 7)) == ids(o));
  CHECK_THROWS_AS(random_oversample(Dataset{}, 1), DataError);
}

TEST_CASE("class distribution") {
  CHECK(class_distribution(Dataset{}).counts == std::vector<std::size_t>{0, 0, 0, 0});
  CHECK(class_distribution(make_dataset({2})).counts == std::vector<std::size_t>{0, 1, 0, 0});
  const auto d = class_distribution(generate_synthetic_corpus(5, kTable4));
  CHECK(d.counts == std::vector<std::size_t>{67, 354, 219, 64});
  CHECK(d.total() == 704);
}

TEST_CASE("synthetic corpus") {
  CHECK(generate_synthetic_corpus(1, {0, 0, 0, 0}).empty());
  const Dataset a = generate_synthetic_corpus(11, {5, 5, 5, 5});
  const Dataset b = generate_synthetic_corpus(11, {5, 5, 5, 5});
  CHECK(a.texts() == b.texts());
  CHECK(a.provenance() == Provenance::Synthetic);
  CHECK(a.texts() != generate_synthetic_corpus(12, {5, 5, 5, 5}).texts());
}
