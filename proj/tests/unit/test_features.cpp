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
#include <sstream>

#include "oracles.hpp"
#include "triage/error.hpp"
#include "triage/features.hpp"

using namespace triage;

TEST_CASE("build_vocabulary") {
  const std::vector<TokenList> docs{{"a", "b"}, {"b", "c"}};
  const Vocabulary v = build_vocabulary(docs);
  CHECK(v.terms() == std::vector<std::string>{"a", "b", "c"});
  CHECK(v.doc_freq("a") == 1);
  CHECK(v.doc_freq("b") == 2);
  CHECK(v.doc_freq("c") == 1);
  CHECK(v.n_docs() == 2);
  CHECK(*v.column("c") == 2);
  CHECK_FALSE(v.column("z").has_value());

  CHECK(build_vocabulary(docs, 2).terms() == std::vector<std::string>{"b"});
  const Vocabulary one = build_vocabulary({{"a"}});
  CHECK(one.terms() == std::vector<std::string>{"a"});
  CHECK(one.n_docs() == 1);
  CHECK_THROWS_AS(build_vocabulary({}), std::invalid_argument);
}

TEST_CASE("idf") {
  const Vocabulary v = build_vocabulary({{"x", "y"}, {"x", "z"}, {"x", "y"}});
  CHECK(idf("x", v) == 1.0);
  CHECK(idf("y", v) == doctest::Approx(1.287682).epsilon(1e-6));
  CHECK(idf("z", v) == doctest::Approx(1.693147).epsilon(1e-6));
  CHECK(idf("z", v) > idf("y", v));
  CHECK(idf("y", v) > idf("x", v));
  CHECK_THROWS_AS(idf("w", v), std::out_of_range);
}

TEST_CASE("tfidf vector of the worked corpus") {
  const std::vector<TokenList> docs{
      {"lesion", "lesion", "cortex"}, {"lesion", "tooth"}, {"tooth", "root"}};
  const Vocabulary v = build_vocabulary(docs);
  const SparseVector d1 = tfidf_vector(docs[0], v);
  CHECK(d1.dim() == 4);
  CHECK(d1.at(*v.column("lesion")) == doctest::Approx(0.835591).epsilon(1e-6));
  CHECK(d1.at(*v.column("cortex")) == doctest::Approx(0.549352).epsilon(1e-6));
  CHECK(std::abs(d1.norm() - 1.0) <= 1e-9);

  const SparseVector oov = tfidf_vector({"unknown", "words"}, v);
  CHECK(oov.nnz() == 0);
  CHECK(oov.dim() == 4);
}

TEST_CASE("tfidf matches the dense oracle on random corpora") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto docs = oracle::random_corpus(rng);
    bool any = false;
    for (const auto& d : docs) any = any || !d.empty();
    if (!any) continue;
    const Vocabulary v = build_vocabulary(docs);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto expected = oracle::dense_tfidf(docs, i);
      const auto got = tfidf_vector(docs[i], v).to_dense();
      REQUIRE(got.size() == expected.size());
      for (std::size_t c = 0; c < got.size(); ++c) CHECK(std::abs(got[c] - expected[c]) <= 1e-9);
    }
  }
}

TEST_CASE("sparse vector invariants") {
  const SparseVector s(5, {{3, 2.0}, {1, 0.0}, {0, -1.0}});
  CHECK(s.nnz() == 2);
  CHECK(s.at(1) == 0.0);
  CHECK(s.to_dense() == std::vector<double>{-1.0, 0.0, 0.0, 2.0, 0.0});
  CHECK_THROWS_AS(SparseVector(2, {{2, 1.0}}), std::out_of_range);
  CHECK_THROWS_AS(SparseVector(4, {{1, 1.0}, {1, 2.0}}), std::invalid_argument);
}

TEST_CASE("vectorize_dataset") {
  std::vector<Report> reports{{"a", "Lesion lesion cortex", SeverityClass(1)},
                              {"b", "Lesion tooth", SeverityClass(2)},
                              {"c", "Tooth root", SeverityClass(3)},
                              {"d", "Lesion tooth", SeverityClass(4)}};
  const Dataset train(reports, Stage::Stage1, Provenance::Original);
  PipelineConfig plain{false, false, false, 2};
  const auto [x, pipeline] = vectorize_dataset(train, plain, Lexicon::defaults());
  CHECK(x.size() == 4);
  CHECK(x.dim == pipeline.vocabulary.size());
  for (const auto& row : x.rows) CHECK(row.dim() == x.dim);
  CHECK(x.rows[1] == x.rows[3]);

  // The vocabulary comes from training text only.
  const SparseVector test = pipeline.transform("mandible lesion");
  CHECK(test.nnz() == 1);
  CHECK(test.at(*pipeline.vocabulary.column("lesion")) == doctest::Approx(1.0));
  CHECK(pipeline.transform("entirely unseen words").nnz() == 0);

  CHECK_THROWS_AS(vectorize_dataset(Dataset{}, plain, Lexicon::defaults()), DataError);
}

TEST_CASE("vocabulary dump") {
  const Vocabulary v = build_vocabulary({{"a", "b"}, {"b"}});
  std::ostringstream out;
  write_vocabulary_tsv(out, v);
  CHECK(out.str() == "a\t0\t1\nb\t1\t2\n");
}
