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

#include "triage/bundle.hpp"

#include <fstream>
#include <sstream>

#include "triage/error.hpp"

namespace triage {

namespace {

constexpr const char* kFormat = "triage-model";
constexpr int kVersion = 1;

Stage stage_from_string(const std::string& s) {
  if (s == "stage1") return Stage::Stage1;
  if (s == "stage2") return Stage::Stage2;
  throw DataError("unknown stage '" + s + "' in model bundle");
}

}  // namespace

nlohmann::json pipeline_to_json(const TfidfPipeline& p) {
  nlohmann::json vocab_counts = nlohmann::json::object();
  for (const auto& [term, n] : p.lexicon.vocabulary()) vocab_counts[term] = n;
  return {{"config",
           {{"stopwords", p.config.enable_stopwords},
            {"lemmatize", p.config.enable_lemmatize},
            {"spellcheck", p.config.enable_spellcheck},
            {"max_edit_distance", p.config.max_edit_distance}}},
          {"lexicon",
           {{"stopwords", p.lexicon.stopwords()},
            {"lemmas", p.lexicon.lemma_map()},
            {"vocabulary", vocab_counts}}},
          {"vocabulary",
           {{"terms", p.vocabulary.terms()},
            {"doc_freq", p.vocabulary.doc_freqs()},
            {"n_docs", p.vocabulary.n_docs()}}}};
}

TfidfPipeline pipeline_from_json(const nlohmann::json& j) {
  try {
    TfidfPipeline p;
    const auto& c = j.at("config");
    p.config.enable_stopwords = c.at("stopwords").get<bool>();
    p.config.enable_lemmatize = c.at("lemmatize").get<bool>();
    p.config.enable_spellcheck = c.at("spellcheck").get<bool>();
    p.config.max_edit_distance = c.at("max_edit_distance").get<int>();
    p.config.validate();
    const auto& lx = j.at("lexicon");
    p.lexicon = Lexicon(lx.at("stopwords").get<std::set<std::string>>(),
                        lx.at("lemmas").get<std::map<std::string, std::string>>(),
                        lx.at("vocabulary").get<std::map<std::string, std::uint64_t>>());
    const auto& v = j.at("vocabulary");
    p.vocabulary = Vocabulary(v.at("terms").get<std::vector<std::string>>(),
                              v.at("doc_freq").get<std::vector<std::uint32_t>>(),
                              v.at("n_docs").get<std::uint32_t>());
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed pipeline: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed pipeline: ") + e.what());
  }
}

ModelBundle::ModelBundle(Stage stage, TfidfPipeline pipeline, TrainedModel classifier)
    : stage_(stage), pipeline_(std::move(pipeline)), classifier_(std::move(classifier)) {
  if (classifier_->n_features() != pipeline_->vocabulary.size()) {
    throw DataError("classifier expects " + std::to_string(classifier_->n_features()) +
                    " features but the vocabulary has " +
                    std::to_string(pipeline_->vocabulary.size()));
  }
  if (classifier_->n_classes() != num_classes(stage)) {
    throw DataError("classifier class count does not match " + std::string(to_string(stage)));
  }
}

ModelBundle::ModelBundle(Stage stage, FsbmModel fsbm) : stage_(stage), fsbm_(std::move(fsbm)) {
  if (fsbm_->classifier().n_classes() != num_classes(stage)) {
    throw DataError("FSBM class count does not match " + std::string(to_string(stage)));
  }
}

std::string ModelBundle::key() const {
  return fsbm_ ? "fsbm" : std::string(to_string(classifier_->spec().algorithm));
}

std::vector<double> ModelBundle::predict_proba(const std::string& text) const {
  if (fsbm_) return fsbm_->predict_proba(text);
  return classifier_->predict_proba(pipeline_->transform(text));
}

int ModelBundle::predict(const std::string& text) const {
  if (fsbm_) return fsbm_->predict(text);
  return classifier_->predict(pipeline_->transform(text));
}

nlohmann::json ModelBundle::to_json() const {
  nlohmann::json j = {{"format", kFormat}, {"version", kVersion}, {"stage", to_string(stage_)}};
  if (fsbm_) {
    j["kind"] = "fsbm";
    j["fsbm"] = fsbm_->to_json();
  } else {
    j["kind"] = "classical";
    j["pipeline"] = pipeline_to_json(*pipeline_);
    j["classifier"] = classifier_->to_json();
  }
  return j;
}

ModelBundle ModelBundle::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != kFormat) throw DataError("not a triage model bundle");
    if (j.at("version") != kVersion) {
      throw DataError("unsupported model bundle version " + j.at("version").dump());
    }
    const Stage stage = stage_from_string(j.at("stage").get<std::string>());
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "fsbm") return ModelBundle(stage, FsbmModel::from_json(j.at("fsbm")));
    if (kind == "classical") {
      return ModelBundle(stage, pipeline_from_json(j.at("pipeline")),
                         TrainedModel::from_json(j.at("classifier")));
    }
    throw DataError("unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model bundle: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed model bundle: ") + e.what());
  }
}

void ModelBundle::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << to_json().dump() << '\n';
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

ModelBundle ModelBundle::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open model " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace triage
