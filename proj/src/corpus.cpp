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

#include "triage/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "triage/error.hpp"
#include "triage/random.hpp"

namespace triage {

std::string_view to_string(Stage stage) {
  return stage == Stage::Stage1 ? "stage1" : "stage2";
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::Original: return "original";
    case Provenance::Oversampled: return "oversampled";
    case Provenance::Synthetic: return "synthetic";
  }
  return "unknown";
}

int num_classes(Stage stage) {
  return stage == Stage::Stage1 ? 4 : 2;
}

std::string_view class_description(Stage stage, int index) {
  static constexpr std::string_view kStage1[] = {
      "Issues require urgent attention",
      "Treatment can be delayed",
      "The problem is not urgent (optional treatment)",
      "Conditions are entirely normal (no treatment required)",
  };
  static constexpr std::string_view kStage2[] = {
      "Urgent (compulsory treatment)",
      "Non-urgent (no compulsory treatment)",
  };
  if (index < 0 || index >= num_classes(stage)) {
    throw std::out_of_range("class index out of range for stage");
  }
  return stage == Stage::Stage1 ? kStage1[index] : kStage2[index];
}

SeverityClass::SeverityClass(int value) : value_(value) {
  if (!valid(value)) {
    throw DataError("severity label must be in {1,2,3,4}, got " + std::to_string(value));
  }
}

int SeverityClass::index(Stage stage) const {
  if (stage == Stage::Stage1) return value_ - 1;
  return value_ <= 2 ? 0 : 1;
}

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

}  // namespace

Dataset::Dataset(std::vector<Report> examples, Stage stage, Provenance provenance)
    : examples_(std::move(examples)), stage_(stage), provenance_(provenance) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(examples_.size());
  for (const auto& r : examples_) {
    if (r.id.empty()) throw DataError("report with empty id");
    if (!seen.insert(r.id).second) throw DataError("duplicate id '" + r.id + "'");
    if (is_blank(r.text)) throw DataError("report '" + r.id + "' has empty text");
  }
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) out.push_back(label(i));
  return out;
}

std::vector<std::string> Dataset::texts() const {
  std::vector<std::string> out;
  out.reserve(examples_.size());
  for (const auto& r : examples_) out.push_back(r.text);
  return out;
}

std::size_t ClassDistribution::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC-4180 reader. Quoted fields may span lines; `line` is where the record
// starts.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  bool next(CsvRecord& rec) {
    rec.fields.clear();
    int c = in_.peek();
    if (c == EOF) return false;
    rec.line = line_;
    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    while (true) {
      c = in_.get();
      if (c == EOF) {
        if (quoted) throw DataError("unterminated quoted field", rec.line);
        rec.fields.push_back(std::move(field));
        return true;
      }
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(static_cast<char>(c));
        }
        continue;
      }
      if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
      } else if (c == '"') {
        if (!field.empty() || field_was_quoted) {
          throw DataError("stray quote inside unquoted field", rec.line);
        }
        quoted = true;
        field_was_quoted = true;
      } else if (c == '\r') {
        if (in_.peek() == '\n') in_.get();
        ++line_;
        rec.fields.push_back(std::move(field));
        return true;
      } else if (c == '\n') {
        ++line_;
        rec.fields.push_back(std::move(field));
        return true;
      } else {
        if (field_was_quoted) {
          throw DataError("characters after closing quote", rec.line);
        }
        field.push_back(static_cast<char>(c));
      }
    }
  }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
};

int parse_label(std::string_view s, std::size_t line) {
  if (s.empty() || s.size() > 3 ||
      !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw DataError("label '" + std::string(s) + "' is not an integer in {1,2,3,4}", line);
  }
  const int v = std::stoi(std::string(s));
  if (!SeverityClass::valid(v)) {
    throw DataError("label " + std::to_string(v) + " outside {1,2,3,4}", line);
  }
  return v;
}

void add_report(std::vector<Report>& out, std::unordered_set<std::string>& ids, std::string id,
                std::string text, int label, std::size_t line) {
  if (id.empty()) throw DataError("missing id", line);
  if (!ids.insert(id).second) throw DataError("duplicate id '" + id + "'", line);
  if (is_blank(text)) throw DataError("empty text for id '" + id + "'", line);
  out.push_back(Report{std::move(id), std::move(text), SeverityClass(label)});
}

Dataset parse_csv(std::istream& in) {
  CsvReader reader(in);
  CsvRecord rec;
  if (!reader.next(rec)) throw DataError("missing header row", 1);
  if (!rec.fields.empty() && rec.fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    rec.fields[0].erase(0, 3);
  }
  int col_id = -1, col_text = -1, col_label = -1;
  for (std::size_t i = 0; i < rec.fields.size(); ++i) {
    const auto& name = rec.fields[i];
    if (name == "id")
      col_id = static_cast<int>(i);
    else if (name == "text")
      col_text = static_cast<int>(i);
    else if (name == "label")
      col_label = static_cast<int>(i);
    else
      throw DataError("unexpected column '" + name + "'", rec.line);
  }
  if (col_id < 0 || col_text < 0 || col_label < 0) {
    throw DataError("header must contain id,text,label", rec.line);
  }
  const std::size_t ncols = rec.fields.size();
  std::vector<Report> reports;
  std::unordered_set<std::string> ids;
  while (reader.next(rec)) {
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // blank line
    if (rec.fields.size() != ncols) {
      throw DataError("malformed row: expected " + std::to_string(ncols) + " fields, got " +
                          std::to_string(rec.fields.size()),
                      rec.line);
    }
    const int label = parse_label(rec.fields[col_label], rec.line);
    add_report(reports, ids, std::move(rec.fields[col_id]), std::move(rec.fields[col_text]), label,
               rec.line);
  }
  return Dataset(std::move(reports), Stage::Stage1, Provenance::Original);
}

Dataset parse_jsonl(std::istream& in) {
  std::vector<Report> reports;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j.contains("label")) {
      throw DataError("malformed row: object with id, text, label required", lineno);
    }
    const auto& jid = j["id"];
    const auto& jtext = j["text"];
    const auto& jlabel = j["label"];
    if (!jid.is_string() || !jtext.is_string()) {
      throw DataError("malformed row: id and text must be strings", lineno);
    }
    if (!jlabel.is_number_integer()) {
      throw DataError("label must be an integer in {1,2,3,4}", lineno);
    }
    const auto v = jlabel.get<long long>();
    if (v < 1 || v > 4) {
      throw DataError("label " + std::to_string(v) + " outside {1,2,3,4}", lineno);
    }
    add_report(reports, ids, jid.get<std::string>(), jtext.get<std::string>(), static_cast<int>(v),
               lineno);
  }
  return Dataset(std::move(reports), Stage::Stage1, Provenance::Original);
}

std::string csv_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += "\"\"";
    else
      out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Dataset parse_corpus(std::istream& in, CorpusFormat format) {
  return format == CorpusFormat::Csv ? parse_csv(in) : parse_jsonl(in);
}

Dataset load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path.string() + "'");
  return parse_corpus(in, format);
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? CorpusFormat::Jsonl : CorpusFormat::Csv;
}

void write_corpus(std::ostream& out, const Dataset& dataset, CorpusFormat format) {
  if (format == CorpusFormat::Csv) {
    out << "id,text,label\n";
    for (const auto& r : dataset.examples()) {
      out << csv_quote(r.id) << ',' << csv_quote(r.text) << ',' << r.severity.value() << '\n';
    }
    return;
  }
  for (const auto& r : dataset.examples()) {
    nlohmann::json j = {{"id", r.id}, {"text", r.text}, {"label", r.severity.value()}};
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Stages, splitting and balancing

Dataset map_to_stage2(const Dataset& dataset) {
  if (dataset.stage() == Stage::Stage2) {
    throw std::invalid_argument("dataset is already mapped to stage 2");
  }
  return Dataset(dataset.examples(), Stage::Stage2, dataset.provenance());
}

ClassDistribution class_distribution(const Dataset& dataset) {
  ClassDistribution d;
  d.counts.assign(static_cast<std::size_t>(dataset.num_classes()), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ++d.counts[static_cast<std::size_t>(dataset.label(i))];
  }
  return d;
}

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const Dataset& dataset) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.num_classes()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.label(i))].push_back(i);
  }
  return by_class;
}

}  // namespace

std::size_t stratified_test_count(std::size_t class_size, double train_fraction) {
  // The epsilon absorbs representation error, e.g. 10 * (1 - 0.8) = 1.999...
  const double raw = static_cast<double>(class_size) * (1.0 - train_fraction);
  auto n = static_cast<std::size_t>(std::floor(raw + 1e-9));
  n = std::max<std::size_t>(n, 1);
  if (class_size >= 1) n = std::min(n, class_size - 1);
  return n;
}

TrainTestSplit stratified_split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  auto by_class = members_by_class(dataset);
  std::vector<char> in_test(dataset.size(), 0);
  Rng rng(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < 2) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                      " examples; stratified split needs at least 2");
    }
    rng.shuffle(members);
    const std::size_t n_test = stratified_test_count(members.size(), train_fraction);
    for (std::size_t k = 0; k < n_test; ++k) in_test[members[k]] = 1;
  }
  std::vector<Report> train, test;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_test[i] ? test : train).push_back(dataset[i]);
  }
  return {Dataset(std::move(train), dataset.stage(), dataset.provenance()),
          Dataset(std::move(test), dataset.stage(), dataset.provenance())};
}

std::string_view base_id(std::string_view id) {
  const auto pos = id.find("#dup");
  return pos == std::string_view::npos ? id : id.substr(0, pos);
}

Dataset random_oversample(const Dataset& dataset, std::uint64_t seed) {
  if (dataset.empty()) throw DataError("cannot oversample an empty dataset");
  const auto by_class = members_by_class(dataset);
  std::size_t majority = 0;
  for (const auto& m : by_class) {
    if (m.empty()) throw DataError("cannot oversample: a class has no examples");
    majority = std::max(majority, m.size());
  }
  std::unordered_set<std::string> ids;
  for (const auto& r : dataset.examples()) ids.insert(r.id);

  std::vector<Report> out = dataset.examples();
  Rng rng(seed);
  std::size_t dup_counter = 0;
  for (const auto& members : by_class) {
    for (std::size_t k = members.size(); k < majority; ++k) {
      const Report& src = dataset[members[rng.uniform_index(members.size())]];
      std::string id;
      do {
        id = std::string(base_id(src.id)) + "#dup" + std::to_string(++dup_counter);
      } while (ids.count(id));
      ids.insert(id);
      out.push_back(Report{std::move(id), src.text, src.severity});
    }
  }
  return Dataset(std::move(out), dataset.stage(), Provenance::Oversampled);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

// {T} is replaced by a tooth number, {R} by a jaw region.
constexpr std::string_view kUrgent[] = {
    "There is a mixed lesion with poorly-defined border in {R}.",
    "It caused loss of continuity of the buccal and lingual cortices and alveolar crest.",
    "R/O sarcomatosis lesions such as chondrosarcoma.",
    "Osteomyelitis in the healing site of the previous surgery is suspected.",
    "A large destructive radiolucent lesion with cortical perforation is seen in {R}.",
    "Infected fibro-osseous lesion should be considered in the DDX.",
    "Malignant tumor with moth-eaten margins involving {R}.",
    "Extensive bone destruction extending to the inferior alveolar canal.",
    "Aggressive lesion with periosteal reaction in {R}.",
    "Pathologic fracture of the mandibular cortex is evident.",
};

constexpr std::string_view kDelayable[] = {
    "The tooth #{T} is in inverted fashion.",
    "The tooth is tightly attached to the buccal and palatal cortices.",
    "The blunting in 1/3 middle of the root of tooth #{T} is detected.",
    "There is association between incisive canal and tooth #{T}.",
    "Impacted tooth #{T} is in close contact with the mandibular canal.",
    "Periapical radiolucency around the root of tooth #{T} is seen.",
    "External root resorption of tooth #{T} is detected.",
    "Horizontal impaction of tooth #{T} with follicular enlargement.",
    "Widening of the follicular space of tooth #{T} is noted.",
};

constexpr std::string_view kOptional[] = {
    "There is a mesiodens invertedly positioned in the palatal side of the tooth #{T}.",
    "No root resorption of the adjacent teeth is found.",
    "There is no other supernumerary or missing tooth in the jaws.",
    "A supernumerary tooth is seen adjacent to tooth #{T}.",
    "Mild thickening of the sinus mucosa in {R}.",
    "Retained root tip in {R} without associated pathology.",
    "Small idiopathic osteosclerosis near the apex of tooth #{T}.",
    "Congenitally missing tooth #{T} is observed.",
    "Torus mandibularis is present bilaterally.",
};

constexpr std::string_view kNormal[] = {
    "No erosive lesion can be detected in {R}.",
    "No abnormality is seen in {R}.",
    "The cortices are intact and continuous.",
    "Normal trabecular pattern is observed in {R}.",
    "No pathologic finding is observed.",
    "The alveolar bone height is within normal limits.",
    "The sinus floor and nasal floor appear normal.",
    "No sign of fracture or resorption is detected.",
};

constexpr std::string_view kPreamble[] = {
    "CBCT image was prepared for the patient based on your order.",
    "As you see based on the images:",
    "Based on CBCT images:",
    "Evaluation of {R} was requested.",
    "CBCT of the patient was reviewed.",
};

constexpr std::string_view kRegions[] = {
    "anterior maxilla",     "posterior maxilla",     "anterior mandible", "posterior mandible",
    "left maxillary sinus", "right mandibular body", "ant. maxilla",      "the symphysis region",
};

template <std::size_t N>
std::string_view pick(Rng& rng, const std::string_view (&arr)[N]) {
  return arr[rng.uniform_index(N)];
}

std::string fill_slots(std::string_view tmpl, Rng& rng) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl.compare(i, 3, "{T}") == 0) {
      out += std::to_string(1 + rng.uniform_index(32));
      i += 2;
    } else if (tmpl.compare(i, 3, "{R}") == 0) {
      out += pick(rng, kRegions);
      i += 2;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

std::string_view finding_sentence(int severity, Rng& rng) {
  switch (severity) {
    case 1: return pick(rng, kUrgent);
    case 2: return pick(rng, kDelayable);
    case 3: return pick(rng, kOptional);
    default: return pick(rng, kNormal);
  }
}

int partner_severity(int severity) {
  static constexpr int kPartner[] = {0, 2, 1, 4, 3};
  return kPartner[severity];
}

}  // namespace

Dataset generate_synthetic_corpus(std::uint64_t seed, const std::array<std::size_t, 4>& counts,
                                  const SyntheticOptions& options) {
  if (options.min_findings < 1 || options.max_findings < options.min_findings) {
    throw std::invalid_argument("invalid synthetic finding range");
  }
  Rng rng(seed);
  std::vector<int> severities;
  for (int s = 1; s <= 4; ++s) {
    severities.insert(severities.end(), counts[static_cast<std::size_t>(s - 1)], s);
  }
  rng.shuffle(severities);

  std::vector<Report> reports;
  reports.reserve(severities.size());
  const auto span = static_cast<std::size_t>(options.max_findings - options.min_findings + 1);
  for (std::size_t i = 0; i < severities.size(); ++i) {
    const int severity = severities[i];
    std::string text;
    auto append = [&text](const std::string& sentence) {
      if (!text.empty()) text.push_back(' ');
      text += sentence;
    };
    if (rng.uniform() < options.preamble_rate) append(fill_slots(pick(rng, kPreamble), rng));
    const int findings = options.min_findings + static_cast<int>(rng.uniform_index(span));
    for (int f = 0; f < findings; ++f) {
      int source = severity;
      if (rng.uniform() >= options.purity) {
        if (rng.uniform() < options.partner_share) {
          source = partner_severity(severity);
        } else {
          // One of the two classes in the other stage-2 group.
          source = severity <= 2 ? 3 + static_cast<int>(rng.uniform_index(2))
                                 : 1 + static_cast<int>(rng.uniform_index(2));
        }
      }
      append(fill_slots(finding_sentence(source, rng), rng));
    }
    char id[32];
    std::snprintf(id, sizeof id, "syn%06zu", i + 1);
    reports.push_back(Report{id, std::move(text), SeverityClass(severity)});
  }
  return Dataset(std::move(reports), Stage::Stage1, Provenance::Synthetic);
}

}  // namespace triage
