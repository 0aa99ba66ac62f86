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

#include "triage/llm_icl.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "triage/random.hpp"

namespace triage {

namespace {

constexpr std::string_view kSimpleInstruction =
    "Assess the magnitude of dental and oral health concerns by analyzing this clinical note. "
    "Provide a numerical label ({labels}), where:";

constexpr std::string_view kComplicatedInstruction[] = {
    "We have images related to Cone-beam computed tomography systems (CBCT) and a report is "
    "prepared for each image. Now we want to determine how bad the patient's condition is based "
    "on these reports.",
    R"(For example, when a patient's report is as follows "CBCT image was prepared for the patient based on your order. As you see based on the images: There is a mixed lesion with a poorly-defined border in the anterior part of the mandible. It caused loss of continuity of the buccal and lingual cortices and alveolar crest. DDX: Osteomyelitis in the healing site of the previous surgery Infected fibro-osseous lesion R/O Sarcomatosis lesions such as chondrosarcoma")",
    "Due to the presence of mixed lesion, the patient's condition is not good and he should be "
    "treated immediately In other words, the condition of the patient is emergency.",
    R"(But when a patient's report is as follows: "Based on CBCT images: As you see in images no erosive lesion can be detected in ant. maxilla.")",
    "This means that the patient is in a good condition and does not need urgent attention "
    "because no erosive lesion has been observed in the patient's report.",
    "According to the above examples, receive the patient's text report as input and provide a "
    "numerical label ({labels}), where:",
};

constexpr std::string_view kUrgentDetail =
    R"(urgent This designation is assigned when there is a critical and time-sensitive issue that requires immediate attention and intervention. Examples of situations warranting a label of "0" include significant complications, potential risks to the patient's health, or conditions that may rapidly worsen if not addressed promptly.)";

constexpr std::string_view kNonUrgentDetail =
    "non-urgent This label is assigned when the observed issues, while noteworthy, do not pose an "
    "immediate threat to the patient's health and can be addressed over time with monitoring or "
    "future intervention. It indicates that the situation does not demand urgent action but may "
    "still require attention, treatment, or follow-up care in the long run.";

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string label_list(Stage stage) {
  return stage == Stage::Stage2 ? "0 or 1" : "0, 1, 2 or 3";
}

bool starts_with_word(std::string_view s, std::string_view word) {
  if (s.substr(0, word.size()) != word) return false;
  return s.size() == word.size() || s[word.size()] == ' ';
}

bool is_digit(char c) {
  return c >= '0' && c <= '9';
}
bool is_word(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

std::string_view to_string(PromptStyle style) {
  return style == PromptStyle::Simple ? "simple" : "complicated";
}

PromptStyle prompt_style_from_string(std::string_view s) {
  if (s == "simple") return PromptStyle::Simple;
  if (s == "complicated") return PromptStyle::Complicated;
  throw std::invalid_argument("unknown prompt style '" + std::string(s) + "'");
}

PromptTemplate PromptTemplate::standard(PromptStyle style, Stage stage, std::size_t slots) {
  PromptTemplate t;
  t.style = style;
  t.stage = stage;
  t.demonstration_slot_count = slots;
  const std::string labels = label_list(stage);
  if (style == PromptStyle::Simple) {
    t.instruction = replace_all(std::string(kSimpleInstruction), "{labels}", labels);
  } else {
    std::string text;
    for (auto p : kComplicatedInstruction) {
      if (!text.empty()) text += "\n\n";
      text += p;
    }
    t.instruction = replace_all(std::move(text), "{labels}", labels);
  }
  if (stage == Stage::Stage2) {
    if (style == PromptStyle::Simple) {
      t.label_legend = {{0, "urgent"}, {1, "non-urgent"}};
    } else {
      t.label_legend = {{0, std::string(kUrgentDetail)}, {1, std::string(kNonUrgentDetail)}};
    }
  } else {
    for (int k = 0; k < num_classes(stage); ++k) {
      t.label_legend[k] = std::string(class_description(stage, k));
    }
  }
  return t;
}

void PromptTemplate::validate() const {
  const int n = num_classes(stage);
  if (label_legend.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("prompt legend must have " + std::to_string(n) + " entries");
  }
  for (int k = 0; k < n; ++k) {
    if (label_legend.count(k) == 0) {
      throw std::invalid_argument("prompt legend misses label " + std::to_string(k));
    }
  }
  if (stage == Stage::Stage2 && (!starts_with_word(label_legend.at(0), "urgent") ||
                                 !starts_with_word(label_legend.at(1), "non-urgent"))) {
    throw std::invalid_argument("stage-2 legend must be 0: urgent, 1: non-urgent");
  }
}

std::string build_prompt(const PromptTemplate& tmpl, const std::vector<Demonstration>& shots,
                         const std::string& query) {
  tmpl.validate();
  if (shots.size() != tmpl.demonstration_slot_count) {
    throw std::invalid_argument("template expects " +
                                std::to_string(tmpl.demonstration_slot_count) +
                                " demonstrations, got " + std::to_string(shots.size()));
  }
  const int n = num_classes(tmpl.stage);
  std::string out = tmpl.instruction;
  out += '\n';
  for (const auto& [k, desc] : tmpl.label_legend) {
    out += std::to_string(k) + ": " + desc + "\n";
  }
  out += '\n';
  for (const auto& shot : shots) {
    if (shot.label < 0 || shot.label >= n) {
      throw std::invalid_argument("demonstration label " + std::to_string(shot.label) +
                                  " is not valid for " + std::string(to_string(tmpl.stage)));
    }
    out += "note: " + shot.text + "\nlabel: " + std::to_string(shot.label) + "\n\n";
  }
  out += "note: " + query + "\nlabel:";
  return out;
}

std::optional<int> parse_label(std::string_view s, Stage stage) {
  const int n = num_classes(stage);
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    const std::size_t end = i;
    // Standalone: not glued to a word, not a sign, not part of a decimal.
    if (start > 0) {
      const char p = s[start - 1];
      if (is_word(p) || p == '-' || p == '+') continue;
      if (p == '.' && start > 1 && is_digit(s[start - 2])) continue;
    }
    if (end < s.size()) {
      const char q = s[end];
      if (is_word(q)) continue;
      if (q == '.' && end + 1 < s.size() && is_digit(s[end + 1])) continue;
    }
    if (end - start > 3) continue;
    const int v = std::stoi(std::string(s.substr(start, end - start)));
    if (v < n) return v;
  }
  return std::nullopt;
}

std::vector<Demonstration> select_demonstrations(const Dataset& train, std::uint64_t seed) {
  const int k = train.num_classes();
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < train.size(); ++i) {
    by_class[static_cast<std::size_t>(train.label(i))].push_back(i);
  }
  Rng rng(seed);
  std::vector<Demonstration> out;
  for (int c = 0; c < k; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) {
      throw std::invalid_argument("no training example for class " + std::to_string(c));
    }
    out.push_back({train[members[rng.uniform_index(members.size())]].text, c});
  }
  return out;
}

void ChatClientConfig::validate() const {
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  if (!(timeout_seconds > 0.0)) throw std::invalid_argument("timeout must be > 0");
  if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
  if (!(requests_per_second >= 0.0)) throw std::invalid_argument("rate limit must be >= 0");
  if (endpoint.empty()) throw std::invalid_argument("chat endpoint is empty");
}

// ---------------------------------------------------------------------------
// Mock endpoints

namespace {

HttpResponse chat_reply(const std::string& content) {
  nlohmann::json j = {
      {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}};
  return {200, j.dump()};
}

std::string prompt_of(const HttpRequest& req) {
  return nlohmann::json::parse(req.body).at("messages").at(0).at("content").get<std::string>();
}

// Deterministic stand-in for a model: hashes the query and answers in a
// handful of phrasings, occasionally without a usable label.
std::string hash_answer(const std::string& prompt) {
  const auto first_note = prompt.find("\nnote: ");
  std::size_t labels = 0;
  std::size_t pos = 0;
  while (true) {
    const auto nl = prompt.find('\n', pos);
    if (nl == std::string::npos || nl >= first_note) break;
    const auto line = std::string_view(prompt).substr(nl + 1);
    if (!line.empty() && is_digit(line[0]) && line.size() > 1 && line[1] == ':') ++labels;
    pos = nl + 1;
  }
  if (labels == 0) labels = 2;
  const auto q = prompt.rfind("note: ");
  const std::uint64_t h = splitmix64(fnv1a64(prompt.substr(q == std::string::npos ? 0 : q)));
  const auto label = std::to_string((h >> 8) % labels);
  switch (h % 8) {
    case 0: return "I cannot determine this.";
    case 1: return "The answer is " + label + ".";
    case 2: return "label: " + label;
    default: return label;
  }
}

}  // namespace

std::shared_ptr<HttpTransport> make_chat_transport(const std::string& endpoint) {
  constexpr std::string_view kFixed = "mock://fixed/";
  if (endpoint == "mock://echo") {
    return std::make_shared<CallbackTransport>(
        [](const HttpRequest& r) { return chat_reply(prompt_of(r)); });
  }
  if (endpoint == "mock://hash") {
    return std::make_shared<CallbackTransport>(
        [](const HttpRequest& r) { return chat_reply(hash_answer(prompt_of(r))); });
  }
  if (endpoint == "mock://fail") {
    return std::make_shared<CallbackTransport>([](const HttpRequest&) -> HttpResponse {
      throw TransportError("mock endpoint refused the connection");
    });
  }
  if (endpoint.rfind(kFixed, 0) == 0) {
    const std::string text = endpoint.substr(kFixed.size());
    return std::make_shared<CallbackTransport>(
        [text](const HttpRequest&) { return chat_reply(text); });
  }
  if (endpoint.rfind("mock://", 0) == 0) {
    throw std::invalid_argument("unknown mock endpoint '" + endpoint + "'");
  }
  return make_http_transport();
}

// ---------------------------------------------------------------------------

ChatClient::ChatClient(ChatClientConfig config, std::shared_ptr<HttpTransport> transport,
                       std::function<void(double)> sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
  config_.validate();
  if (!transport_) transport_ = make_chat_transport(config_.endpoint);
}

std::string ChatClient::complete(const std::string& prompt) {
  HttpRequest req;
  req.url = config_.endpoint;
  req.timeout_seconds = config_.timeout_seconds;
  req.body = nlohmann::json{{"model", config_.model_name},
                            {"temperature", config_.temperature},
                            {"messages", {{{"role", "user"}, {"content", prompt}}}}}
                 .dump();
  req.headers = {{"Content-Type", "application/json"}};
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    req.headers.emplace_back(config_.auth_header, config_.auth_prefix + key);
  }
  RetryPolicy policy;
  policy.max_retries = config_.max_retries;
  policy.initial_backoff_seconds = config_.initial_backoff_seconds;
  policy.sleep = sleep_;

  RequestLog entry;
  entry.prompt_hash = fnv1a64(prompt);
  const auto t0 = std::chrono::steady_clock::now();
  auto record = [&](std::string outcome) {
    entry.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    entry.outcome = std::move(outcome);
    std::lock_guard lock(mu_);
    log_.push_back(entry);
  };
  try {
    const auto outcome = post_with_retry(*transport_, req, policy);
    entry.attempts = outcome.attempts;
    if (outcome.response.status != 200) {
      throw TransportError("chat endpoint returned HTTP " +
                           std::to_string(outcome.response.status));
    }
    std::string content;
    try {
      content = nlohmann::json::parse(outcome.response.body)
                    .at("choices")
                    .at(0)
                    .at("message")
                    .at("content")
                    .get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed chat response: ") + e.what());
    }
    record("ok");
    return content;
  } catch (const TransportError& e) {
    if (entry.attempts == 0) entry.attempts = config_.max_retries + 1;
    record(e.what());
    throw;
  }
}

std::vector<RequestLog> ChatClient::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::string_view to_string(LlmOutcome::Kind kind) {
  switch (kind) {
    case LlmOutcome::Kind::Label: return "label";
    case LlmOutcome::Kind::ParseFailure: return "parse_failure";
    case LlmOutcome::Kind::TransportFailure: return "transport_failure";
  }
  return "unknown";
}

LlmOutcome classify_with_llm(ChatClient& client, const PromptTemplate& tmpl,
                             const std::vector<Demonstration>& shots, const std::string& text) {
  const std::string prompt = build_prompt(tmpl, shots, text);
  LlmOutcome out;
  try {
    out.response = client.complete(prompt);
  } catch (const TransportError& e) {
    out.kind = LlmOutcome::Kind::TransportFailure;
    out.error = e.what();
    return out;
  }
  if (auto label = parse_label(out.response, tmpl.stage)) {
    out.kind = LlmOutcome::Kind::Label;
    out.label = *label;
  } else {
    out.kind = LlmOutcome::Kind::ParseFailure;
  }
  return out;
}

LlmOutcome classify_with_llm(const ChatClientConfig& config, const PromptTemplate& tmpl,
                             const std::vector<Demonstration>& shots, const std::string& text) {
  ChatClient client(config);
  return classify_with_llm(client, tmpl, shots, text);
}

namespace {

class TokenBucket {
 public:
  explicit TokenBucket(double rate) : rate_(rate) {}

  void acquire() {
    if (rate_ <= 0.0) return;
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      slot = std::max(now, next_);
      next_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(1.0 / rate_));
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  double rate_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

}  // namespace

std::vector<LlmOutcome> classify_batch(ChatClient& client, const PromptTemplate& tmpl,
                                       const std::vector<Demonstration>& shots,
                                       const std::vector<std::string>& texts) {
  // Render everything first so template errors surface before any request.
  for (const auto& t : texts) (void)build_prompt(tmpl, shots, t);

  std::vector<LlmOutcome> out(texts.size());
  TokenBucket bucket(client.config().requests_per_second);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < texts.size(); i = next++) {
      bucket.acquire();
      try {
        out[i] = classify_with_llm(client, tmpl, shots, texts[i]);
      } catch (const std::exception& e) {
        out[i].kind = LlmOutcome::Kind::TransportFailure;
        out[i].error = e.what();
      }
    }
  };
  const auto n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(client.config().max_in_flight), texts.size());
  if (n_workers <= 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace triage
