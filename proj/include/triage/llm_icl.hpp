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

// In-context classification with a chat-completion model: prompt rendering,
// a retrying client, and label extraction from free-text answers.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "triage/corpus.hpp"
#include "triage/http.hpp"

namespace triage {

enum class PromptStyle { Simple, Complicated };

std::string_view to_string(PromptStyle style);
PromptStyle prompt_style_from_string(std::string_view s);

struct PromptTemplate {
  PromptStyle style = PromptStyle::Simple;
  Stage stage = Stage::Stage2;
  std::string instruction;
  std::map<int, std::string> label_legend;
  std::size_t demonstration_slot_count = 0;

  /// The shipped templates. Stage2 uses the binary urgent / non-urgent
  /// legend; Stage1 lists the four severity descriptions.
  static PromptTemplate standard(PromptStyle style, Stage stage, std::size_t slots);

  /// Legend keys must be exactly 0..n-1 for the stage; a Stage2 legend must
  /// read "urgent" / "non-urgent". Throws std::invalid_argument.
  void validate() const;
};

struct Demonstration {
  std::string text;
  int label = 0;
};

/// instruction, legend ("k: description" per line), then one
/// "note: <text>\nlabel: <k>" block per shot, then "note: <query>\nlabel:"
/// with no trailing newline. Blocks are separated by blank lines.
/// Throws std::invalid_argument on a shot count mismatch or invalid label.
std::string build_prompt(const PromptTemplate& tmpl, const std::vector<Demonstration>& shots,
                         const std::string& query);

/// First standalone non-negative integer that is a valid class index for
/// the stage; nullopt is a parse failure. Never throws.
std::optional<int> parse_label(std::string_view response, Stage stage);

/// One demonstration per class, drawn uniformly with `seed`, in class order.
std::vector<Demonstration> select_demonstrations(const Dataset& train, std::uint64_t seed);

struct ChatClientConfig {
  /// http(s) URL, or mock://echo, mock://hash, mock://fail, mock://fixed/<text>.
  std::string endpoint = "mock://hash";
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.0;
  double timeout_seconds = 30.0;
  int max_retries = 3;
  double initial_backoff_seconds = 0.5;
  std::string api_key_env = "TRIAGE_LLM_API_KEY";
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  /// Concurrent requests in classify_batch.
  int max_in_flight = 1;
  /// Token-bucket rate limit; 0 disables.
  double requests_per_second = 0.0;

  void validate() const;
};

/// In-process chat endpoints for mock:// URLs, HTTP otherwise.
std::shared_ptr<HttpTransport> make_chat_transport(const std::string& endpoint);

struct RequestLog {
  std::uint64_t prompt_hash = 0;  // fnv1a64 of the prompt
  double latency_ms = 0.0;
  int attempts = 0;
  std::string outcome;  // "ok" or the error text
};

class ChatClient {
 public:
  /// `transport` defaults to make_chat_transport(config.endpoint); `sleep`
  /// replaces the real backoff sleep.
  explicit ChatClient(ChatClientConfig config, std::shared_ptr<HttpTransport> transport = nullptr,
                      std::function<void(double)> sleep = {});

  /// Throws TransportError once retries are exhausted or the reply is not a
  /// chat completion.
  std::string complete(const std::string& prompt);

  const ChatClientConfig& config() const { return config_; }
  std::vector<RequestLog> log() const;

 private:
  ChatClientConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::function<void(double)> sleep_;
  mutable std::mutex mu_;
  std::vector<RequestLog> log_;
};

struct LlmOutcome {
  enum class Kind { Label, ParseFailure, TransportFailure };
  Kind kind = Kind::ParseFailure;
  int label = -1;  // valid only for Kind::Label
  std::string response;
  std::string error;
};

std::string_view to_string(LlmOutcome::Kind kind);

LlmOutcome classify_with_llm(ChatClient& client, const PromptTemplate& tmpl,
                             const std::vector<Demonstration>& shots, const std::string& text);

LlmOutcome classify_with_llm(const ChatClientConfig& config, const PromptTemplate& tmpl,
                             const std::vector<Demonstration>& shots, const std::string& text);

/// Up to max_in_flight requests at once, rate-limited; results in input
/// order.
std::vector<LlmOutcome> classify_batch(ChatClient& client, const PromptTemplate& tmpl,
                                       const std::vector<Demonstration>& shots,
                                       const std::vector<std::string>& texts);

}  // namespace triage
