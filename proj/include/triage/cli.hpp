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

// The `triage` command line: configuration and command dispatch.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "triage/eval.hpp"

namespace triage {

/// Exit codes of run_cli.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRuntime = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every setting of a run. Keys are "section.name"; hyperparameter overrides
/// use "classifier.<algorithm>.<param>" and "fsbm.mlp.<param>".
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out = "out";

  std::string corpus_path;
  std::string corpus_format = "auto";  // auto, csv, jsonl
  bool synthetic = false;
  std::array<std::size_t, 4> synthetic_counts{67, 354, 219, 64};
  double synthetic_purity = 0.7;

  PipelineConfig pipeline;

  std::vector<int> stages{1, 2};
  std::vector<std::string> balancings{"imbalanced", "balanced"};
  std::vector<std::string> classifiers;  // algorithm keys; empty = all nine
  std::map<std::string, std::map<std::string, double>> hyperparams;
  double train_fraction = 0.8;
  bool include_fsbm = true;
  bool llm = false;
  std::vector<std::string> llm_styles{"simple", "complicated"};
  bool llm_few_shot = true;
  std::vector<std::string> only;

  FsbmConfig fsbm;
  std::string embedder = "hashed";  // hashed, remote
  std::size_t embedder_dim = 128;
  std::uint64_t embedder_seed = 0;
  std::string embedder_endpoint;

  ChatClientConfig chat;

  std::string train_algorithm = "linear-svm";  // or "fsbm"
  int train_stage = 2;
  std::string train_balancing = "balanced";

  /// Throws ConfigError on an unknown key or a bad value.
  void set(std::string_view key, const std::string& value);
  /// Current value of a key, in the form set() accepts.
  std::string get(std::string_view key) const;
  /// Every key accepted by set(), hyperparameter overrides included.
  std::vector<std::string> keys() const;

  /// Sectioned key = value text; from_ini(to_ini()) reproduces the config.
  std::string to_ini() const;
  /// Applies a file over `base` (defaults when omitted). Throws ConfigError.
  static RunConfig from_ini(std::istream& in, RunConfig base);
  static RunConfig from_ini(std::istream& in);

  /// Checks cross-field constraints. Throws ConfigError.
  void validate() const;

  BenchmarkGrid grid() const;
  ProviderPtr make_provider() const;
  /// Loads corpus_path, or generates the synthetic corpus with `seed`.
  Dataset load_dataset() const;

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.to_ini() == b.to_ini();
  }
};

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace triage
