// Copyright 2026 The Sparseflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparseflow/dse.hpp"
#include "sparseflow/error.hpp"
#include "sparseflow/evaluator.hpp"
#include "sparseflow/search.hpp"
#include "sparseflow/simulator.hpp"

namespace sparseflow {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInput = 2,
  kExitInfeasible = 3,
  kExitDeadlock = 4,
};

int exit_code(ErrorKind kind);

// Everything a command needs. Paths in a config file are resolved against
// the file's directory.
struct RunConfig {
  std::filesystem::path network;
  std::filesystem::path tensors;
  std::filesystem::path histograms;
  std::filesystem::path platform;
  std::filesystem::path coefficients;
  std::filesystem::path thresholds;
  std::filesystem::path profile;  // precomputed sparsity profile
  std::filesystem::path design;
  std::filesystem::path history;
  std::filesystem::path output_dir = ".";

  // Per-component overrides of the platform budget.
  std::optional<int64_t> budget_dsp, budget_lut, budget_bram18k;
  WindowPolicy policy = WindowPolicy::kKernel;
  CombineMode combine = CombineMode::kIndependent;
  SparsityWeighting weighting = SparsityWeighting::kOperations;

  ObjectiveWeights weights;
  TpeConfig tpe;
  AnnealingConfig annealing;
  EvaluatorSpec evaluator;
  double p_max = 95.0;
  bool tied = false;
  bool software_only = false;
  bool random_only = false;
  bool resume = false;

  bool partition = true;
  int64_t batch = 256;

  int64_t tokens = 2000;
  double windows_per_token = 8.0;
  SpeConfig spe;
  bool auto_depth = true;
  double buffer_percentile = 99.0;
  int64_t window_len = 64;
  std::map<std::string, int64_t, std::less<>> lookahead;

  uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
};

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Each command writes its outputs below cfg.output_dir and a summary to out.
void cmd_profile(const RunConfig& cfg, std::ostream& out);
void cmd_dse(const RunConfig& cfg, std::ostream& out);
void cmd_search(const RunConfig& cfg, std::ostream& out);
void cmd_simulate(const RunConfig& cfg, std::ostream& out);
void cmd_report(const RunConfig& cfg, std::ostream& out);

// Full command line: `sparseflow <command> [options]`. Returns the exit code.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sparseflow
