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

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sparseflow/sparsity.hpp"

namespace sparseflow {

// Supplies top-1 accuracy (percent) for a threshold assignment.
class AccuracyEvaluator {
 public:
  virtual ~AccuracyEvaluator() = default;
  // `network_sparsity` is the profile's f_spa, used by analytic evaluators.
  // Throws kEvaluator on failure.
  virtual double evaluate(const ThresholdAssignment& thresholds,
                          double network_sparsity) = 0;
  virtual std::string describe() const = 0;
};

enum class EvaluatorKind { kSurrogate, kLookupTable, kExternalCommand };

std::string_view to_string(EvaluatorKind kind);
EvaluatorKind parse_evaluator_kind(std::string_view text);

struct EvaluatorSpec {
  EvaluatorKind kind = EvaluatorKind::kSurrogate;
  // Surrogate: accuracy = a - b * f_spa^2.
  double surrogate_a = 72.0;
  double surrogate_b = 20.0;
  // Lookup table file: {"entries": [{"thresholds": {...}, "accuracy": x}]}.
  std::filesystem::path table;
  // Run through /bin/sh -c with the thresholds document on stdin.
  std::string command;
  std::chrono::milliseconds timeout{600'000};
};

struct LookupEntry {
  ThresholdAssignment thresholds;
  double accuracy = 0.0;
};

std::unique_ptr<AccuracyEvaluator> make_surrogate_evaluator(double a = 72.0, double b = 20.0);
// Returns the accuracy of the entry nearest in Euclidean distance over the
// (tau_w, tau_a) vector of all layers.
std::unique_ptr<AccuracyEvaluator> make_lookup_evaluator(std::vector<LookupEntry> entries);
std::unique_ptr<AccuracyEvaluator> make_command_evaluator(std::string command,
                                                          std::chrono::milliseconds timeout);
std::unique_ptr<AccuracyEvaluator> make_evaluator(const EvaluatorSpec& spec);

std::vector<LookupEntry> parse_lookup_table(std::string_view text);

}  // namespace sparseflow
