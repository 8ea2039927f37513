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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sparseflow/dse.hpp"
#include "sparseflow/evaluator.hpp"
#include "sparseflow/model_ir.hpp"
#include "sparseflow/resource_model.hpp"
#include "sparseflow/sparsity.hpp"

namespace sparseflow {

struct ObjectiveWeights {
  double sparsity = 10.0;     // per unit of f_spa
  double throughput = 1e4;    // per image/cycle
  double dsp = 1e-3;          // per DSP

  static ObjectiveWeights software_only() { return {10.0, 0.0, 0.0}; }
  void validate() const;
};

struct TrialMetrics {
  double accuracy = 0.0;
  double sparsity = 0.0;
  double throughput = 0.0;  // images/cycle
  int64_t dsp = 0;
};

// f_acc + l1*f_spa + l2*f_thr - l3*f_dsp.
double scalar_objective(const TrialMetrics& m, const ObjectiveWeights& w);

// Per-layer (weight, activation) percentile coordinates in [0, p_max], or a
// single shared pair in tied mode.
struct SearchSpace {
  std::vector<std::string> layers;
  double p_max = 95.0;
  bool tied = false;

  std::size_t dims() const { return tied ? 2 : 2 * layers.size(); }
  void validate() const;
};

SearchSpace make_search_space(const NetworkGraph& graph, double p_max = 95.0,
                              bool tied = false);

// Maps percentile coordinates to absolute thresholds using the layer's |w|
// distribution and activation histogram.
class ThresholdMapper {
 public:
  ThresholdMapper(const NetworkGraph& graph, const TensorArchive& archive,
                  const HistogramSet& histograms);
  ThresholdAssignment map(const SearchSpace& space, std::span<const double> point) const;

 private:
  struct LayerData {
    std::vector<float> sorted_magnitudes;
    const LayerHistograms* histograms = nullptr;
  };
  double weight_tau(const LayerData& d, double percentile) const;
  double activation_tau(const LayerData& d, double percentile) const;

  std::map<std::string, LayerData, std::less<>> layers_;
};

struct SearchInputs {
  const NetworkGraph* graph = nullptr;
  const TensorArchive* archive = nullptr;
  const HistogramSet* histograms = nullptr;
  ResourceVector budget;
  DseOptions dse;
  ProfileOptions profile;
};

struct Trial {
  int64_t iteration = 0;
  uint64_t seed = 0;
  std::vector<double> point;
  ThresholdAssignment thresholds;
  TrialMetrics metrics;
  double objective = 0.0;
  bool failed = false;
  bool dse_feasible = true;
  std::string error;
  double wall_seconds = 0.0;
  std::string timestamp;
  std::optional<NetworkDesign> design;

  double efficiency() const {
    return metrics.dsp > 0 ? metrics.throughput / static_cast<double>(metrics.dsp) : 0.0;
  }
};

// Profile, explore and evaluate one threshold assignment. An infeasible DSE
// scores f_thr = 0 with the minimal design's DSP count; an evaluator failure
// marks the trial failed.
Trial evaluate(const ThresholdAssignment& thresholds, const SearchInputs& inputs,
               AccuracyEvaluator& evaluator, const ObjectiveWeights& weights);

struct TpeConfig {
  int startup = 10;
  double gamma = 0.25;
  int candidates = 24;
  int iterations = 96;
  uint64_t seed = 0;

  void validate() const;
};

struct Observation {
  std::vector<double> x;
  double y = 0.0;  // larger is better
};

// Uniform sample while fewer than cfg.startup observations exist, or when all
// objectives tie; otherwise draws candidates from the good-set Parzen density
// and returns the one maximizing l(x)/g(x).
std::vector<double> tpe_suggest(std::span<const Observation> history,
                                std::span<const double> lo, std::span<const double> hi,
                                const TpeConfig& cfg, std::mt19937_64& rng);

// Generator used for iteration k of a run seeded with `seed`.
std::mt19937_64 iteration_rng(uint64_t seed, int64_t k);

struct SearchOptions {
  ObjectiveWeights weights;
  TpeConfig tpe;
  // Trial records are appended here after every evaluation when set.
  std::filesystem::path history_path;
  // Reuse trials already in history_path and continue after them.
  bool resume = false;
  // Skip the Parzen model; every suggestion is uniform.
  bool random_only = false;
};

struct SearchResult {
  std::optional<Trial> best;
  std::vector<Trial> history;
};

SearchResult run_search(const SearchSpace& space, const SearchInputs& inputs,
                        AccuracyEvaluator& evaluator, const SearchOptions& options);

std::string serialize_trial(const Trial& trial);
Trial parse_trial(std::string_view line);
std::vector<Trial> load_history(const std::filesystem::path& path);

// iteration, best objective, incumbent images/cycle/DSP.
std::string efficiency_csv(const std::vector<Trial>& history);

}  // namespace sparseflow
