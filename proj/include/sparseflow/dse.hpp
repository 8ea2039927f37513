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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparseflow/model_ir.hpp"
#include "sparseflow/perf_model.hpp"
#include "sparseflow/resource_model.hpp"
#include "sparseflow/sparsity.hpp"

namespace sparseflow {

struct DseOptions {
  WindowPolicy policy = WindowPolicy::kKernel;
  RegressionModel model = default_model();
  ResourceVector overhead;
  int64_t buffer_depth = 1;
};

// i = o = N = 1 everywhere, sparsity taken from the profile.
NetworkDesign minimal_design(const NetworkGraph& graph, const SparsityProfile& profile,
                             const DseOptions& options = {});

// Shrinks every layer to its cheapest design point that still reaches the
// pipeline rate. Cost order is (dsp, lut, bram18k), ties broken by lower
// throughput and then by (N, i, o). Candidates never cost more than the
// current point in any component, and layers at the bottleneck rate stay
// exactly at it, so network throughput is preserved bit for bit.
NetworkDesign rate_balance(const NetworkDesign& g, const NetworkGraph& graph,
                           const DseOptions& options = {});

// Index into graph.layers() of the slowest prunable layer, lowest index on
// ties.
std::size_t slowest_layer(const NetworkDesign& g, const NetworkGraph& graph);

// One ladder step on the slowest layer: N+1 up to M, then the next divisor
// for i (N clamped to the new M), then the next divisor for o. Throws
// kSaturated when the slowest layer is fully parallel.
NetworkDesign increment_slowest(const NetworkDesign& g, const NetworkGraph& graph,
                                const DseOptions& options = {});

enum class StopReason { kBudget, kSaturated };

struct ExploreResult {
  NetworkDesign design;
  ResourceVector resources;
  double throughput = 0.0;
  // Network throughput after every accepted step, starting with the minimal
  // design.
  std::vector<double> trace;
  StopReason reason = StopReason::kBudget;
};

// Grows a working design one ladder step at a time and rate-balances each
// step; stops before the first balanced design that exceeds the budget.
// Throws kInfeasible when the minimal design already does.
ExploreResult explore(const NetworkGraph& graph, const SparsityProfile& profile,
                      const ResourceVector& budget, const DseOptions& options = {});

struct AnnealingConfig {
  // <= 0 selects ten times the baseline objective.
  double initial_temperature = 0.0;
  double cooling = 0.95;
  int temperatures = 200;
  int moves_per_temperature = 20;
  uint64_t seed = 0;

  void validate() const;
};

struct Allocation {
  int64_t i = 1;
  int64_t o = 1;
  std::vector<int64_t> channel_group;  // length I, values in [0, i)
  std::vector<int64_t> filter_group;   // length O, values in [0, o)
  std::vector<double> engine_work;     // i*o, row-major by channel group
  double imbalance = 0.0;
};

// Contiguous equal-size blocks.
Allocation contiguous_allocation(std::span<const double> channel_load,
                                 std::span<const double> filter_load, int64_t i,
                                 int64_t o);

// Work of engine (a, b) is the product of its channel-group and filter-group
// loads; minimizes max - min engine work over equal-size groups, with swap
// moves. Never worse than the contiguous baseline.
Allocation balance_allocation(std::span<const double> channel_load,
                              std::span<const double> filter_load, int64_t i,
                              int64_t o, const AnnealingConfig& cfg);

// Largest swing of the backlog between a producer running at the trace mean
// and a consumer following the trace, per sliding window of `window_len`
// entries; returns ceil of the p-th percentile swing, at least 1.
int64_t choose_buffer_depth(std::span<const double> trace, std::size_t window_len = 64,
                            double percentile = 99.0);

struct Partition {
  std::size_t index = 0;
  std::vector<std::string> layer_ids;
  NetworkDesign design;
  ResourceVector resources;
  double throughput = 0.0;  // images/cycle
};

struct PartitionResult {
  std::vector<Partition> partitions;
  // Split after layer k of the topological order when splits[k] is set.
  std::vector<bool> splits;
  double effective_images_per_s = 0.0;
  // All partition designs merged, with `partitions` filled in.
  NetworkDesign design;
};

// B / (sum_p B / (theta_p * clock) + P * T_reconf) in images/s; 0 when any
// partition does not fit.
double effective_throughput(std::span<const double> partition_throughput,
                            const Platform& platform, int64_t batch);

// Annealing over split sets between consecutive layers; each partition is
// explored independently against the budget.
PartitionResult partition_network(const NetworkGraph& graph,
                                  const SparsityProfile& profile,
                                  const ResourceVector& budget, const Platform& platform,
                                  int64_t batch, const AnnealingConfig& cfg,
                                  const DseOptions& options = {});

// Evaluates one split set; nullopt when some partition is infeasible.
std::optional<PartitionResult> evaluate_splits(const NetworkGraph& graph,
                                               const SparsityProfile& profile,
                                               const ResourceVector& budget,
                                               const Platform& platform,
                                               int64_t batch,
                                               const std::vector<bool>& splits,
                                               const DseOptions& options = {});

// Subgraph holding layers [first, last] of the topological order.
NetworkGraph slice_graph(const NetworkGraph& graph, std::size_t first, std::size_t last);

std::string serialize_design(const NetworkDesign& g, const NetworkGraph& graph,
                             const Platform& platform, const DseOptions& options = {});
NetworkDesign parse_design(std::string_view text);
NetworkDesign load_design(const std::filesystem::path& path);

// Throughput of a design, honouring partitions: images/cycle of the whole
// schedule excluding reconfiguration.
double design_throughput(const NetworkDesign& g, const NetworkGraph& graph);

}  // namespace sparseflow
