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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sparseflow/dse.hpp"
#include "sparseflow/model_ir.hpp"
#include "sparseflow/perf_model.hpp"
#include "sparseflow/sparsity.hpp"

namespace sparseflow {

// Consecutive windows of m (weight, activation) pairs.
struct PairStream {
  int64_t m = 1;
  std::vector<float> weights;
  std::vector<float> activations;

  int64_t windows() const { return static_cast<int64_t>(weights.size()) / m; }
  void validate() const;
};

enum class Arbiter {
  kIdeal,       // any N surviving pairs dispatch each cycle
  kRoundRobin,  // pair j of a window is served by lane j mod N only
};

struct SpeConfig {
  Arbiter arbiter = Arbiter::kIdeal;
  // Windows whose pairs the arbiter may hold at once. 1 reproduces the
  // per-window max(1, ceil(k/N)) rule exactly.
  int64_t prefetch_windows = 1;
};

struct SpeReport {
  int64_t total_cycles = 0;
  std::vector<int64_t> window_cycles;   // cycles between consecutive emissions
  std::vector<int64_t> emit_cycle;      // cycle at which each window is emitted
  std::vector<int64_t> nonzero_pairs;   // surviving pairs per window
  std::vector<double> outputs;          // dot product of surviving pairs
  uint64_t dispatched = 0;
  uint64_t skipped = 0;
  double occupancy = 0.0;
  double joint_sparsity = 0.0;
};

// Clips |x| <= tau to zero, forwards zero pairs to the counter, dispatches
// up to N surviving pairs per cycle and emits at most one window per cycle.
SpeReport simulate_spe(const PairStream& stream, int64_t n, double tau_w = 0.0,
                       double tau_a = 0.0, const SpeConfig& cfg = {});

// E[max(1, ceil(k/N))] for k ~ Binomial(m, 1 - sparsity).
double expected_window_cycles(int64_t m, int64_t n, double sparsity);

struct LayerReport {
  std::vector<int64_t> step_cycles;  // per window step, max over engines
  int64_t total_cycles = 0;
  std::vector<int64_t> engine_idle;  // per engine
  double occupancy = 0.0;
  double joint_sparsity = 0.0;
  double images_per_cycle = 0.0;
};

// Engines run in lockstep: a window step ends when the slowest engine emits.
// streams[a * o + b] feeds engine (a, b).
LayerReport simulate_layer(const LayerSpec& layer, const DesignPoint& d,
                           const Allocation& allocation,
                           std::span<const PairStream> streams, double tau_w = 0.0,
                           double tau_a = 0.0, const SpeConfig& cfg = {});

struct ZeroRates {
  double weight = 0.0;
  double activation = 0.0;
};

// Zero rates whose independent combination equals the layer's combined
// sparsity, keeping the measured weight share when it is known.
ZeroRates zero_rates(const LayerSparsity& s);

// Pairs are zero with the given probabilities, otherwise their magnitude is
// uniform in (tau, tau + 1] (weights carry a random sign). The same seed
// always yields the same stream.
PairStream generate_traces(const ZeroRates& rates, int64_t m, int64_t windows,
                           uint64_t seed, double tau_w = 0.0, double tau_a = 0.0);

// One stream per engine; pairs follow the densities of the channels the
// allocation gives each engine. channel_sparsity has one entry per input
// channel (combined sparsity, drawn on the activation side).
std::vector<PairStream> generate_layer_traces(const LayerSpec& layer,
                                              const DesignPoint& d,
                                              const Allocation& allocation,
                                              std::span<const double> channel_sparsity,
                                              int64_t windows, uint64_t seed);

// Binary trace file: "SFTRACE1", then per window a little-endian u32 pair
// count followed by (f32 weight, f32 activation) pairs.
void save_traces(const PairStream& stream, const std::filesystem::path& path);
PairStream load_traces(const std::filesystem::path& path);

struct PipelineConfig {
  double warmup_fraction = 0.1;
  // Extra input tokens a layer needs before it may start one, per layer id.
  std::map<std::string, int64_t, std::less<>> lookahead;
};

struct EdgeStats {
  Edge edge;
  int64_t depth = 1;
  double stall_cycles = 0.0;   // producer ready but this FIFO full
  int64_t stalled_tokens = 0;  // tokens whose start this FIFO delayed
  int64_t max_occupancy = 0;
};

struct PipelineReport {
  int64_t tokens = 0;
  double total_cycles = 0.0;
  double steady_tokens_per_cycle = 0.0;
  std::vector<EdgeStats> edges;
};

// Event-driven token pipeline. service[k][t] is the time layer k of the
// topological order needs for token t; depth[e] bounds the FIFO on edge e.
// A layer starts a token once every input FIFO holds it (plus lookahead)
// and every output FIFO has a free slot. Throws kDeadlock naming the edge
// when no layer can make progress.
PipelineReport simulate_pipeline(const NetworkGraph& graph,
                                 const std::vector<std::vector<double>>& service,
                                 const std::map<Edge, int64_t>& depth,
                                 const PipelineConfig& cfg = {});

struct DesignSimOptions {
  int64_t tokens = 2000;
  // Windows of the heaviest layer per token; sets the token granularity.
  double windows_per_token = 8.0;
  uint64_t seed = 0;
  SpeConfig spe;
  PipelineConfig pipeline;
  // FIFO depth overrides; others come from the consumer's buffer depth, or
  // from choose_pipeline_depths when auto_depth is set.
  std::map<Edge, int64_t> depth;
  bool auto_depth = false;
  double buffer_percentile = 99.0;
  std::size_t window_len = 64;
};

struct LayerSimStats {
  std::string id;
  double predicted_images_per_cycle = 0.0;
  double mean_window_cycles = 0.0;
  double occupancy = 0.0;
  double joint_sparsity = 0.0;
};

struct DesignSimReport {
  PipelineReport pipeline;
  double tokens_per_image = 1.0;
  double predicted_images_per_cycle = 0.0;
  double measured_images_per_cycle = 0.0;
  double occupancy = 0.0;
  double joint_sparsity = 0.0;
  std::vector<LayerSimStats> layers;
  // Token service times per layer in topological order, for buffer sizing.
  std::vector<std::vector<double>> service;
  std::map<Edge, int64_t> depth;
};

// Generates Bernoulli traces for one representative engine per layer,
// converts them into token service times and runs the pipeline.
DesignSimReport simulate_design(const NetworkGraph& graph, const NetworkDesign& g,
                                const SparsityProfile& profile,
                                const DesignSimOptions& options = {});

// FIFO depths from token service-time traces: each edge gets the larger of
// the producer's and the consumer's choose_buffer_depth in token units.
std::map<Edge, int64_t> choose_pipeline_depths(const NetworkGraph& graph,
                                               const std::vector<std::vector<double>>& service,
                                               std::size_t window_len = 64,
                                               double percentile = 99.0);

std::string serialize_sim_report(const DesignSimReport& report, const NetworkGraph& graph);

}  // namespace sparseflow
