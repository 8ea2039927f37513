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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sparseflow/model_ir.hpp"

namespace sparseflow {

inline constexpr double kDefaultClockHz = 250e6;

// How the dot-product window M of one SPE is derived from the layer shape.
//   kKernel:       M = Kh*Kw for spatial kernels, ceil(I/i) for 1x1 and FC.
//   kChannelSlice: M = ceil(I/i)*Kh*Kw, the whole slice left after splitting.
enum class WindowPolicy { kKernel, kChannelSlice };

std::string_view to_string(WindowPolicy policy);
WindowPolicy parse_window_policy(std::string_view text);

struct DesignPoint {
  int64_t i = 1;
  int64_t o = 1;
  int64_t n = 1;
  int64_t m = 1;
  int64_t buffer_depth = 1;

  int64_t engines() const { return i * o; }
  int64_t macs() const { return i * o * n; }

  friend bool operator==(const DesignPoint&, const DesignPoint&) = default;
};

int64_t window_length(const LayerSpec& layer, int64_t i,
                      WindowPolicy policy = WindowPolicy::kKernel);

// Design point with M derived from the layer and N clamped into [1, M].
DesignPoint make_design_point(const LayerSpec& layer, int64_t i, int64_t o,
                              int64_t n, int64_t buffer_depth = 1,
                              WindowPolicy policy = WindowPolicy::kKernel);

// Throws kValidation unless i | I_red, o | O, 1 <= N <= M and M matches the
// policy.
void validate_design_point(const LayerSpec& layer, const DesignPoint& d,
                           WindowPolicy policy = WindowPolicy::kKernel);

// Ascending divisors of n (n >= 1).
std::vector<int64_t> divisors(int64_t n);

// Cycles per window: max(1, ceil((1 - s) * M / N)).
int64_t initiation_interval(double sparsity, int64_t m, int64_t n);

// Images per cycle: i*o*M / (C * t).
double layer_throughput(const LayerSpec& layer, const DesignPoint& d,
                        double sparsity);

struct LayerDesign {
  DesignPoint point;
  double sparsity = 0.0;

  friend bool operator==(const LayerDesign&, const LayerDesign&) = default;
};

struct NetworkDesign {
  WindowPolicy policy = WindowPolicy::kKernel;
  std::map<std::string, LayerDesign, std::less<>> layers;
  // Consecutive layer-id groups executed one after another through device
  // reconfiguration. Empty means a single pipeline holding every layer.
  std::vector<std::vector<std::string>> partitions;

  const LayerDesign& at(std::string_view id) const;
  LayerDesign& at(std::string_view id);

  friend bool operator==(const NetworkDesign&, const NetworkDesign&) = default;
};

// Throughput of one layer of the design.
double layer_throughput(const NetworkDesign& g, const LayerSpec& layer);

// Slowest prunable layer; 0 for a design without prunable layers. Partitioned
// designs are handled by the dse module.
double network_throughput(const NetworkDesign& g, const NetworkGraph& graph);

// Images per cycle per DSP.
double efficiency_metric(double images_per_s, double clock_hz, double dsps);

}  // namespace sparseflow
