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

#include "sparseflow/perf_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "sparseflow/error.hpp"

namespace sparseflow {

std::string_view to_string(WindowPolicy policy) {
  return policy == WindowPolicy::kKernel ? "kernel" : "channel-slice";
}

WindowPolicy parse_window_policy(std::string_view text) {
  if (text == "kernel") return WindowPolicy::kKernel;
  if (text == "channel-slice") return WindowPolicy::kChannelSlice;
  fail(ErrorKind::kParse, "unknown window policy '" + std::string(text) + "'");
}

int64_t window_length(const LayerSpec& layer, int64_t i, WindowPolicy policy) {
  const int64_t slice = (layer.reduction_channels() + i - 1) / i;
  const int64_t k = layer.kernel_area();
  if (policy == WindowPolicy::kChannelSlice || k == 1) return slice * k;
  return k;
}

DesignPoint make_design_point(const LayerSpec& layer, int64_t i, int64_t o,
                              int64_t n, int64_t buffer_depth,
                              WindowPolicy policy) {
  DesignPoint d;
  d.i = i;
  d.o = o;
  d.m = window_length(layer, i, policy);
  d.n = std::clamp<int64_t>(n, 1, d.m);
  d.buffer_depth = std::max<int64_t>(buffer_depth, 1);
  return d;
}

void validate_design_point(const LayerSpec& layer, const DesignPoint& d,
                           WindowPolicy policy) {
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::kValidation, "layer '" + layer.id + "': " + what);
  };
  if (d.i < 1 || layer.reduction_channels() % d.i != 0) {
    bad("i must divide the reduction channels");
  }
  if (d.o < 1 || layer.out_filters % d.o != 0) bad("o must divide O");
  if (d.m != window_length(layer, d.i, policy)) bad("window length M mismatch");
  if (d.n < 1 || d.n > d.m) bad("N must lie in [1, M]");
  if (d.buffer_depth < 1) bad("buffer depth must be positive");
}

std::vector<int64_t> divisors(int64_t n) {
  std::vector<int64_t> low, high;
  for (int64_t k = 1; k * k <= n; ++k) {
    if (n % k != 0) continue;
    low.push_back(k);
    if (k != n / k) high.push_back(n / k);
  }
  low.insert(low.end(), high.rbegin(), high.rend());
  return low;
}

int64_t initiation_interval(double sparsity, int64_t m, int64_t n) {
  // The epsilon keeps exact quotients such as 0.5*8/2 from rounding up.
  const double cycles = (1.0 - sparsity) * static_cast<double>(m) /
                        static_cast<double>(n);
  return std::max<int64_t>(1, static_cast<int64_t>(std::ceil(cycles - 1e-9)));
}

double layer_throughput(const LayerSpec& layer, const DesignPoint& d,
                        double sparsity) {
  const double work = static_cast<double>(d.i) * static_cast<double>(d.o) *
                      static_cast<double>(d.m);
  const double t = static_cast<double>(initiation_interval(sparsity, d.m, d.n));
  return work / (static_cast<double>(ops_count(layer)) * t);
}

const LayerDesign& NetworkDesign::at(std::string_view id) const {
  auto it = layers.find(id);
  if (it == layers.end()) {
    fail(ErrorKind::kValidation, "design has no layer '" + std::string(id) + "'");
  }
  return it->second;
}

LayerDesign& NetworkDesign::at(std::string_view id) {
  return const_cast<LayerDesign&>(std::as_const(*this).at(id));
}

double layer_throughput(const NetworkDesign& g, const LayerSpec& layer) {
  const LayerDesign& ld = g.at(layer.id);
  return layer_throughput(layer, ld.point, ld.sparsity);
}

double network_throughput(const NetworkDesign& g, const NetworkGraph& graph) {
  double best = std::numeric_limits<double>::infinity();
  for (const LayerSpec* l : graph.prunable_layers()) {
    best = std::min(best, layer_throughput(g, *l));
  }
  return std::isinf(best) ? 0.0 : best;
}

double efficiency_metric(double images_per_s, double clock_hz, double dsps) {
  if (clock_hz <= 0.0 || dsps <= 0.0) {
    fail(ErrorKind::kValidation, "efficiency needs a positive clock and DSP count");
  }
  return images_per_s / clock_hz / dsps;
}

}  // namespace sparseflow
