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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sparseflow/model_ir.hpp"
#include "sparseflow/perf_model.hpp"

namespace sparseflow {

struct ResourceVector {
  int64_t dsp = 0;
  int64_t lut = 0;
  int64_t bram18k = 0;

  ResourceVector& operator+=(const ResourceVector& other) {
    dsp += other.dsp;
    lut += other.lut;
    bram18k += other.bram18k;
    return *this;
  }
  friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) {
    return a += b;
  }
  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;

  // Componentwise <=.
  bool fits(const ResourceVector& budget) const {
    return dsp <= budget.dsp && lut <= budget.lut && bram18k <= budget.bram18k;
  }
};

ResourceVector componentwise_max(const ResourceVector& a, const ResourceVector& b);

// Budget that never binds, for unconstrained exploration.
ResourceVector unbounded_budget();

enum class Resource { kDsp, kLut, kBram };
inline constexpr std::size_t kResourceCount = 3;
std::string_view to_string(Resource r);

// Regression features, in this fixed order.
enum class Feature { kBias, kMacs, kEngines, kWindow, kBufferWords, kWeightBits };
inline constexpr std::size_t kFeatureCount = 6;
inline constexpr int kFeatureVersion = 1;
inline constexpr int64_t kWeightBits = 16;
std::string_view to_string(Feature f);

using FeatureVector = std::array<double, kFeatureCount>;

// (1, i*o*N, i*o, M, depth*i*o, weights*16) of one layer design.
FeatureVector layer_features(const LayerSpec& layer, const DesignPoint& d);

struct RegressionModel {
  std::array<FeatureVector, kResourceCount> coeffs{};
  std::array<double, kResourceCount> residual_rms{};
  // Coefficients are illustrative defaults rather than a calibration.
  bool placeholder = false;

  ResourceVector predict(const FeatureVector& x) const;
  bool non_negative() const;
};

// dsp = i*o*N; lut = 120*i*o*N + 350*i*o; bram = weight_bits/18432 +
// buffer_words/1024. Flagged as placeholder.
RegressionModel default_model();

struct ResourceSample {
  FeatureVector features{};
  ResourceVector measured;
};

// Ordinary least squares per resource. Throws kValidation when the sample
// matrix does not have full column rank.
RegressionModel fit(const std::vector<ResourceSample>& samples);

RegressionModel parse_coefficients(std::string_view text);
RegressionModel load_coefficients(const std::filesystem::path& path);
std::string serialize_coefficients(const RegressionModel& model);

// Passthrough layers cost nothing.
ResourceVector estimate_layer(const LayerSpec& layer, const DesignPoint& d,
                              const RegressionModel& model);

// Sum over layers plus `overhead`; a partitioned design costs its largest
// partition plus `overhead`.
ResourceVector estimate_network(const NetworkDesign& g, const NetworkGraph& graph,
                                const RegressionModel& model,
                                const ResourceVector& overhead = {});

struct Platform {
  std::string name = "u250";
  ResourceVector budget{12288, 1728000, 5376};
  double clock_hz = kDefaultClockHz;
  double reconfig_seconds = 0.1;
  ResourceVector overhead;
};

Platform u250_platform();
Platform parse_platform(std::string_view text);
Platform load_platform(const std::filesystem::path& path);
std::string serialize_platform(const Platform& platform);

}  // namespace sparseflow
