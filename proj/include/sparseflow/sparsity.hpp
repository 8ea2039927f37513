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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparseflow/model_ir.hpp"

namespace sparseflow {

// Magnitude thresholds of one layer. A value with |x| <= tau is pruned.
struct ThresholdPair {
  double tau_w = 0.0;
  double tau_a = 0.0;

  friend bool operator==(const ThresholdPair&, const ThresholdPair&) = default;
};

struct ThresholdAssignment {
  std::map<std::string, ThresholdPair, std::less<>> layers;

  const ThresholdPair& at(std::string_view id) const;
  // Every prunable layer present, all thresholds finite and non-negative.
  void validate(const NetworkGraph& graph) const;

  friend bool operator==(const ThresholdAssignment&,
                         const ThresholdAssignment&) = default;
};

ThresholdAssignment uniform_thresholds(const NetworkGraph& graph, double tau_w,
                                       double tau_a);
ThresholdAssignment parse_thresholds(std::string_view text);
std::string serialize_thresholds(const ThresholdAssignment& thresholds);

enum class HistogramAxis { kWholeLayer, kPerInputChannel, kPerOutputFilter };

std::string_view to_string(HistogramAxis axis);

// Histogram of |activation|. edges[0] == 0; edges ascend strictly except that
// the first bin may be the degenerate [0, 0] bin holding exact zeros.
struct MagnitudeHistogram {
  std::string layer_id;
  HistogramAxis axis = HistogramAxis::kWholeLayer;
  int64_t channel = -1;
  std::vector<double> edges;
  std::vector<uint64_t> counts;
  uint64_t samples = 0;

  void validate() const;
  bool has_zero_bin() const { return edges.size() > 1 && edges[1] == 0.0; }
};

struct CdfValue {
  double value = 0.0;
  // The threshold lies past the last edge; value was clipped to the whole mass.
  bool beyond_range = false;
};

// Fraction of samples with magnitude <= tau, interpolating linearly inside
// the bin that contains tau.
CdfValue activation_sparsity(const MagnitudeHistogram& hist, double tau_a);

// Smallest tau whose interpolated CDF reaches q (q in [0, 1]).
double histogram_quantile(const MagnitudeHistogram& hist, double q);

struct LayerHistograms {
  std::optional<MagnitudeHistogram> layer;
  std::map<int64_t, MagnitudeHistogram> per_input_channel;
};

using HistogramSet = std::map<std::string, LayerHistograms, std::less<>>;

HistogramSet parse_histograms(std::string_view text);
HistogramSet load_histograms(const std::filesystem::path& path);
std::string serialize_histograms(const HistogramSet& set);

struct WeightSparsity {
  double overall = 0.0;
  std::vector<double> per_input_channel;
  std::vector<double> per_output_filter;
};

// Fraction of weights with |w| <= tau_w, overall and per slice. For
// depthwise tensors (O, 1, Kh, Kw) input channel c is filter c.
WeightSparsity weight_sparsity(const WeightTensor& weights, double tau_w,
                               bool depthwise = false);

// tau such that at least a fraction q of |w| is <= tau; q == 0 gives 0.
double weight_magnitude_quantile(const WeightTensor& weights, double q);

enum class CombineMode { kIndependent, kMeasuredJoint };

std::string_view to_string(CombineMode mode);

// Probability that a weight/activation pair holds at least one zero.
// kMeasuredJoint returns `measured_joint`, which must then be supplied.
double combined_sparsity(double weight, double activation, CombineMode mode,
                         std::optional<double> measured_joint = std::nullopt);

struct LayerSparsity {
  ThresholdPair thresholds;
  double weight = 0.0;
  double activation = 0.0;
  double combined = 0.0;
  bool activation_beyond_range = false;
  std::vector<double> per_input_channel;  // combined, length I
  std::vector<double> per_output_filter;  // combined, length O
};

struct SparsityProfile {
  CombineMode mode = CombineMode::kIndependent;
  std::map<std::string, LayerSparsity, std::less<>> layers;

  const LayerSparsity& at(std::string_view id) const;
  double combined(std::string_view id) const { return at(id).combined; }
};

struct ProfileOptions {
  CombineMode mode = CombineMode::kIndependent;
  // Joint zero-pair fractions, used per layer in kMeasuredJoint mode.
  std::map<std::string, double, std::less<>> measured_joint;
};

// Per-channel vectors use the independence law in both modes; only the layer
// scalar honours kMeasuredJoint.
SparsityProfile build_profile(const NetworkGraph& graph,
                              const TensorArchive& archive,
                              const HistogramSet& histograms,
                              const ThresholdAssignment& thresholds,
                              const ProfileOptions& options = {});

// Profile with prescribed per-layer combined sparsity and uniform channels.
SparsityProfile uniform_profile(const NetworkGraph& graph,
                                const std::map<std::string, double, std::less<>>& combined);

enum class SparsityWeighting { kOperations, kUniform };

// Network-level sparsity: the mean of per-layer combined sparsity, weighted
// by dense operation count unless kUniform is requested.
double network_sparsity(const SparsityProfile& profile, const NetworkGraph& graph,
                        SparsityWeighting weighting = SparsityWeighting::kOperations);

std::string serialize_profile(const SparsityProfile& profile,
                              const NetworkGraph& graph);
SparsityProfile parse_profile(std::string_view text);

}  // namespace sparseflow
