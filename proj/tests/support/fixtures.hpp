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

// Shared test fixtures: synthetic networks, tensors, histograms and bundles.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sparseflow/model_ir.hpp"
#include "sparseflow/sparsity.hpp"

namespace sparseflow::testing {

// Reference per-layer combined sparsity of the 16 3x3 convolutions of
// ResNet-18, and the MAC-per-SPE values expected for them at 12288 DSPs.
inline const std::vector<double> kReferenceSparsity = {0.31, 0.54, 0.37, 0.63, 0.41, 0.68,
                                                       0.61, 0.81, 0.62, 0.75, 0.67, 0.86,
                                                       0.67, 0.88, 0.87, 0.87};
inline const std::vector<int64_t> kReferenceN = {7, 5, 6, 4, 6, 3, 4, 2, 4, 3, 3, 2, 3, 2, 2, 2};

inline LayerSpec conv(std::string id, int64_t in, int64_t out, int64_t k, int64_t hw) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = LayerKind::kConv2d;
  l.in_channels = in;
  l.out_filters = out;
  l.kernel_h = l.kernel_w = k;
  l.out_h = l.out_w = hw;
  return l;
}

inline NetworkGraph chain(std::string name, std::vector<LayerSpec> layers) {
  std::vector<Edge> edges;
  for (std::size_t k = 1; k < layers.size(); ++k) edges.emplace_back(layers[k - 1].id, layers[k].id);
  return NetworkGraph(std::move(name), std::move(layers), std::move(edges));
}

// The 16 3x3 convolutions of ResNet-18 as a chain, ids conv1..conv16.
inline NetworkGraph resnet18_convs() {
  struct Dims {
    int64_t in, out, hw;
  };
  const Dims dims[16] = {{64, 64, 56},   {64, 64, 56},   {64, 64, 56},   {64, 64, 56},
                         {64, 128, 28},  {128, 128, 28}, {128, 128, 28}, {128, 128, 28},
                         {128, 256, 14}, {256, 256, 14}, {256, 256, 14}, {256, 256, 14},
                         {256, 512, 7},  {512, 512, 7},  {512, 512, 7},  {512, 512, 7}};
  std::vector<LayerSpec> layers;
  for (int k = 0; k < 16; ++k) {
    layers.push_back(conv("conv" + std::to_string(k + 1), dims[k].in, dims[k].out, 3, dims[k].hw));
  }
  return chain("resnet18-convs", std::move(layers));
}

inline SparsityProfile reference_profile(const NetworkGraph& graph) {
  std::map<std::string, double, std::less<>> s;
  for (std::size_t k = 0; k < graph.layers().size(); ++k) s[graph.layers()[k].id] = kReferenceSparsity[k];
  return uniform_profile(graph, s);
}

// Random chain of 3..max_layers convolutions with small dimensions.
inline NetworkGraph random_chain(std::mt19937_64& rng, int max_layers = 6) {
  std::uniform_int_distribution<int> count(3, max_layers);
  const int64_t channel_choices[] = {4, 6, 8, 12, 16};
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  std::uniform_int_distribution<int> kernel(0, 2);
  std::uniform_int_distribution<int64_t> hw(2, 8);
  const int n = count(rng);
  std::vector<LayerSpec> layers;
  int64_t in = channel_choices[pick(rng)];
  for (int k = 0; k < n; ++k) {
    const int64_t out = channel_choices[pick(rng)];
    const int64_t kk = kernel(rng) == 0 ? 1 : 3;
    layers.push_back(conv("l" + std::to_string(k), in, out, kk, hw(rng)));
    in = out;
  }
  return chain("random", std::move(layers));
}

inline SparsityProfile random_profile(const NetworkGraph& graph, std::mt19937_64& rng,
                                      double lo = 0.0, double hi = 0.9) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::map<std::string, double, std::less<>> s;
  for (const LayerSpec* l : graph.prunable_layers()) s[l->id] = u(rng);
  return uniform_profile(graph, s);
}

inline WeightTensor random_weights(const LayerSpec& layer, std::mt19937_64& rng, double scale = 1.0) {
  WeightTensor t;
  t.shape = layer.weight_shape();
  std::normal_distribution<float> n(0.0F, static_cast<float>(scale));
  t.values.resize(static_cast<std::size_t>(layer.weight_count()));
  for (float& v : t.values) v = n(rng);
  return t;
}

inline TensorArchive random_archive(const NetworkGraph& graph, uint64_t seed) {
  std::mt19937_64 rng(seed);
  TensorArchive a;
  for (const LayerSpec* l : graph.prunable_layers()) a.insert(l->id, random_weights(*l, rng));
  return a;
}

// Histogram of |x| for post-ReLU Gaussian activations: an exact-zero bin
// holding zero_fraction of the samples, then log-spaced bins up to 8.
inline MagnitudeHistogram relu_histogram(const std::string& layer_id, double zero_fraction,
                                         uint64_t samples, std::mt19937_64& rng,
                                         int bins = 64, int64_t channel = -1) {
  MagnitudeHistogram h;
  h.layer_id = layer_id;
  h.axis = channel < 0 ? HistogramAxis::kWholeLayer : HistogramAxis::kPerInputChannel;
  h.channel = channel;
  h.edges = {0.0, 0.0};
  for (int b = 0; b < bins; ++b) h.edges.push_back(1e-3 * std::pow(8000.0, double(b) / (bins - 1)));
  h.counts.assign(h.edges.size() - 1, 0);
  std::bernoulli_distribution zero(zero_fraction);
  std::normal_distribution<double> n(0.0, 1.0);
  for (uint64_t s = 0; s < samples; ++s) {
    if (zero(rng)) {
      ++h.counts[0];
      continue;
    }
    const double x = std::min(std::abs(n(rng)), h.edges.back());
    auto it = std::upper_bound(h.edges.begin() + 2, h.edges.end(), x);
    std::size_t bin = static_cast<std::size_t>(it - h.edges.begin()) - 1;
    bin = std::clamp<std::size_t>(bin, 1, h.counts.size() - 1);
    ++h.counts[bin];
  }
  h.samples = samples;
  return h;
}

inline HistogramSet random_histograms(const NetworkGraph& graph, uint64_t seed,
                                      uint64_t samples = 4096) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> zero(0.2, 0.6);
  HistogramSet set;
  for (const LayerSpec* l : graph.prunable_layers()) {
    set[l->id].layer = relu_histogram(l->id, zero(rng), samples, rng);
  }
  return set;
}

struct BundlePaths {
  std::filesystem::path network, tensors, histograms;
};

// Writes a self-contained synthetic input bundle under dir.
inline BundlePaths write_bundle(const std::filesystem::path& dir, const NetworkGraph& graph,
                                uint64_t seed) {
  std::filesystem::create_directories(dir);
  BundlePaths p{dir / "network.json", dir / "tensors.json", dir / "histograms.json"};
  save_network(graph, p.network);
  save_tensors(random_archive(graph, seed), p.tensors);
  write_text_file(p.histograms, serialize_histograms(random_histograms(graph, seed + 1)));
  return p;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sparseflow-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t s = 0; s < idx.size();) {
      std::size_t e = s;
      while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[s]]) ++e;
      for (std::size_t k = s; k <= e; ++k) r[idx[k]] = 0.5 * double(s + e) + 1.0;
      s = e + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += ra[k] / n;
    mb += rb[k] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (ra[k] - ma) * (rb[k] - mb);
    saa += (ra[k] - ma) * (ra[k] - ma);
    sbb += (rb[k] - mb) * (rb[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace sparseflow::testing
