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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sparseflow {

enum class LayerKind {
  kConv2d,
  kDepthwiseConv2d,
  kPointwiseConv2d,
  kFullyConnected,
  kPassthrough,
};

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view text);

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::kPassthrough;
  int64_t in_channels = 1;
  int64_t out_filters = 1;
  int64_t kernel_h = 1;
  int64_t kernel_w = 1;
  int64_t out_h = 1;
  int64_t out_w = 1;
  int64_t stride_h = 1;
  int64_t stride_w = 1;

  bool prunable() const { return kind != LayerKind::kPassthrough; }

  // Channels summed inside one output value. Depthwise filters see a single
  // input channel each.
  int64_t reduction_channels() const {
    return kind == LayerKind::kDepthwiseConv2d ? 1 : in_channels;
  }

  int64_t kernel_area() const { return kernel_h * kernel_w; }

  // Stored weight tensor shape, always 4-D (O, I, Kh, Kw). Depthwise layers
  // store (O, 1, Kh, Kw); fully-connected layers store (O, I, 1, 1).
  std::array<int64_t, 4> weight_shape() const;
  int64_t weight_count() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Dense multiply-accumulate count of a prunable layer. Thresholds never
// change it. Throws kValidation for passthrough layers.
int64_t ops_count(const LayerSpec& layer);

using Edge = std::pair<std::string, std::string>;

class NetworkGraph {
 public:
  NetworkGraph() = default;
  // Validates and reorders `layers` into a stable topological order.
  NetworkGraph(std::string name, std::vector<LayerSpec> layers,
               std::vector<Edge> edges);

  const std::string& name() const { return name_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const LayerSpec* find(std::string_view id) const;
  const LayerSpec& at(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  std::vector<const LayerSpec*> prunable_layers() const;
  std::vector<std::string> producers(std::string_view id) const;
  std::vector<std::string> consumers(std::string_view id) const;

  friend bool operator==(const NetworkGraph& a, const NetworkGraph& b) {
    return a.name_ == b.name_ && a.layers_ == b.layers_ && a.edges_ == b.edges_;
  }

 private:
  std::string name_;
  std::vector<LayerSpec> layers_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
};

NetworkGraph parse_network(std::string_view text);
NetworkGraph load_network(const std::filesystem::path& path);
std::string serialize_network(const NetworkGraph& graph);
void save_network(const NetworkGraph& graph, const std::filesystem::path& path);

// Weights of one layer, row-major (O, I, Kh, Kw).
struct WeightTensor {
  std::array<int64_t, 4> shape{};
  std::vector<float> values;

  int64_t out_filters() const { return shape[0]; }
  int64_t in_channels() const { return shape[1]; }
  int64_t slice() const { return shape[2] * shape[3]; }
};

class TensorArchive {
 public:
  void insert(std::string layer_id, WeightTensor tensor);
  const WeightTensor* find(std::string_view layer_id) const;
  const WeightTensor& at(std::string_view layer_id) const;
  std::size_t size() const { return tensors_.size(); }
  const std::map<std::string, WeightTensor, std::less<>>& entries() const {
    return tensors_;
  }

 private:
  std::map<std::string, WeightTensor, std::less<>> tensors_;
};

// Manifest: {"blob": "<file>", "entries": [{"layer_id", "shape", "dtype",
// "offset", "length"}]}; offsets and lengths are in bytes, the blob holds
// little-endian float32. The blob path is resolved against the manifest's
// directory.
TensorArchive load_tensors(const std::filesystem::path& manifest,
                           const NetworkGraph& graph);
void save_tensors(const TensorArchive& archive,
                  const std::filesystem::path& manifest,
                  const std::string& blob_name = "weights.bin");

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace sparseflow
