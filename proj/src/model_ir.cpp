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

#include "sparseflow/model_ir.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <queue>
#include <sstream>

#include "json.hpp"
#include "sparseflow/error.hpp"

namespace sparseflow {
namespace {

using nlohmann::json;

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::kConv2d, "conv2d"},
    {LayerKind::kDepthwiseConv2d, "depthwise-conv2d"},
    {LayerKind::kPointwiseConv2d, "pointwise-conv2d"},
    {LayerKind::kFullyConnected, "fully-connected"},
    {LayerKind::kPassthrough, "passthrough"},
};

std::pair<int64_t, int64_t> read_pair(const json& obj, const char* key,
                                      const std::string& layer_id) {
  if (!obj.contains(key)) return {1, 1};
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
      !v[1].is_number_integer()) {
    fail(ErrorKind::kParse, "layer '" + layer_id + "': field '" + key +
                                "' must be a two-element integer list");
  }
  return {v[0].get<int64_t>(), v[1].get<int64_t>()};
}

void validate_layer(const LayerSpec& l) {
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::kValidation, "layer '" + l.id + "': " + what);
  };
  if (l.id.empty()) fail(ErrorKind::kValidation, "layer with empty id");
  if (l.in_channels < 1 || l.out_filters < 1) bad("non-positive channel count");
  if (l.kernel_h < 1 || l.kernel_w < 1) bad("non-positive kernel dimension");
  if (l.out_h < 1 || l.out_w < 1) bad("non-positive output dimension");
  if (l.stride_h < 1 || l.stride_w < 1) bad("non-positive stride");
  switch (l.kind) {
    case LayerKind::kDepthwiseConv2d:
      if (l.in_channels != l.out_filters) bad("depthwise layer needs O == I");
      break;
    case LayerKind::kPointwiseConv2d:
      if (l.kernel_area() != 1) bad("pointwise layer needs a 1x1 kernel");
      break;
    case LayerKind::kFullyConnected:
      if (l.kernel_area() != 1 || l.out_h != 1 || l.out_w != 1) {
        bad("fully-connected layer needs 1x1 kernel and output");
      }
      break;
    default:
      break;
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::array<int64_t, 4> LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::kDepthwiseConv2d:
      return {out_filters, 1, kernel_h, kernel_w};
    case LayerKind::kPassthrough:
      return {0, 0, 0, 0};
    default:
      return {out_filters, in_channels, kernel_h, kernel_w};
  }
}

int64_t LayerSpec::weight_count() const {
  const auto s = weight_shape();
  return s[0] * s[1] * s[2] * s[3];
}

int64_t ops_count(const LayerSpec& layer) {
  switch (layer.kind) {
    case LayerKind::kConv2d:
    case LayerKind::kPointwiseConv2d:
      return layer.out_filters * layer.in_channels * layer.kernel_area() *
             layer.out_h * layer.out_w;
    case LayerKind::kDepthwiseConv2d:
      return layer.in_channels * layer.kernel_area() * layer.out_h *
             layer.out_w;
    case LayerKind::kFullyConnected:
      return layer.out_filters * layer.in_channels;
    case LayerKind::kPassthrough:
      break;
  }
  fail(ErrorKind::kValidation,
       "layer '" + layer.id + "': operation count undefined for passthrough");
}

NetworkGraph::NetworkGraph(std::string name, std::vector<LayerSpec> layers,
                           std::vector<Edge> edges)
    : name_(std::move(name)), edges_(std::move(edges)) {
  std::unordered_map<std::string, std::size_t> original;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    validate_layer(layers[k]);
    if (!original.emplace(layers[k].id, k).second) {
      fail(ErrorKind::kValidation, "duplicate layer id '" + layers[k].id + "'");
    }
  }
  std::vector<std::vector<std::size_t>> out(layers.size());
  std::vector<int> indegree(layers.size(), 0);
  for (const auto& [from, to] : edges_) {
    auto a = original.find(from);
    if (a == original.end()) {
      fail(ErrorKind::kValidation, "edge references unknown layer '" + from + "'");
    }
    auto b = original.find(to);
    if (b == original.end()) {
      fail(ErrorKind::kValidation, "edge references unknown layer '" + to + "'");
    }
    if (a->second == b->second) {
      fail(ErrorKind::kValidation, "self-loop on layer '" + from + "'");
    }
    out[a->second].push_back(b->second);
    ++indegree[b->second];
  }
  // Kahn's algorithm; ties resolved by file order so valid inputs keep theirs.
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (indegree[k] == 0) ready.push(k);
  }
  std::vector<std::size_t> order;
  order.reserve(layers.size());
  while (!ready.empty()) {
    const std::size_t k = ready.top();
    ready.pop();
    order.push_back(k);
    for (std::size_t next : out[k]) {
      if (--indegree[next] == 0) ready.push(next);
    }
  }
  if (order.size() != layers.size()) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      if (indegree[k] > 0) {
        fail(ErrorKind::kValidation,
             "cycle in network graph through layer '" + layers[k].id + "'");
      }
    }
  }
  layers_.reserve(layers.size());
  for (std::size_t k : order) layers_.push_back(std::move(layers[k]));
  for (std::size_t k = 0; k < layers_.size(); ++k) index_[layers_[k].id] = k;
}

const LayerSpec* NetworkGraph::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &layers_[it->second];
}

const LayerSpec& NetworkGraph::at(std::string_view id) const {
  const LayerSpec* l = find(id);
  if (l == nullptr) {
    fail(ErrorKind::kValidation, "unknown layer '" + std::string(id) + "'");
  }
  return *l;
}

std::size_t NetworkGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    fail(ErrorKind::kValidation, "unknown layer '" + std::string(id) + "'");
  }
  return it->second;
}

std::vector<const LayerSpec*> NetworkGraph::prunable_layers() const {
  std::vector<const LayerSpec*> result;
  for (const auto& l : layers_) {
    if (l.prunable()) result.push_back(&l);
  }
  return result;
}

std::vector<std::string> NetworkGraph::producers(std::string_view id) const {
  std::vector<std::string> result;
  for (const auto& [from, to] : edges_) {
    if (to == id) result.push_back(from);
  }
  return result;
}

std::vector<std::string> NetworkGraph::consumers(std::string_view id) const {
  std::vector<std::string> result;
  for (const auto& [from, to] : edges_) {
    if (from == id) result.push_back(to);
  }
  return result;
}

NetworkGraph parse_network(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("network description: ") + e.what());
  }
  try {
    std::vector<LayerSpec> layers;
    for (const json& item : doc.at("layers")) {
      LayerSpec l;
      l.id = item.at("id").get<std::string>();
      const auto kind_text = item.at("kind").get<std::string>();
      const auto kind = parse_layer_kind(kind_text);
      if (!kind) {
        fail(ErrorKind::kParse,
             "layer '" + l.id + "': unknown kind '" + kind_text + "'");
      }
      l.kind = *kind;
      l.in_channels = item.value("in_channels", int64_t{1});
      l.out_filters = item.value("out_filters", int64_t{1});
      std::tie(l.kernel_h, l.kernel_w) = read_pair(item, "kernel", l.id);
      std::tie(l.out_h, l.out_w) = read_pair(item, "out_spatial", l.id);
      std::tie(l.stride_h, l.stride_w) = read_pair(item, "stride", l.id);
      layers.push_back(std::move(l));
    }
    std::vector<Edge> edges;
    if (doc.contains("edges")) {
      for (const json& e : doc.at("edges")) {
        if (!e.is_array() || e.size() != 2) {
          fail(ErrorKind::kParse, "edges must be [from, to] pairs");
        }
        edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      }
    }
    return NetworkGraph(doc.value("name", std::string{}), std::move(layers),
                        std::move(edges));
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("network description: ") + e.what());
  }
}

NetworkGraph load_network(const std::filesystem::path& path) {
  return parse_network(read_text_file(path));
}

std::string serialize_network(const NetworkGraph& graph) {
  json layers = json::array();
  for (const auto& l : graph.layers()) {
    json item;
    item["id"] = l.id;
    item["kind"] = std::string(to_string(l.kind));
    item["in_channels"] = l.in_channels;
    item["out_filters"] = l.out_filters;
    item["kernel"] = {l.kernel_h, l.kernel_w};
    item["out_spatial"] = {l.out_h, l.out_w};
    item["stride"] = {l.stride_h, l.stride_w};
    layers.push_back(std::move(item));
  }
  json edges = json::array();
  for (const auto& [from, to] : graph.edges()) edges.push_back({from, to});
  json doc;
  doc["name"] = graph.name();
  doc["layers"] = std::move(layers);
  doc["edges"] = std::move(edges);
  return doc.dump(2) + "\n";
}

void save_network(const NetworkGraph& graph, const std::filesystem::path& path) {
  write_text_file(path, serialize_network(graph));
}

void TensorArchive::insert(std::string layer_id, WeightTensor tensor) {
  tensors_.insert_or_assign(std::move(layer_id), std::move(tensor));
}

const WeightTensor* TensorArchive::find(std::string_view layer_id) const {
  auto it = tensors_.find(layer_id);
  return it == tensors_.end() ? nullptr : &it->second;
}

const WeightTensor& TensorArchive::at(std::string_view layer_id) const {
  const WeightTensor* t = find(layer_id);
  if (t == nullptr) {
    fail(ErrorKind::kValidation,
         "tensor archive has no entry for layer '" + std::string(layer_id) + "'");
  }
  return *t;
}

TensorArchive load_tensors(const std::filesystem::path& manifest,
                           const NetworkGraph& graph) {
  json doc;
  try {
    doc = json::parse(read_text_file(manifest));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("tensor manifest: ") + e.what());
  }
  std::filesystem::path blob_path;
  std::vector<json> entries;
  try {
    blob_path = manifest.parent_path() / doc.at("blob").get<std::string>();
    entries = doc.at("entries").get<std::vector<json>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("tensor manifest: ") + e.what());
  }
  std::ifstream blob(blob_path, std::ios::binary | std::ios::ate);
  if (!blob) fail(ErrorKind::kIo, "cannot open tensor blob " + blob_path.string());
  const auto blob_size = static_cast<uint64_t>(blob.tellg());

  TensorArchive archive;
  for (const json& e : entries) {
    std::string id;
    std::vector<int64_t> shape;
    uint64_t offset = 0;
    uint64_t length = 0;
    try {
      id = e.at("layer_id").get<std::string>();
      shape = e.at("shape").get<std::vector<int64_t>>();
      offset = e.at("offset").get<uint64_t>();
      length = e.at("length").get<uint64_t>();
      if (e.value("dtype", std::string("float32")) != "float32") {
        fail(ErrorKind::kValidation, "layer '" + id + "': dtype must be float32");
      }
    } catch (const json::exception& ex) {
      fail(ErrorKind::kParse, std::string("tensor manifest entry: ") + ex.what());
    }
    const LayerSpec* layer = graph.find(id);
    if (layer == nullptr) {
      fail(ErrorKind::kValidation,
           "tensor manifest names unknown layer '" + id + "'");
    }
    if (shape.size() == 2) shape.insert(shape.end(), {1, 1});
    const auto expected = layer->weight_shape();
    if (shape.size() != 4 || !std::equal(shape.begin(), shape.end(), expected.begin())) {
      fail(ErrorKind::kValidation, "layer '" + id + "': weight shape mismatch");
    }
    const uint64_t count = static_cast<uint64_t>(layer->weight_count());
    if (length != count * sizeof(float) || offset + length > blob_size) {
      fail(ErrorKind::kValidation,
           "layer '" + id + "': truncated payload (declared " +
               std::to_string(count) + " elements, " + std::to_string(length) +
               " bytes at offset " + std::to_string(offset) + ")");
    }
    WeightTensor tensor;
    std::copy(expected.begin(), expected.end(), tensor.shape.begin());
    tensor.values.resize(count);
    blob.seekg(static_cast<std::streamoff>(offset));
    blob.read(reinterpret_cast<char*>(tensor.values.data()),
              static_cast<std::streamsize>(length));
    if constexpr (std::endian::native == std::endian::big) {
      for (float& v : tensor.values) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
    }
    archive.insert(id, std::move(tensor));
  }
  for (const LayerSpec* l : graph.prunable_layers()) {
    if (archive.find(l->id) == nullptr) {
      fail(ErrorKind::kValidation,
           "tensor archive is missing prunable layer '" + l->id + "'");
    }
  }
  return archive;
}

void save_tensors(const TensorArchive& archive,
                  const std::filesystem::path& manifest,
                  const std::string& blob_name) {
  const auto blob_path = manifest.parent_path() / blob_name;
  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) fail(ErrorKind::kIo, "cannot write " + blob_path.string());
  json entries = json::array();
  uint64_t offset = 0;
  for (const auto& [id, tensor] : archive.entries()) {
    const uint64_t length = tensor.values.size() * sizeof(float);
    blob.write(reinterpret_cast<const char*>(tensor.values.data()),
               static_cast<std::streamsize>(length));
    entries.push_back({{"layer_id", id},
                       {"shape", tensor.shape},
                       {"dtype", "float32"},
                       {"offset", offset},
                       {"length", length}});
    offset += length;
  }
  json doc;
  doc["blob"] = blob_name;
  doc["entries"] = std::move(entries);
  write_text_file(manifest, doc.dump(2) + "\n");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace sparseflow
