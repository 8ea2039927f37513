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

#include "sparseflow/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "sparseflow/error.hpp"

namespace sparseflow {
namespace {

using nlohmann::json;

constexpr std::pair<HistogramAxis, std::string_view> kAxisNames[] = {
    {HistogramAxis::kWholeLayer, "whole-layer"},
    {HistogramAxis::kPerInputChannel, "per-input-channel"},
    {HistogramAxis::kPerOutputFilter, "per-output-filter"},
};

HistogramAxis parse_axis(const std::string& text) {
  for (const auto& [axis, name] : kAxisNames) {
    if (name == text) return axis;
  }
  fail(ErrorKind::kParse, "unknown histogram axis '" + text + "'");
}

double independent(double a, double b) { return 1.0 - (1.0 - a) * (1.0 - b); }

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string(what) + ": " + e.what());
  }
}

}  // namespace

const ThresholdPair& ThresholdAssignment::at(std::string_view id) const {
  auto it = layers.find(id);
  if (it == layers.end()) {
    fail(ErrorKind::kValidation,
         "no thresholds for layer '" + std::string(id) + "'");
  }
  return it->second;
}

void ThresholdAssignment::validate(const NetworkGraph& graph) const {
  for (const LayerSpec* l : graph.prunable_layers()) {
    const ThresholdPair& t = at(l->id);
    if (!(t.tau_w >= 0.0) || !(t.tau_a >= 0.0) || !std::isfinite(t.tau_w) ||
        !std::isfinite(t.tau_a)) {
      fail(ErrorKind::kValidation,
           "layer '" + l->id + "': thresholds must be finite and non-negative");
    }
  }
}

ThresholdAssignment uniform_thresholds(const NetworkGraph& graph, double tau_w,
                                       double tau_a) {
  ThresholdAssignment result;
  for (const LayerSpec* l : graph.prunable_layers()) {
    result.layers[l->id] = {tau_w, tau_a};
  }
  return result;
}

ThresholdAssignment parse_thresholds(std::string_view text) {
  const json doc = parse_json(text, "thresholds");
  ThresholdAssignment result;
  try {
    for (const auto& [id, item] : doc.at("layers").items()) {
      result.layers[id] = {item.at("tau_w").get<double>(),
                           item.at("tau_a").get<double>()};
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("thresholds: ") + e.what());
  }
  return result;
}

std::string serialize_thresholds(const ThresholdAssignment& thresholds) {
  json layers = json::object();
  for (const auto& [id, t] : thresholds.layers) {
    layers[id] = {{"tau_w", t.tau_w}, {"tau_a", t.tau_a}};
  }
  return json{{"layers", layers}}.dump(2) + "\n";
}

std::string_view to_string(HistogramAxis axis) {
  for (const auto& [a, name] : kAxisNames) {
    if (a == axis) return name;
  }
  return "unknown";
}

void MagnitudeHistogram::validate() const {
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::kValidation, "histogram for layer '" + layer_id + "': " + what);
  };
  if (edges.size() < 2) bad("needs at least one bin");
  if (counts.size() + 1 != edges.size()) bad("edge/count length mismatch");
  if (edges.front() != 0.0) bad("first edge must be 0");
  for (std::size_t k = 1; k < edges.size(); ++k) {
    const bool zero_bin = k == 1 && edges[1] == 0.0;
    if (!(edges[k] > edges[k - 1]) && !zero_bin) bad("edges must ascend strictly");
  }
  const uint64_t total = std::accumulate(counts.begin(), counts.end(), uint64_t{0});
  if (total != samples) bad("counts do not sum to the sample count");
  if (samples == 0) bad("no samples");
}

CdfValue activation_sparsity(const MagnitudeHistogram& hist, double tau_a) {
  hist.validate();
  if (tau_a < 0.0) fail(ErrorKind::kValidation, "negative activation threshold");
  CdfValue result;
  if (tau_a > hist.edges.back()) {
    result.value = 1.0;
    result.beyond_range = true;
    return result;
  }
  double mass = 0.0;
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    const double lo = hist.edges[b];
    const double hi = hist.edges[b + 1];
    const auto count = static_cast<double>(hist.counts[b]);
    if (hi <= tau_a) {
      mass += count;
    } else {
      if (tau_a > lo) mass += count * (tau_a - lo) / (hi - lo);
      break;
    }
  }
  result.value = std::clamp(mass / static_cast<double>(hist.samples), 0.0, 1.0);
  return result;
}

double histogram_quantile(const MagnitudeHistogram& hist, double q) {
  hist.validate();
  q = std::clamp(q, 0.0, 1.0);
  const double target = q * static_cast<double>(hist.samples);
  double mass = 0.0;
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    const double lo = hist.edges[b];
    const double hi = hist.edges[b + 1];
    const auto count = static_cast<double>(hist.counts[b]);
    if (mass + count >= target) {
      if (hi == lo || count == 0.0) return lo;
      return lo + (hi - lo) * std::max(0.0, target - mass) / count;
    }
    mass += count;
  }
  return hist.edges.back();
}

HistogramSet parse_histograms(std::string_view text) {
  const json doc = parse_json(text, "histograms");
  if (!doc.is_array()) fail(ErrorKind::kParse, "histogram file must be a list");
  HistogramSet set;
  for (const json& item : doc) {
    MagnitudeHistogram h;
    try {
      h.layer_id = item.at("layer_id").get<std::string>();
      h.axis = parse_axis(item.value("axis", std::string("whole-layer")));
      if (item.contains("channel") && !item.at("channel").is_null()) {
        h.channel = item.at("channel").get<int64_t>();
      }
      h.edges = item.at("edges").get<std::vector<double>>();
      h.counts = item.at("counts").get<std::vector<uint64_t>>();
      h.samples = item.at("samples").get<uint64_t>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, std::string("histogram entry: ") + e.what());
    }
    h.validate();
    LayerHistograms& slot = set[h.layer_id];
    switch (h.axis) {
      case HistogramAxis::kWholeLayer:
        slot.layer = std::move(h);
        break;
      case HistogramAxis::kPerInputChannel:
        if (h.channel < 0) {
          fail(ErrorKind::kValidation,
               "per-channel histogram for '" + h.layer_id + "' lacks a channel");
        }
        slot.per_input_channel[h.channel] = std::move(h);
        break;
      case HistogramAxis::kPerOutputFilter:
        // Activations are shared by all filters; nothing to use per filter.
        break;
    }
  }
  return set;
}

HistogramSet load_histograms(const std::filesystem::path& path) {
  return parse_histograms(read_text_file(path));
}

std::string serialize_histograms(const HistogramSet& set) {
  json doc = json::array();
  auto emit = [&doc](const MagnitudeHistogram& h) {
    json item{{"layer_id", h.layer_id},
              {"axis", std::string(to_string(h.axis))},
              {"edges", h.edges},
              {"counts", h.counts},
              {"samples", h.samples}};
    if (h.channel >= 0) item["channel"] = h.channel;
    doc.push_back(std::move(item));
  };
  for (const auto& [id, layer] : set) {
    if (layer.layer) emit(*layer.layer);
    for (const auto& [c, h] : layer.per_input_channel) emit(h);
  }
  return doc.dump(1) + "\n";
}

WeightSparsity weight_sparsity(const WeightTensor& weights, double tau_w,
                               bool depthwise) {
  if (weights.values.empty()) {
    fail(ErrorKind::kValidation, "weight sparsity of an empty tensor");
  }
  const int64_t filters = weights.out_filters();
  const int64_t channels = weights.in_channels();
  const int64_t slice = weights.slice();
  std::vector<uint64_t> per_channel(depthwise ? filters : channels, 0);
  std::vector<uint64_t> per_filter(filters, 0);
  uint64_t pruned = 0;
  const float* v = weights.values.data();
  for (int64_t f = 0; f < filters; ++f) {
    for (int64_t c = 0; c < channels; ++c) {
      uint64_t n = 0;
      for (int64_t k = 0; k < slice; ++k, ++v) {
        if (std::abs(static_cast<double>(*v)) <= tau_w) ++n;
      }
      per_filter[f] += n;
      per_channel[depthwise ? f : c] += n;
      pruned += n;
    }
  }
  WeightSparsity result;
  result.overall = static_cast<double>(pruned) / static_cast<double>(weights.values.size());
  const double per_channel_size =
      static_cast<double>(depthwise ? slice : filters * slice);
  for (uint64_t n : per_channel) {
    result.per_input_channel.push_back(static_cast<double>(n) / per_channel_size);
  }
  for (uint64_t n : per_filter) {
    result.per_output_filter.push_back(static_cast<double>(n) /
                                       static_cast<double>(channels * slice));
  }
  return result;
}

double weight_magnitude_quantile(const WeightTensor& weights, double q) {
  if (weights.values.empty() || q <= 0.0) return 0.0;
  std::vector<float> mags(weights.values.size());
  std::transform(weights.values.begin(), weights.values.end(), mags.begin(),
                 [](float x) { return std::abs(x); });
  const auto n = mags.size();
  const auto rank = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(std::min(q, 1.0) * static_cast<double>(n))),
      1, n);
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   mags.end());
  return mags[rank - 1];
}

std::string_view to_string(CombineMode mode) {
  return mode == CombineMode::kIndependent ? "independent" : "measured-joint";
}

double combined_sparsity(double weight, double activation, CombineMode mode,
                         std::optional<double> measured_joint) {
  if (mode == CombineMode::kMeasuredJoint) {
    if (!measured_joint) {
      fail(ErrorKind::kValidation, "measured-joint mode needs a measured fraction");
    }
    return std::clamp(*measured_joint, 0.0, 1.0);
  }
  return independent(weight, activation);
}

const LayerSparsity& SparsityProfile::at(std::string_view id) const {
  auto it = layers.find(id);
  if (it == layers.end()) {
    fail(ErrorKind::kValidation,
         "sparsity profile has no layer '" + std::string(id) + "'");
  }
  return it->second;
}

SparsityProfile build_profile(const NetworkGraph& graph,
                              const TensorArchive& archive,
                              const HistogramSet& histograms,
                              const ThresholdAssignment& thresholds,
                              const ProfileOptions& options) {
  thresholds.validate(graph);
  SparsityProfile profile;
  profile.mode = options.mode;
  for (const LayerSpec* l : graph.prunable_layers()) {
    auto hist_it = histograms.find(l->id);
    if (hist_it == histograms.end() ||
        (!hist_it->second.layer && hist_it->second.per_input_channel.empty())) {
      fail(ErrorKind::kValidation, "missing activation histogram for layer '" + l->id + "'");
    }
    const LayerHistograms& hists = hist_it->second;
    const ThresholdPair& tau = thresholds.at(l->id);
    const WeightSparsity ws = weight_sparsity(archive.at(l->id), tau.tau_w,
                                              l->kind == LayerKind::kDepthwiseConv2d);

    LayerSparsity s;
    s.thresholds = tau;
    s.weight = ws.overall;

    const auto channels = static_cast<std::size_t>(l->in_channels);
    std::vector<double> act(channels, 0.0);
    if (hists.layer) {
      const CdfValue layer_cdf = activation_sparsity(*hists.layer, tau.tau_a);
      s.activation = layer_cdf.value;
      s.activation_beyond_range = layer_cdf.beyond_range;
      std::fill(act.begin(), act.end(), layer_cdf.value);
    }
    if (!hists.per_input_channel.empty()) {
      double mean = 0.0;
      for (std::size_t c = 0; c < channels; ++c) {
        auto it = hists.per_input_channel.find(static_cast<int64_t>(c));
        if (it == hists.per_input_channel.end()) {
          if (hists.layer) continue;
          fail(ErrorKind::kValidation, "layer '" + l->id + "': missing histogram for channel " +
                                           std::to_string(c));
        }
        const CdfValue cdf = activation_sparsity(it->second, tau.tau_a);
        act[c] = cdf.value;
        s.activation_beyond_range = s.activation_beyond_range || cdf.beyond_range;
      }
      for (double a : act) mean += a;
      if (!hists.layer) s.activation = mean / static_cast<double>(channels);
    }

    std::optional<double> measured;
    if (auto it = options.measured_joint.find(l->id); it != options.measured_joint.end()) {
      measured = it->second;
    }
    s.combined = combined_sparsity(s.weight, s.activation, options.mode, measured);
    s.per_input_channel.resize(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      s.per_input_channel[c] = independent(ws.per_input_channel[c], act[c]);
    }
    s.per_output_filter.reserve(ws.per_output_filter.size());
    for (double w : ws.per_output_filter) {
      s.per_output_filter.push_back(independent(w, s.activation));
    }
    profile.layers.emplace(l->id, std::move(s));
  }
  return profile;
}

SparsityProfile uniform_profile(const NetworkGraph& graph,
                                const std::map<std::string, double, std::less<>>& combined) {
  SparsityProfile profile;
  for (const LayerSpec* l : graph.prunable_layers()) {
    auto it = combined.find(l->id);
    const double s = it == combined.end() ? 0.0 : it->second;
    LayerSparsity ls;
    ls.combined = s;
    ls.per_input_channel.assign(static_cast<std::size_t>(l->in_channels), s);
    ls.per_output_filter.assign(static_cast<std::size_t>(l->out_filters), s);
    profile.layers.emplace(l->id, std::move(ls));
  }
  return profile;
}

double network_sparsity(const SparsityProfile& profile, const NetworkGraph& graph,
                        SparsityWeighting weighting) {
  double weighted = 0.0;
  double total = 0.0;
  for (const LayerSpec* l : graph.prunable_layers()) {
    const double w = weighting == SparsityWeighting::kOperations
                         ? static_cast<double>(ops_count(*l))
                         : 1.0;
    weighted += w * profile.combined(l->id);
    total += w;
  }
  return total > 0.0 ? weighted / total : 0.0;
}

std::string serialize_profile(const SparsityProfile& profile,
                              const NetworkGraph& graph) {
  json layers = json::array();
  for (const LayerSpec* l : graph.prunable_layers()) {
    const LayerSparsity& s = profile.at(l->id);
    layers.push_back({{"id", l->id},
                      {"tau_w", s.thresholds.tau_w},
                      {"tau_a", s.thresholds.tau_a},
                      {"weight_sparsity", s.weight},
                      {"activation_sparsity", s.activation},
                      {"combined_sparsity", s.combined},
                      {"activation_beyond_range", s.activation_beyond_range},
                      {"per_input_channel", s.per_input_channel},
                      {"per_output_filter", s.per_output_filter}});
  }
  json doc{{"network", graph.name()},
           {"mode", std::string(to_string(profile.mode))},
           {"network_sparsity", network_sparsity(profile, graph)},
           {"layers", std::move(layers)}};
  return doc.dump(2) + "\n";
}

SparsityProfile parse_profile(std::string_view text) {
  const json doc = parse_json(text, "sparsity profile");
  SparsityProfile profile;
  try {
    profile.mode = doc.value("mode", std::string("independent")) == "measured-joint"
                       ? CombineMode::kMeasuredJoint
                       : CombineMode::kIndependent;
    for (const json& item : doc.at("layers")) {
      LayerSparsity s;
      s.thresholds = {item.value("tau_w", 0.0), item.value("tau_a", 0.0)};
      s.weight = item.value("weight_sparsity", 0.0);
      s.activation = item.value("activation_sparsity", 0.0);
      s.combined = item.at("combined_sparsity").get<double>();
      s.activation_beyond_range = item.value("activation_beyond_range", false);
      if (item.contains("per_input_channel")) {
        s.per_input_channel = item.at("per_input_channel").get<std::vector<double>>();
      }
      if (item.contains("per_output_filter")) {
        s.per_output_filter = item.at("per_output_filter").get<std::vector<double>>();
      }
      profile.layers.emplace(item.at("id").get<std::string>(), std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("sparsity profile: ") + e.what());
  }
  return profile;
}

}  // namespace sparseflow
