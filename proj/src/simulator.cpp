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

#include "sparseflow/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "sparseflow/error.hpp"

namespace sparseflow {
namespace {

constexpr char kTraceMagic[8] = {'S', 'F', 'T', 'R', 'A', 'C', 'E', '1'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& v) {
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) return false;
  v = to_little(v);
  return true;
}

bool pruned(float x, double tau) { return std::abs(static_cast<double>(x)) <= tau; }

// Cumulative emission time after x windows, linear between emissions.
double cumulative_cycles(const std::vector<int64_t>& emit, double x) {
  if (x <= 0.0) return 0.0;
  const auto whole = static_cast<std::size_t>(std::floor(x));
  const double frac = x - static_cast<double>(whole);
  auto at = [&](std::size_t j) {
    return j == 0 ? 0.0 : static_cast<double>(emit[std::min(j, emit.size()) - 1]);
  };
  return at(whole) + frac * (at(whole + 1) - at(whole));
}

}  // namespace

void PairStream::validate() const {
  if (m < 1) fail(ErrorKind::kValidation, "window length must be positive");
  if (weights.size() != activations.size() ||
      weights.size() % static_cast<std::size_t>(m) != 0) {
    fail(ErrorKind::kValidation, "pair stream is not a whole number of windows of length " +
                                     std::to_string(m));
  }
}

SpeReport simulate_spe(const PairStream& stream, int64_t n, double tau_w, double tau_a,
                       const SpeConfig& cfg) {
  stream.validate();
  if (n < 1 || n > stream.m) fail(ErrorKind::kValidation, "SPE needs 1 <= N <= M");
  if (cfg.prefetch_windows < 1) fail(ErrorKind::kValidation, "prefetch must be >= 1");
  const auto windows = static_cast<std::size_t>(stream.windows());
  const auto m = static_cast<std::size_t>(stream.m);
  const auto lanes = static_cast<std::size_t>(n);
  const bool round_robin = cfg.arbiter == Arbiter::kRoundRobin;

  SpeReport r;
  r.nonzero_pairs.resize(windows);
  r.outputs.resize(windows);
  r.window_cycles.resize(windows);
  r.emit_cycle.resize(windows);
  std::vector<int64_t> remaining(windows);
  std::vector<int64_t> lane_remaining(round_robin ? windows * lanes : 0);
  for (std::size_t w = 0; w < windows; ++w) {
    double acc = 0.0;
    int64_t k = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const float wt = stream.weights[w * m + j];
      const float act = stream.activations[w * m + j];
      if (pruned(wt, tau_w) || pruned(act, tau_a)) continue;
      acc += static_cast<double>(wt) * static_cast<double>(act);
      if (round_robin) ++lane_remaining[w * lanes + j % lanes];
      ++k;
    }
    r.nonzero_pairs[w] = k;
    r.outputs[w] = acc;
    remaining[w] = k;
    r.dispatched += static_cast<uint64_t>(k);
  }
  r.skipped = static_cast<uint64_t>(windows * m) - r.dispatched;

  const auto prefetch = static_cast<std::size_t>(cfg.prefetch_windows);
  std::vector<std::size_t> lane_head(round_robin ? lanes : 1, 0);
  std::size_t head = 0;
  std::size_t emitted = 0;
  int64_t cycle = 0;
  while (emitted < windows) {
    ++cycle;
    const std::size_t visible = std::min(windows, emitted + prefetch);
    if (round_robin) {
      for (std::size_t lane = 0; lane < lanes; ++lane) {
        std::size_t& h = lane_head[lane];
        while (h < visible && lane_remaining[h * lanes + lane] == 0) ++h;
        if (h < visible) {
          --lane_remaining[h * lanes + lane];
          --remaining[h];
        }
      }
    } else {
      int64_t slots = n;
      while (head < visible && slots > 0) {
        const int64_t take = std::min(slots, remaining[head]);
        remaining[head] -= take;
        slots -= take;
        if (remaining[head] == 0) ++head;
      }
    }
    if (remaining[emitted] == 0) {
      r.emit_cycle[emitted] = cycle;
      r.window_cycles[emitted] = cycle - (emitted == 0 ? 0 : r.emit_cycle[emitted - 1]);
      ++emitted;
    }
  }
  r.total_cycles = cycle;
  r.occupancy = cycle > 0 ? static_cast<double>(r.dispatched) /
                                (static_cast<double>(n) * static_cast<double>(cycle))
                          : 0.0;
  r.joint_sparsity =
      windows > 0 ? static_cast<double>(r.skipped) / static_cast<double>(windows * m) : 0.0;
  return r;
}

double expected_window_cycles(int64_t m, int64_t n, double sparsity) {
  const double p = 1.0 - sparsity;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return std::max<double>(1.0, std::ceil(static_cast<double>(m) / n));
  double expected = 0.0;
  for (int64_t k = 0; k <= m; ++k) {
    const double log_pmf = std::lgamma(m + 1.0) - std::lgamma(k + 1.0) -
                           std::lgamma(m - k + 1.0) + k * std::log(p) +
                           (m - k) * std::log1p(-p);
    const auto cycles = std::max<int64_t>(1, (k + n - 1) / n);
    expected += std::exp(log_pmf) * static_cast<double>(cycles);
  }
  return expected;
}

LayerReport simulate_layer(const LayerSpec& layer, const DesignPoint& d,
                           const Allocation& allocation,
                           std::span<const PairStream> streams, double tau_w,
                           double tau_a, const SpeConfig& cfg) {
  const auto engines = static_cast<std::size_t>(d.i * d.o);
  if (allocation.i != d.i || allocation.o != d.o || streams.size() != engines) {
    fail(ErrorKind::kValidation, "layer '" + layer.id + "': expected " +
                                     std::to_string(engines) + " engine streams matching the allocation");
  }
  std::vector<SpeReport> per_engine;
  per_engine.reserve(engines);
  for (const PairStream& s : streams) {
    if (s.m != d.m || s.windows() != streams.front().windows()) {
      fail(ErrorKind::kValidation, "layer '" + layer.id + "': engine streams disagree in shape");
    }
    per_engine.push_back(simulate_spe(s, d.n, tau_w, tau_a, cfg));
  }
  LayerReport r;
  const auto windows = static_cast<std::size_t>(streams.front().windows());
  r.step_cycles.assign(windows, 0);
  r.engine_idle.assign(engines, 0);
  uint64_t dispatched = 0, skipped = 0;
  for (const SpeReport& e : per_engine) {
    for (std::size_t w = 0; w < windows; ++w) {
      r.step_cycles[w] = std::max(r.step_cycles[w], e.window_cycles[w]);
    }
    dispatched += e.dispatched;
    skipped += e.skipped;
  }
  for (std::size_t e = 0; e < engines; ++e) {
    for (std::size_t w = 0; w < windows; ++w) {
      r.engine_idle[e] += r.step_cycles[w] - per_engine[e].window_cycles[w];
    }
  }
  r.total_cycles = std::accumulate(r.step_cycles.begin(), r.step_cycles.end(), int64_t{0});
  const double total = static_cast<double>(r.total_cycles);
  if (total > 0.0) {
    r.occupancy = static_cast<double>(dispatched) /
                  (static_cast<double>(d.n) * static_cast<double>(engines) * total);
    r.images_per_cycle = static_cast<double>(windows) * static_cast<double>(d.i * d.o * d.m) /
                         (static_cast<double>(ops_count(layer)) * total);
  }
  const double pairs = static_cast<double>(dispatched + skipped);
  r.joint_sparsity = pairs > 0.0 ? static_cast<double>(skipped) / pairs : 0.0;
  return r;
}

ZeroRates zero_rates(const LayerSparsity& s) {
  ZeroRates z;
  z.weight = std::clamp(s.weight, 0.0, s.combined);
  z.activation = z.weight < 1.0 ? 1.0 - (1.0 - s.combined) / (1.0 - z.weight) : 0.0;
  z.activation = std::clamp(z.activation, 0.0, 1.0);
  return z;
}

PairStream generate_traces(const ZeroRates& rates, int64_t m, int64_t windows,
                           uint64_t seed, double tau_w, double tau_a) {
  if (m < 1 || windows < 0) fail(ErrorKind::kValidation, "invalid trace shape");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PairStream s;
  s.m = m;
  const auto count = static_cast<std::size_t>(m * windows);
  s.weights.resize(count);
  s.activations.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const bool w_zero = unit(rng) < rates.weight;
    const bool a_zero = unit(rng) < rates.activation;
    const double w_mag = tau_w + (1.0 - unit(rng));
    const bool negative = unit(rng) < 0.5;
    const double a_mag = tau_a + (1.0 - unit(rng));
    s.weights[k] = w_zero ? 0.0f : static_cast<float>(negative ? -w_mag : w_mag);
    s.activations[k] = a_zero ? 0.0f : static_cast<float>(a_mag);
  }
  return s;
}

std::vector<PairStream> generate_layer_traces(const LayerSpec& layer, const DesignPoint& d,
                                              const Allocation& allocation,
                                              std::span<const double> channel_sparsity,
                                              int64_t windows, uint64_t seed) {
  const int64_t reduction = layer.reduction_channels();
  if (static_cast<int64_t>(channel_sparsity.size()) != layer.in_channels ||
      static_cast<int64_t>(allocation.channel_group.size()) != reduction) {
    fail(ErrorKind::kValidation, "layer '" + layer.id + "': channel data does not match I");
  }
  const int64_t k_area = layer.kernel_area();
  const bool per_window = d.m == k_area && k_area > 1;
  std::vector<PairStream> streams;
  for (int64_t a = 0; a < d.i; ++a) {
    std::vector<double> density;
    for (int64_t c = 0; c < reduction; ++c) {
      if (allocation.channel_group[static_cast<std::size_t>(c)] == a) {
        density.push_back(channel_sparsity[static_cast<std::size_t>(c)]);
      }
    }
    if (density.empty()) fail(ErrorKind::kValidation, "empty channel group");
    for (int64_t b = 0; b < d.o; ++b) {
      std::seed_seq seq{seed, static_cast<uint64_t>(a * d.o + b)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      PairStream s;
      s.m = d.m;
      for (int64_t w = 0; w < windows; ++w) {
        for (int64_t j = 0; j < d.m; ++j) {
          const std::size_t slot = per_window ? static_cast<std::size_t>(w) % density.size()
                                              : static_cast<std::size_t>(j / k_area) % density.size();
          const bool zero = unit(rng) < density[slot];
          const double mag = 1.0 - unit(rng);
          s.weights.push_back(static_cast<float>(unit(rng) < 0.5 ? -1.0 : 1.0));
          s.activations.push_back(zero ? 0.0f : static_cast<float>(mag));
        }
      }
      streams.push_back(std::move(s));
    }
  }
  return streams;
}

void save_traces(const PairStream& stream, const std::filesystem::path& path) {
  stream.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(kTraceMagic, sizeof(kTraceMagic));
  const auto m = static_cast<std::size_t>(stream.m);
  for (std::size_t w = 0; w < static_cast<std::size_t>(stream.windows()); ++w) {
    put(out, static_cast<uint32_t>(m));
    for (std::size_t j = 0; j < m; ++j) {
      put(out, stream.weights[w * m + j]);
      put(out, stream.activations[w * m + j]);
    }
  }
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
}

PairStream load_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  char magic[sizeof(kTraceMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kTraceMagic, sizeof(magic)) != 0) {
    fail(ErrorKind::kParse, path.string() + ": not a trace file");
  }
  PairStream s;
  s.m = 0;
  uint32_t count = 0;
  while (get(in, count)) {
    if (count == 0 || (s.m != 0 && count != static_cast<uint32_t>(s.m))) {
      fail(ErrorKind::kValidation, path.string() + ": malformed window length " +
                                       std::to_string(count));
    }
    s.m = count;
    for (uint32_t j = 0; j < count; ++j) {
      float w = 0.0f, a = 0.0f;
      if (!get(in, w) || !get(in, a)) fail(ErrorKind::kParse, path.string() + ": truncated window");
      s.weights.push_back(w);
      s.activations.push_back(a);
    }
  }
  if (s.m == 0) s.m = 1;
  return s;
}

PipelineReport simulate_pipeline(const NetworkGraph& graph,
                                 const std::vector<std::vector<double>>& service,
                                 const std::map<Edge, int64_t>& depth,
                                 const PipelineConfig& cfg) {
  const std::vector<LayerSpec>& layers = graph.layers();
  const std::size_t count = layers.size();
  if (service.size() != count || count == 0) {
    fail(ErrorKind::kValidation, "pipeline needs one service trace per layer");
  }
  const auto tokens = static_cast<int64_t>(service.front().size());
  for (const auto& s : service) {
    if (static_cast<int64_t>(s.size()) != tokens) {
      fail(ErrorKind::kValidation, "service traces differ in length");
    }
  }

  PipelineReport report;
  report.tokens = tokens;
  struct Port {
    std::size_t edge;
    std::size_t peer;
  };
  std::vector<std::vector<Port>> inputs(count), outputs(count);
  for (const Edge& e : graph.edges()) {
    EdgeStats st;
    st.edge = e;
    auto it = depth.find(e);
    st.depth = it == depth.end() ? 1 : it->second;
    if (st.depth < 1) fail(ErrorKind::kValidation, "FIFO depth must be positive");
    const std::size_t u = graph.index_of(e.first);
    const std::size_t v = graph.index_of(e.second);
    outputs[u].push_back({report.edges.size(), v});
    inputs[v].push_back({report.edges.size(), u});
    report.edges.push_back(std::move(st));
  }
  std::vector<int64_t> lookahead(count, 0);
  for (const auto& [id, extra] : cfg.lookahead) lookahead[graph.index_of(id)] = extra;

  std::vector<int64_t> started(count, 0), finished(count, 0);
  std::vector<bool> busy(count, false);
  std::vector<double> busy_until(count, 0.0);
  std::vector<std::vector<bool>> blocked_by(count);
  for (std::size_t v = 0; v < count; ++v) blocked_by[v].assign(outputs[v].size(), false);
  std::vector<double> done(static_cast<std::size_t>(tokens), 0.0);
  std::vector<bool> sink(count);
  for (std::size_t v = 0; v < count; ++v) sink[v] = outputs[v].empty();

  auto inputs_ready = [&](std::size_t v) {
    const int64_t need = std::min(tokens, started[v] + 1 + lookahead[v]);
    for (const Port& p : inputs[v]) {
      if (finished[p.peer] < need) return false;
    }
    return true;
  };
  auto output_free = [&](std::size_t v, const Port& p) {
    return started[v] - started[p.peer] < report.edges[p.edge].depth;
  };
  auto finish = [&](std::size_t v, double now) {
    busy[v] = false;
    const auto t = static_cast<std::size_t>(finished[v]);
    ++finished[v];
    if (sink[v]) done[t] = std::max(done[t], now);
    for (const Port& p : outputs[v]) {
      auto& st = report.edges[p.edge];
      st.max_occupancy = std::max(st.max_occupancy, finished[v] - started[p.peer]);
    }
  };

  double now = 0.0;
  int64_t total_finished = 0;
  const int64_t goal = tokens * static_cast<int64_t>(count);
  while (total_finished < goal) {
    bool progress = true;
    while (progress) {
      progress = false;
      for (std::size_t v = 0; v < count; ++v) {
        if (busy[v] || started[v] >= tokens || !inputs_ready(v)) continue;
        bool free = true;
        for (std::size_t k = 0; k < outputs[v].size(); ++k) {
          if (!output_free(v, outputs[v][k])) {
            free = false;
            blocked_by[v][k] = true;
          }
        }
        if (!free) continue;
        for (std::size_t k = 0; k < outputs[v].size(); ++k) {
          if (blocked_by[v][k]) ++report.edges[outputs[v][k].edge].stalled_tokens;
          blocked_by[v][k] = false;
        }
        const double dt = service[v][static_cast<std::size_t>(started[v])];
        ++started[v];
        busy[v] = true;
        busy_until[v] = now + std::max(dt, 0.0);
        if (busy_until[v] <= now) {
          finish(v, now);
          ++total_finished;
        }
        progress = true;
      }
    }
    if (total_finished >= goal) break;

    double next = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < count; ++v) {
      if (busy[v]) next = std::min(next, busy_until[v]);
    }
    if (std::isinf(next)) {
      for (std::size_t v = 0; v < count; ++v) {
        if (started[v] >= tokens || !inputs_ready(v)) continue;
        for (const Port& p : outputs[v]) {
          if (!output_free(v, p)) {
            const EdgeStats& st = report.edges[p.edge];
            fail(ErrorKind::kDeadlock, "deadlock: FIFO " + st.edge.first + " -> " +
                                           st.edge.second + " is full (depth " +
                                           std::to_string(st.depth) + ")");
          }
        }
      }
      fail(ErrorKind::kDeadlock, "deadlock: no layer can make progress");
    }
    for (std::size_t v = 0; v < count; ++v) {
      if (busy[v] || started[v] >= tokens || !inputs_ready(v)) continue;
      for (std::size_t k = 0; k < outputs[v].size(); ++k) {
        if (!output_free(v, outputs[v][k])) {
          report.edges[outputs[v][k].edge].stall_cycles += next - now;
        }
      }
    }
    now = next;
    for (std::size_t v = 0; v < count; ++v) {
      if (busy[v] && busy_until[v] <= now) {
        finish(v, now);
        ++total_finished;
      }
    }
  }

  report.total_cycles = now;
  const auto warm = std::min<int64_t>(
      tokens - 1, static_cast<int64_t>(std::floor(cfg.warmup_fraction * static_cast<double>(tokens))));
  if (warm > 0) {
    const double span = done.back() - done[static_cast<std::size_t>(warm - 1)];
    report.steady_tokens_per_cycle =
        span > 0.0 ? static_cast<double>(tokens - warm) / span
                   : std::numeric_limits<double>::infinity();
  } else {
    report.steady_tokens_per_cycle =
        now > 0.0 ? static_cast<double>(tokens) / now : std::numeric_limits<double>::infinity();
  }
  return report;
}

DesignSimReport simulate_design(const NetworkGraph& graph, const NetworkDesign& g,
                                const SparsityProfile& profile,
                                const DesignSimOptions& options) {
  if (options.tokens < 1 || options.windows_per_token <= 0.0) {
    fail(ErrorKind::kValidation, "simulation needs positive token counts");
  }
  const std::vector<LayerSpec>& layers = graph.layers();
  std::vector<double> per_image(layers.size(), 0.0);
  double heaviest = 0.0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerSpec& l = layers[k];
    if (!l.prunable()) continue;
    const DesignPoint& d = g.at(l.id).point;
    validate_design_point(l, d, g.policy);
    per_image[k] = static_cast<double>(ops_count(l)) / static_cast<double>(d.i * d.o * d.m);
    heaviest = std::max(heaviest, per_image[k]);
  }
  DesignSimReport report;
  report.tokens_per_image = heaviest > 0.0 ? heaviest / options.windows_per_token : 1.0;
  report.service.assign(layers.size(), std::vector<double>(static_cast<std::size_t>(options.tokens), 0.0));

  uint64_t dispatched = 0, pairs = 0;
  double mac_cycles = 0.0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerSpec& l = layers[k];
    if (!l.prunable()) continue;
    const LayerDesign& ld = g.at(l.id);
    LayerSparsity ls;
    ls.combined = ld.sparsity;
    if (auto it = profile.layers.find(l.id); it != profile.layers.end()) {
      ls.weight = it->second.weight;
    }
    const double per_token = per_image[k] / report.tokens_per_image;
    const auto windows = static_cast<int64_t>(
        std::ceil(per_token * static_cast<double>(options.tokens))) + 1;
    std::seed_seq seq{options.seed, static_cast<uint64_t>(k)};
    std::mt19937_64 mix(seq);
    const PairStream stream = generate_traces(zero_rates(ls), ld.point.m, windows, mix());
    const SpeReport spe = simulate_spe(stream, ld.point.n, 0.0, 0.0, options.spe);
    for (int64_t t = 0; t < options.tokens; ++t) {
      report.service[k][static_cast<std::size_t>(t)] =
          cumulative_cycles(spe.emit_cycle, static_cast<double>(t + 1) * per_token) -
          cumulative_cycles(spe.emit_cycle, static_cast<double>(t) * per_token);
    }
    LayerSimStats stats;
    stats.id = l.id;
    stats.predicted_images_per_cycle = layer_throughput(l, ld.point, ld.sparsity);
    stats.mean_window_cycles =
        static_cast<double>(spe.total_cycles) / static_cast<double>(windows);
    stats.occupancy = spe.occupancy;
    stats.joint_sparsity = spe.joint_sparsity;
    report.layers.push_back(stats);
    dispatched += spe.dispatched;
    pairs += spe.dispatched + spe.skipped;
    mac_cycles += static_cast<double>(ld.point.n) * static_cast<double>(spe.total_cycles);
  }

  std::map<Edge, int64_t> depth = options.depth;
  if (options.auto_depth) {
    for (const auto& [e, dd] : choose_pipeline_depths(graph, report.service, options.window_len,
                                                      options.buffer_percentile)) {
      depth.emplace(e, dd);
    }
  }
  for (const Edge& e : graph.edges()) {
    if (depth.count(e) != 0) continue;
    const LayerSpec& consumer = graph.at(e.second);
    int64_t dd = 1;
    if (consumer.prunable()) {
      dd = g.at(consumer.id).point.buffer_depth;
    } else if (const LayerSpec& producer = graph.at(e.first); producer.prunable()) {
      dd = g.at(producer.id).point.buffer_depth;
    }
    depth[e] = dd;
  }
  report.depth = depth;
  report.pipeline = simulate_pipeline(graph, report.service, depth, options.pipeline);
  report.predicted_images_per_cycle = design_throughput(g, graph);
  report.measured_images_per_cycle =
      report.pipeline.steady_tokens_per_cycle / report.tokens_per_image;
  report.occupancy = mac_cycles > 0.0 ? static_cast<double>(dispatched) / mac_cycles : 0.0;
  report.joint_sparsity = pairs > 0 ? static_cast<double>(pairs - dispatched) /
                                          static_cast<double>(pairs)
                                    : 0.0;
  return report;
}

std::map<Edge, int64_t> choose_pipeline_depths(const NetworkGraph& graph,
                                               const std::vector<std::vector<double>>& service,
                                               std::size_t window_len, double percentile) {
  std::vector<int64_t> own(graph.layers().size(), 1);
  for (std::size_t k = 0; k < service.size() && k < own.size(); ++k) {
    const std::vector<double>& s = service[k];
    if (s.empty()) continue;
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    if (mean <= 0.0) continue;
    std::vector<double> tokens(s.size());
    std::transform(s.begin(), s.end(), tokens.begin(), [mean](double x) { return x / mean; });
    own[k] = choose_buffer_depth(tokens, window_len, percentile);
  }
  std::map<Edge, int64_t> depth;
  for (const Edge& e : graph.edges()) {
    depth[e] = std::max(own[graph.index_of(e.first)], own[graph.index_of(e.second)]);
  }
  return depth;
}

std::string serialize_sim_report(const DesignSimReport& report, const NetworkGraph& graph) {
  using nlohmann::json;
  json layers = json::array();
  for (const LayerSimStats& s : report.layers) {
    layers.push_back({{"id", s.id},
                      {"predicted_images_per_cycle", s.predicted_images_per_cycle},
                      {"mean_window_cycles", s.mean_window_cycles},
                      {"occupancy", s.occupancy},
                      {"joint_sparsity", s.joint_sparsity}});
  }
  json fifos = json::array();
  for (const EdgeStats& e : report.pipeline.edges) {
    fifos.push_back({{"from", e.edge.first},
                     {"to", e.edge.second},
                     {"depth", e.depth},
                     {"stall_cycles", e.stall_cycles},
                     {"stalled_tokens", e.stalled_tokens},
                     {"max_occupancy", e.max_occupancy}});
  }
  json doc{{"network", graph.name()},
           {"tokens", report.pipeline.tokens},
           {"tokens_per_image", report.tokens_per_image},
           {"total_cycles", report.pipeline.total_cycles},
           {"predicted_images_per_cycle", report.predicted_images_per_cycle},
           {"measured_images_per_cycle", report.measured_images_per_cycle},
           {"mac_occupancy", report.occupancy},
           {"joint_sparsity", report.joint_sparsity},
           {"layers", std::move(layers)},
           {"fifos", std::move(fifos)}};
  return doc.dump(2) + "\n";
}

}  // namespace sparseflow
