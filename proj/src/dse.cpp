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

#include "sparseflow/dse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <tuple>
#include <utility>

#include "json.hpp"
#include "sparseflow/error.hpp"

namespace sparseflow {
namespace {

using nlohmann::json;

using CandidateKey = std::tuple<int64_t, int64_t, int64_t, double, int64_t, int64_t, int64_t>;

CandidateKey candidate_key(const ResourceVector& cost, double theta,
                           const DesignPoint& d) {
  return {cost.dsp, cost.lut, cost.bram18k, theta, d.n, d.i, d.o};
}

// Smallest N in [1, m] whose throughput reaches `target`, or m + 1.
int64_t min_n_reaching(const LayerSpec& layer, DesignPoint d, double sparsity,
                       double target) {
  int64_t lo = 1;
  int64_t hi = d.m + 1;
  while (lo < hi) {
    d.n = lo + (hi - lo) / 2;
    if (layer_throughput(layer, d, sparsity) >= target) {
      hi = d.n;
    } else {
      lo = d.n + 1;
    }
  }
  return lo;
}

struct RangeKey {
  std::size_t first;
  std::size_t last;
  auto operator<=>(const RangeKey&) const = default;
};

// Memoized explore over consecutive layer ranges.
class RangeExplorer {
 public:
  RangeExplorer(const NetworkGraph& graph, const SparsityProfile& profile,
                const ResourceVector& budget, const DseOptions& options)
      : graph_(graph), profile_(profile), budget_(budget), options_(options) {}

  const std::optional<Partition>& get(std::size_t first, std::size_t last) {
    auto [it, inserted] = cache_.try_emplace(RangeKey{first, last});
    if (!inserted) return it->second;
    NetworkGraph sub = slice_graph(graph_, first, last);
    Partition p;
    for (const LayerSpec& l : sub.layers()) p.layer_ids.push_back(l.id);
    if (sub.prunable_layers().empty()) {
      p.design.policy = options_.policy;
      p.throughput = std::numeric_limits<double>::infinity();
      it->second = std::move(p);
      return it->second;
    }
    try {
      ExploreResult r = explore(sub, profile_, budget_, options_);
      p.design = std::move(r.design);
      p.resources = r.resources;
      p.throughput = r.throughput;
      it->second = std::move(p);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInfeasible) throw;
    }
    return it->second;
  }

 private:
  const NetworkGraph& graph_;
  const SparsityProfile& profile_;
  ResourceVector budget_;
  DseOptions options_;
  std::map<RangeKey, std::optional<Partition>> cache_;
};

std::optional<PartitionResult> assemble(RangeExplorer& ranges,
                                        const std::vector<bool>& splits,
                                        const Platform& platform, int64_t batch,
                                        WindowPolicy policy) {
  PartitionResult result;
  result.splits = splits;
  result.design.policy = policy;
  std::vector<double> rates;
  std::size_t first = 0;
  const std::size_t count = splits.size() + 1;
  for (std::size_t k = 0; k < count; ++k) {
    if (k + 1 < count && !splits[k]) continue;
    const std::optional<Partition>& p = ranges.get(first, k);
    if (!p) return std::nullopt;
    Partition part = *p;
    part.index = result.partitions.size();
    for (const auto& [id, ld] : part.design.layers) result.design.layers[id] = ld;
    result.design.partitions.push_back(part.layer_ids);
    rates.push_back(part.throughput);
    result.partitions.push_back(std::move(part));
    first = k + 1;
  }
  result.effective_images_per_s = effective_throughput(rates, platform, batch);
  return result;
}

}  // namespace

NetworkDesign minimal_design(const NetworkGraph& graph, const SparsityProfile& profile,
                             const DseOptions& options) {
  NetworkDesign g;
  g.policy = options.policy;
  for (const LayerSpec* l : graph.prunable_layers()) {
    g.layers[l->id] = {make_design_point(*l, 1, 1, 1, options.buffer_depth, options.policy),
                       profile.combined(l->id)};
  }
  return g;
}

NetworkDesign rate_balance(const NetworkDesign& g, const NetworkGraph& graph,
                           const DseOptions& options) {
  const double target = network_throughput(g, graph);
  const bool monotone = options.model.non_negative();
  NetworkDesign out = g;
  for (const LayerSpec* l : graph.prunable_layers()) {
    LayerDesign& ld = out.at(l->id);
    const DesignPoint current = ld.point;
    const double s = ld.sparsity;
    const double theta_now = layer_throughput(*l, current, s);
    const ResourceVector cost_now = estimate_layer(*l, current, options.model);
    const bool bottleneck = theta_now == target;

    DesignPoint best = current;
    CandidateKey best_key = candidate_key(cost_now, theta_now, current);
    auto consider = [&](const DesignPoint& d) {
      const double theta = layer_throughput(*l, d, s);
      if (theta < target || (bottleneck && theta != target)) return;
      const ResourceVector cost = estimate_layer(*l, d, options.model);
      if (!cost.fits(cost_now)) return;
      const CandidateKey key = candidate_key(cost, theta, d);
      if (key < best_key) {
        best_key = key;
        best = d;
      }
    };
    for (int64_t i : divisors(l->reduction_channels())) {
      for (int64_t o : divisors(l->out_filters)) {
        DesignPoint d = make_design_point(*l, i, o, 1, current.buffer_depth, g.policy);
        if (monotone) {
          d.n = min_n_reaching(*l, d, s, target);
          if (d.n <= d.m) consider(d);
        } else {
          for (d.n = 1; d.n <= d.m; ++d.n) consider(d);
        }
      }
    }
    ld.point = best;
  }
  return out;
}

std::size_t slowest_layer(const NetworkDesign& g, const NetworkGraph& graph) {
  std::size_t best = graph.layers().size();
  double best_theta = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < graph.layers().size(); ++k) {
    const LayerSpec& l = graph.layers()[k];
    if (!l.prunable()) continue;
    const double theta = layer_throughput(g, l);
    if (theta < best_theta) {
      best_theta = theta;
      best = k;
    }
  }
  if (best == graph.layers().size()) {
    fail(ErrorKind::kValidation, "design has no prunable layers");
  }
  return best;
}

NetworkDesign increment_slowest(const NetworkDesign& g, const NetworkGraph& graph,
                                const DseOptions& options) {
  (void)options;
  const LayerSpec& l = graph.layers()[slowest_layer(g, graph)];
  NetworkDesign out = g;
  DesignPoint& d = out.at(l.id).point;
  if (d.n < d.m) {
    ++d.n;
    return out;
  }
  auto next_divisor = [](int64_t dim, int64_t current) -> std::optional<int64_t> {
    for (int64_t v : divisors(dim)) {
      if (v > current) return v;
    }
    return std::nullopt;
  };
  if (auto i = next_divisor(l.reduction_channels(), d.i)) {
    d = make_design_point(l, *i, d.o, d.n, d.buffer_depth, g.policy);
    return out;
  }
  if (auto o = next_divisor(l.out_filters, d.o)) {
    d.o = *o;
    return out;
  }
  fail(ErrorKind::kSaturated, "layer '" + l.id + "' is already fully parallel");
}

ExploreResult explore(const NetworkGraph& graph, const SparsityProfile& profile,
                      const ResourceVector& budget, const DseOptions& options) {
  NetworkDesign working = minimal_design(graph, profile, options);
  ExploreResult result;
  result.design = rate_balance(working, graph, options);
  result.resources = estimate_network(result.design, graph, options.model, options.overhead);
  if (!result.resources.fits(budget)) {
    fail(ErrorKind::kInfeasible,
         "minimal design of '" + graph.name() + "' needs " +
             std::to_string(result.resources.dsp) + " DSP, " +
             std::to_string(result.resources.lut) + " LUT, " +
             std::to_string(result.resources.bram18k) + " BRAM18k");
  }
  result.throughput = network_throughput(result.design, graph);
  result.trace.push_back(result.throughput);
  for (;;) {
    try {
      working = increment_slowest(working, graph, options);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kSaturated) throw;
      result.reason = StopReason::kSaturated;
      return result;
    }
    NetworkDesign balanced = rate_balance(working, graph, options);
    ResourceVector cost = estimate_network(balanced, graph, options.model, options.overhead);
    if (!cost.fits(budget)) {
      result.reason = StopReason::kBudget;
      return result;
    }
    result.design = std::move(balanced);
    result.resources = cost;
    result.throughput = network_throughput(result.design, graph);
    result.trace.push_back(result.throughput);
  }
}

void AnnealingConfig::validate() const {
  if (!(cooling > 0.0 && cooling < 1.0)) {
    fail(ErrorKind::kValidation, "annealing cooling factor must lie in (0, 1)");
  }
  if (temperatures < 1 || moves_per_temperature < 1) {
    fail(ErrorKind::kValidation, "annealing needs at least one iteration");
  }
}

Allocation contiguous_allocation(std::span<const double> channel_load,
                                 std::span<const double> filter_load, int64_t i,
                                 int64_t o) {
  const auto channels = static_cast<int64_t>(channel_load.size());
  const auto filters = static_cast<int64_t>(filter_load.size());
  if (i < 1 || o < 1 || i > channels || o > filters) {
    fail(ErrorKind::kValidation, "allocation grid exceeds the layer dimensions");
  }
  auto blocks = [](int64_t n, int64_t groups) {
    std::vector<int64_t> g(static_cast<std::size_t>(n));
    for (int64_t k = 0; k < n; ++k) g[static_cast<std::size_t>(k)] = k * groups / n;
    return g;
  };
  Allocation a;
  a.i = i;
  a.o = o;
  a.channel_group = blocks(channels, i);
  a.filter_group = blocks(filters, o);
  std::vector<double> u(static_cast<std::size_t>(i)), v(static_cast<std::size_t>(o));
  for (std::size_t c = 0; c < channel_load.size(); ++c) u[a.channel_group[c]] += channel_load[c];
  for (std::size_t f = 0; f < filter_load.size(); ++f) v[a.filter_group[f]] += filter_load[f];
  for (double x : u) {
    for (double y : v) a.engine_work.push_back(x * y);
  }
  auto [lo, hi] = std::minmax_element(a.engine_work.begin(), a.engine_work.end());
  a.imbalance = *hi - *lo;
  return a;
}

Allocation balance_allocation(std::span<const double> channel_load,
                              std::span<const double> filter_load, int64_t i,
                              int64_t o, const AnnealingConfig& cfg) {
  cfg.validate();
  Allocation best = contiguous_allocation(channel_load, filter_load, i, o);
  if (best.imbalance <= 0.0) return best;

  std::vector<int64_t> cg = best.channel_group;
  std::vector<int64_t> fg = best.filter_group;
  std::vector<double> u(static_cast<std::size_t>(i)), v(static_cast<std::size_t>(o));
  for (std::size_t c = 0; c < cg.size(); ++c) u[cg[c]] += channel_load[c];
  for (std::size_t f = 0; f < fg.size(); ++f) v[fg[f]] += filter_load[f];
  auto spread = [&] {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (double x : u) {
      for (double y : v) {
        hi = std::max(hi, x * y);
        lo = std::min(lo, x * y);
      }
    }
    return hi - lo;
  };

  const bool move_channels = i > 1;
  const bool move_filters = o > 1;
  if (!move_channels && !move_filters) return best;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double current = best.imbalance;
  double best_value = current;
  std::vector<int64_t> best_cg = cg, best_fg = fg;
  double temperature = cfg.initial_temperature > 0.0 ? cfg.initial_temperature
                                                     : 10.0 * best.imbalance;

  for (int step = 0; step < cfg.temperatures; ++step) {
    for (int move = 0; move < cfg.moves_per_temperature; ++move) {
      const bool channels = move_channels && (!move_filters || unit(rng) < 0.5);
      std::vector<int64_t>& group = channels ? cg : fg;
      std::vector<double>& load = channels ? u : v;
      std::span<const double> item = channels ? channel_load : filter_load;
      std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
      const std::size_t x = pick(rng);
      std::size_t y = pick(rng);
      if (group[x] == group[y]) continue;
      const double delta = item[y] - item[x];
      load[group[x]] += delta;
      load[group[y]] -= delta;
      std::swap(group[x], group[y]);
      const double next = spread();
      if (next <= current || unit(rng) < std::exp((current - next) / temperature)) {
        current = next;
        if (current < best_value) {
          best_value = current;
          best_cg = cg;
          best_fg = fg;
        }
      } else {
        std::swap(group[x], group[y]);
        load[group[x]] -= delta;
        load[group[y]] += delta;
      }
    }
    temperature *= cfg.cooling;
  }

  Allocation out;
  out.i = i;
  out.o = o;
  out.channel_group = std::move(best_cg);
  out.filter_group = std::move(best_fg);
  std::fill(u.begin(), u.end(), 0.0);
  std::fill(v.begin(), v.end(), 0.0);
  for (std::size_t c = 0; c < out.channel_group.size(); ++c) {
    u[out.channel_group[c]] += channel_load[c];
  }
  for (std::size_t f = 0; f < out.filter_group.size(); ++f) {
    v[out.filter_group[f]] += filter_load[f];
  }
  for (double x : u) {
    for (double y : v) out.engine_work.push_back(x * y);
  }
  out.imbalance = spread();
  return out.imbalance <= best.imbalance ? out : best;
}

int64_t choose_buffer_depth(std::span<const double> trace, std::size_t window_len,
                            double percentile) {
  if (trace.empty()) fail(ErrorKind::kValidation, "buffer sizing needs a non-empty trace");
  const double mean =
      std::accumulate(trace.begin(), trace.end(), 0.0) / static_cast<double>(trace.size());
  const std::size_t len = std::clamp<std::size_t>(window_len, 1, trace.size());
  std::vector<double> swings;
  swings.reserve(trace.size() - len + 1);
  for (std::size_t start = 0; start + len <= trace.size(); ++start) {
    double backlog = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t k = start; k < start + len; ++k) {
      backlog += trace[k] - mean;
      lo = std::min(lo, backlog);
      hi = std::max(hi, backlog);
    }
    swings.push_back(hi - lo);
  }
  std::sort(swings.begin(), swings.end());
  const double q = std::clamp(percentile, 0.0, 100.0) / 100.0;
  const auto rank = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(q * static_cast<double>(swings.size()))), 1,
      swings.size());
  return std::max<int64_t>(
      1, static_cast<int64_t>(std::ceil(swings[rank - 1] - 1e-9)));
}

double effective_throughput(std::span<const double> partition_throughput,
                            const Platform& platform, int64_t batch) {
  if (batch < 1) fail(ErrorKind::kValidation, "batch size must be positive");
  const auto b = static_cast<double>(batch);
  double seconds = static_cast<double>(partition_throughput.size()) * platform.reconfig_seconds;
  for (double theta : partition_throughput) {
    if (theta <= 0.0) return 0.0;
    if (std::isinf(theta)) continue;
    seconds += b / (theta * platform.clock_hz);
  }
  return seconds > 0.0 ? b / seconds : std::numeric_limits<double>::infinity();
}

NetworkGraph slice_graph(const NetworkGraph& graph, std::size_t first, std::size_t last) {
  if (first > last || last >= graph.layers().size()) {
    fail(ErrorKind::kValidation, "invalid layer range");
  }
  std::vector<LayerSpec> layers(graph.layers().begin() + static_cast<std::ptrdiff_t>(first),
                                graph.layers().begin() + static_cast<std::ptrdiff_t>(last) + 1);
  std::vector<Edge> edges;
  for (const Edge& e : graph.edges()) {
    const std::size_t a = graph.index_of(e.first);
    const std::size_t b = graph.index_of(e.second);
    if (a >= first && a <= last && b >= first && b <= last) edges.push_back(e);
  }
  return NetworkGraph(graph.name(), std::move(layers), std::move(edges));
}

std::optional<PartitionResult> evaluate_splits(const NetworkGraph& graph,
                                               const SparsityProfile& profile,
                                               const ResourceVector& budget,
                                               const Platform& platform,
                                               int64_t batch,
                                               const std::vector<bool>& splits,
                                               const DseOptions& options) {
  if (graph.layers().empty()) fail(ErrorKind::kValidation, "empty network");
  if (splits.size() + 1 != graph.layers().size()) {
    fail(ErrorKind::kValidation, "split vector must have one entry per layer boundary");
  }
  RangeExplorer ranges(graph, profile, budget, options);
  return assemble(ranges, splits, platform, batch, options.policy);
}

PartitionResult partition_network(const NetworkGraph& graph,
                                  const SparsityProfile& profile,
                                  const ResourceVector& budget, const Platform& platform,
                                  int64_t batch, const AnnealingConfig& cfg,
                                  const DseOptions& options) {
  cfg.validate();
  const std::size_t count = graph.layers().size();
  if (count == 0) fail(ErrorKind::kValidation, "empty network");
  RangeExplorer ranges(graph, profile, budget, options);
  for (std::size_t k = 0; k < count; ++k) {
    if (!ranges.get(k, k)) {
      fail(ErrorKind::kInfeasible,
           "layer '" + graph.layers()[k].id + "' does not fit the budget on its own");
    }
  }
  auto score = [&](const std::vector<bool>& splits) {
    auto r = assemble(ranges, splits, platform, batch, options.policy);
    return r ? r->effective_images_per_s : 0.0;
  };

  std::vector<bool> current(count - 1, false);
  double value = score(current);
  if (value <= 0.0) {
    current.assign(count - 1, true);
    value = score(current);
  }
  std::vector<bool> best = current;
  double best_value = value;

  if (count > 1) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, count - 2);
    double temperature =
        cfg.initial_temperature > 0.0 ? cfg.initial_temperature : 10.0 * value;
    for (int step = 0; step < cfg.temperatures; ++step) {
      for (int move = 0; move < cfg.moves_per_temperature; ++move) {
        const std::size_t bit = pick(rng);
        current[bit].flip();
        const double next = score(current);
        if (next >= value || unit(rng) < std::exp((next - value) / temperature)) {
          value = next;
          if (value > best_value) {
            best_value = value;
            best = current;
          }
        } else {
          current[bit].flip();
        }
      }
      temperature *= cfg.cooling;
    }
  }
  return *assemble(ranges, best, platform, batch, options.policy);
}

double design_throughput(const NetworkDesign& g, const NetworkGraph& graph) {
  if (g.partitions.empty()) return network_throughput(g, graph);
  double cycles = 0.0;
  for (const auto& part : g.partitions) {
    double slowest = std::numeric_limits<double>::infinity();
    for (const std::string& id : part) {
      const LayerSpec& l = graph.at(id);
      if (l.prunable()) slowest = std::min(slowest, layer_throughput(g, l));
    }
    if (slowest <= 0.0) return 0.0;
    if (!std::isinf(slowest)) cycles += 1.0 / slowest;
  }
  return cycles > 0.0 ? 1.0 / cycles : 0.0;
}

std::string serialize_design(const NetworkDesign& g, const NetworkGraph& graph,
                             const Platform& platform, const DseOptions& options) {
  json layers = json::array();
  for (const LayerSpec* l : graph.prunable_layers()) {
    const LayerDesign& ld = g.at(l->id);
    const DesignPoint& d = ld.point;
    const ResourceVector r = estimate_layer(*l, d, options.model);
    layers.push_back({{"id", l->id},
                      {"i", d.i},
                      {"o", d.o},
                      {"N", d.n},
                      {"M", d.m},
                      {"buffer_depth", d.buffer_depth},
                      {"sparsity", ld.sparsity},
                      {"throughput", layer_throughput(*l, d, ld.sparsity)},
                      {"resources", {{"dsp", r.dsp}, {"lut", r.lut}, {"bram18k", r.bram18k}}}});
  }
  const double theta = design_throughput(g, graph);
  const ResourceVector total = estimate_network(g, graph, options.model, options.overhead);
  json doc{{"network", graph.name()},
           {"window_policy", std::string(to_string(g.policy))},
           {"layers", std::move(layers)},
           {"partitions", g.partitions},
           {"throughput", {{"images_per_cycle", theta},
                           {"images_per_s", theta * platform.clock_hz}}},
           {"clock_hz", platform.clock_hz},
           {"resources", {{"dsp", total.dsp}, {"lut", total.lut}, {"bram18k", total.bram18k}}},
           {"budget", {{"dsp", platform.budget.dsp},
                       {"lut", platform.budget.lut},
                       {"bram18k", platform.budget.bram18k}}},
           {"placeholder_coefficients", options.model.placeholder}};
  return doc.dump(2) + "\n";
}

NetworkDesign parse_design(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("design: ") + e.what());
  }
  NetworkDesign g;
  try {
    g.policy = parse_window_policy(doc.value("window_policy", std::string("kernel")));
    for (const json& item : doc.at("layers")) {
      LayerDesign ld;
      ld.point.i = item.at("i").get<int64_t>();
      ld.point.o = item.at("o").get<int64_t>();
      ld.point.n = item.at("N").get<int64_t>();
      ld.point.m = item.at("M").get<int64_t>();
      ld.point.buffer_depth = item.value("buffer_depth", int64_t{1});
      ld.sparsity = item.value("sparsity", 0.0);
      g.layers[item.at("id").get<std::string>()] = ld;
    }
    if (doc.contains("partitions")) {
      g.partitions = doc.at("partitions").get<std::vector<std::vector<std::string>>>();
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("design: ") + e.what());
  }
  return g;
}

NetworkDesign load_design(const std::filesystem::path& path) {
  return parse_design(read_text_file(path));
}

}  // namespace sparseflow
