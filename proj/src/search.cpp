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

#include "sparseflow/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "sparseflow/error.hpp"

namespace sparseflow {
namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Gaussian mixture over one dimension, truncated to [lo, hi], plus a uniform
// prior component.
class Parzen {
 public:
  Parzen(std::vector<double> centers, double lo, double hi)
      : centers_(std::move(centers)), lo_(lo), hi_(hi) {
    const double range = hi_ - lo_;
    const auto n = static_cast<double>(centers_.size());
    sigma_ = range;
    if (centers_.size() > 1) {
      const double mean = std::accumulate(centers_.begin(), centers_.end(), 0.0) / n;
      double var = 0.0;
      for (double c : centers_) var += (c - mean) * (c - mean);
      const double sd = std::sqrt(var / (n - 1.0));
      std::vector<double> sorted = centers_;
      std::sort(sorted.begin(), sorted.end());
      auto quantile = [&](double q) {
        const double pos = q * (n - 1.0);
        const auto k = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(k);
        return k + 1 < sorted.size() ? sorted[k] + frac * (sorted[k + 1] - sorted[k]) : sorted[k];
      };
      const double iqr = quantile(0.75) - quantile(0.25);
      double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
      sigma_ = 1.06 * spread * std::pow(n, -0.2);
    }
    const double floor = range / std::min(100.0, 1.0 + n);
    sigma_ = std::clamp(sigma_, floor, range);
    for (double c : centers_) {
      mass_.push_back(normal_cdf((hi_ - c) / sigma_) - normal_cdf((lo_ - c) / sigma_));
    }
  }

  double sample(std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, centers_.size());
    const std::size_t j = pick(rng);
    if (j == centers_.size()) return std::uniform_real_distribution<double>(lo_, hi_)(rng);
    std::normal_distribution<double> normal(centers_[j], sigma_);
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double x = normal(rng);
      if (x >= lo_ && x <= hi_) return x;
    }
    return std::clamp(centers_[j], lo_, hi_);
  }

  double log_density(double x) const {
    double acc = 1.0 / (hi_ - lo_);
    for (std::size_t j = 0; j < centers_.size(); ++j) {
      const double z = (x - centers_[j]) / sigma_;
      acc += std::exp(-0.5 * z * z) / (sigma_ * std::sqrt(2.0 * kPi) * std::max(mass_[j], 1e-300));
    }
    return std::log(acc / static_cast<double>(centers_.size() + 1));
  }

 private:
  std::vector<double> centers_;
  std::vector<double> mass_;
  double lo_;
  double hi_;
  double sigma_ = 1.0;
};

std::vector<double> uniform_point(std::span<const double> lo, std::span<const double> hi,
                                  std::mt19937_64& rng) {
  std::vector<double> x(lo.size());
  for (std::size_t d = 0; d < lo.size(); ++d) {
    x[d] = std::uniform_real_distribution<double>(lo[d], hi[d])(rng);
  }
  return x;
}

json metrics_json(const TrialMetrics& m) {
  return {{"f_acc", m.accuracy}, {"f_spa", m.sparsity}, {"f_thr", m.throughput}, {"f_dsp", m.dsp}};
}

}  // namespace

void ObjectiveWeights::validate() const {
  for (double v : {sparsity, throughput, dsp}) {
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorKind::kValidation, "objective weights must be finite and non-negative");
    }
  }
}

double scalar_objective(const TrialMetrics& m, const ObjectiveWeights& w) {
  return m.accuracy + w.sparsity * m.sparsity + w.throughput * m.throughput -
         w.dsp * static_cast<double>(m.dsp);
}

void SearchSpace::validate() const {
  if (!(p_max >= 0.0 && p_max < 100.0)) {
    fail(ErrorKind::kValidation, "percentile bound must lie in [0, 100)");
  }
  if (layers.empty()) fail(ErrorKind::kValidation, "search space has no prunable layers");
}

SearchSpace make_search_space(const NetworkGraph& graph, double p_max, bool tied) {
  SearchSpace space;
  for (const LayerSpec* l : graph.prunable_layers()) space.layers.push_back(l->id);
  space.p_max = p_max;
  space.tied = tied;
  space.validate();
  return space;
}

ThresholdMapper::ThresholdMapper(const NetworkGraph& graph, const TensorArchive& archive,
                                 const HistogramSet& histograms) {
  for (const LayerSpec* l : graph.prunable_layers()) {
    LayerData d;
    const WeightTensor& w = archive.at(l->id);
    d.sorted_magnitudes.resize(w.values.size());
    std::transform(w.values.begin(), w.values.end(), d.sorted_magnitudes.begin(),
                   [](float x) { return std::abs(x); });
    std::sort(d.sorted_magnitudes.begin(), d.sorted_magnitudes.end());
    auto it = histograms.find(l->id);
    if (it == histograms.end()) {
      fail(ErrorKind::kValidation, "missing activation histogram for layer '" + l->id + "'");
    }
    d.histograms = &it->second;
    layers_.emplace(l->id, std::move(d));
  }
}

double ThresholdMapper::weight_tau(const LayerData& d, double percentile) const {
  const double q = percentile / 100.0;
  if (q <= 0.0 || d.sorted_magnitudes.empty()) return 0.0;
  const auto n = d.sorted_magnitudes.size();
  const auto rank = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(q * static_cast<double>(n))), 1, n);
  return d.sorted_magnitudes[rank - 1];
}

double ThresholdMapper::activation_tau(const LayerData& d, double percentile) const {
  const double q = percentile / 100.0;
  if (d.histograms->layer) return histogram_quantile(*d.histograms->layer, q);
  double sum = 0.0;
  for (const auto& [c, h] : d.histograms->per_input_channel) sum += histogram_quantile(h, q);
  return d.histograms->per_input_channel.empty()
             ? 0.0
             : sum / static_cast<double>(d.histograms->per_input_channel.size());
}

ThresholdAssignment ThresholdMapper::map(const SearchSpace& space,
                                         std::span<const double> point) const {
  if (point.size() != space.dims()) {
    fail(ErrorKind::kValidation, "search point has the wrong dimension");
  }
  ThresholdAssignment t;
  for (std::size_t k = 0; k < space.layers.size(); ++k) {
    const std::size_t base = space.tied ? 0 : 2 * k;
    auto it = layers_.find(space.layers[k]);
    if (it == layers_.end()) {
      fail(ErrorKind::kValidation, "unknown search layer '" + space.layers[k] + "'");
    }
    t.layers[space.layers[k]] = {weight_tau(it->second, point[base]),
                                 activation_tau(it->second, point[base + 1])};
  }
  return t;
}

Trial evaluate(const ThresholdAssignment& thresholds, const SearchInputs& inputs,
               AccuracyEvaluator& evaluator, const ObjectiveWeights& weights) {
  const auto start = std::chrono::steady_clock::now();
  const NetworkGraph& graph = *inputs.graph;
  Trial trial;
  trial.thresholds = thresholds;
  const SparsityProfile profile =
      build_profile(graph, *inputs.archive, *inputs.histograms, thresholds, inputs.profile);
  trial.metrics.sparsity = network_sparsity(profile, graph);
  try {
    ExploreResult r = explore(graph, profile, inputs.budget, inputs.dse);
    trial.metrics.throughput = r.throughput;
    trial.metrics.dsp = r.resources.dsp;
    trial.design = std::move(r.design);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kInfeasible) throw;
    const NetworkDesign minimal = minimal_design(graph, profile, inputs.dse);
    trial.dse_feasible = false;
    trial.metrics.throughput = 0.0;
    trial.metrics.dsp =
        estimate_network(minimal, graph, inputs.dse.model, inputs.dse.overhead).dsp;
    trial.design = minimal;
  }
  try {
    trial.metrics.accuracy = evaluator.evaluate(thresholds, trial.metrics.sparsity);
    trial.objective = scalar_objective(trial.metrics, weights);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEvaluator) throw;
    trial.failed = true;
    trial.error = e.what();
  }
  trial.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trial;
}

void TpeConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorKind::kValidation, "TPE gamma must lie in (0, 1)");
  if (startup < 2) fail(ErrorKind::kValidation, "TPE needs at least 2 startup trials");
  if (candidates < 1) fail(ErrorKind::kValidation, "TPE needs at least 1 candidate");
  if (iterations < 1) fail(ErrorKind::kValidation, "search needs at least 1 iteration");
}

std::vector<double> tpe_suggest(std::span<const Observation> history,
                                std::span<const double> lo, std::span<const double> hi,
                                const TpeConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (lo.size() != hi.size()) fail(ErrorKind::kValidation, "bounds differ in dimension");
  if (history.size() < static_cast<std::size_t>(cfg.startup)) return uniform_point(lo, hi, rng);
  const auto [min_it, max_it] = std::minmax_element(
      history.begin(), history.end(),
      [](const Observation& a, const Observation& b) { return a.y < b.y; });
  if (min_it->y == max_it->y) return uniform_point(lo, hi, rng);

  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return history[a].y > history[b].y;
  });
  const auto n = history.size();
  const std::size_t n_good = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(cfg.gamma * static_cast<double>(n))), 1, n - 1);

  std::vector<Parzen> good, bad;
  for (std::size_t d = 0; d < lo.size(); ++d) {
    std::vector<double> g, b;
    for (std::size_t r = 0; r < n; ++r) {
      (r < n_good ? g : b).push_back(history[order[r]].x[d]);
    }
    good.emplace_back(std::move(g), lo[d], hi[d]);
    bad.emplace_back(std::move(b), lo[d], hi[d]);
  }

  std::vector<double> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < cfg.candidates; ++c) {
    std::vector<double> x(lo.size());
    double score = 0.0;
    for (std::size_t d = 0; d < lo.size(); ++d) {
      x[d] = good[d].sample(rng);
      score += good[d].log_density(x[d]) - bad[d].log_density(x[d]);
    }
    if (score > best_score) {
      best_score = score;
      best = std::move(x);
    }
  }
  return best;
}

std::mt19937_64 iteration_rng(uint64_t seed, int64_t k) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(k), static_cast<uint32_t>(static_cast<uint64_t>(k) >> 32)};
  return std::mt19937_64(seq);
}

SearchResult run_search(const SearchSpace& space, const SearchInputs& inputs,
                        AccuracyEvaluator& evaluator, const SearchOptions& options) {
  space.validate();
  options.weights.validate();
  options.tpe.validate();
  const ThresholdMapper mapper(*inputs.graph, *inputs.archive, *inputs.histograms);
  const std::vector<double> lo(space.dims(), 0.0);
  const std::vector<double> hi(space.dims(), space.p_max);

  SearchResult result;
  if (options.resume && !options.history_path.empty() &&
      std::filesystem::exists(options.history_path)) {
    result.history = load_history(options.history_path);
    if (result.history.size() > static_cast<std::size_t>(options.tpe.iterations)) {
      result.history.resize(static_cast<std::size_t>(options.tpe.iterations));
    }
  } else if (!options.history_path.empty()) {
    write_text_file(options.history_path, "");
  }

  for (auto k = static_cast<int64_t>(result.history.size()); k < options.tpe.iterations; ++k) {
    std::vector<Observation> obs;
    for (const Trial& t : result.history) {
      if (!t.failed) obs.push_back({t.point, t.objective});
    }
    std::mt19937_64 rng = iteration_rng(options.tpe.seed, k);
    std::vector<double> point = options.random_only ? uniform_point(lo, hi, rng)
                                                    : tpe_suggest(obs, lo, hi, options.tpe, rng);
    Trial trial = evaluate(mapper.map(space, point), inputs, evaluator, options.weights);
    trial.iteration = k;
    trial.seed = options.tpe.seed;
    trial.point = std::move(point);
    trial.timestamp = utc_timestamp();
    if (!options.history_path.empty()) {
      std::ofstream out(options.history_path, std::ios::app);
      if (!out) fail(ErrorKind::kIo, "cannot append to " + options.history_path.string());
      out << serialize_trial(trial) << '\n';
    }
    result.history.push_back(std::move(trial));
  }

  for (const Trial& t : result.history) {
    if (!t.failed && (!result.best || t.objective > result.best->objective)) result.best = t;
  }
  return result;
}

std::string serialize_trial(const Trial& t) {
  json thresholds = json::object();
  for (const auto& [id, p] : t.thresholds.layers) {
    thresholds[id] = {{"tau_w", p.tau_w}, {"tau_a", p.tau_a}};
  }
  json doc{{"iteration", t.iteration},
           {"seed", t.seed},
           {"timestamp", t.timestamp},
           {"point", t.point},
           {"thresholds", {{"layers", thresholds}}},
           {"metrics", metrics_json(t.metrics)},
           {"objective", t.objective},
           {"failed", t.failed},
           {"dse_feasible", t.dse_feasible},
           {"wall_seconds", t.wall_seconds}};
  if (!t.error.empty()) doc["error"] = t.error;
  return doc.dump();
}

Trial parse_trial(std::string_view line) {
  Trial t;
  try {
    const json doc = json::parse(line);
    t.iteration = doc.at("iteration").get<int64_t>();
    t.seed = doc.value("seed", uint64_t{0});
    t.timestamp = doc.value("timestamp", std::string());
    t.point = doc.at("point").get<std::vector<double>>();
    t.thresholds = parse_thresholds(doc.at("thresholds").dump());
    const json& m = doc.at("metrics");
    t.metrics.accuracy = m.at("f_acc").get<double>();
    t.metrics.sparsity = m.at("f_spa").get<double>();
    t.metrics.throughput = m.at("f_thr").get<double>();
    t.metrics.dsp = m.at("f_dsp").get<int64_t>();
    t.objective = doc.at("objective").get<double>();
    t.failed = doc.value("failed", false);
    t.dse_feasible = doc.value("dse_feasible", true);
    t.wall_seconds = doc.value("wall_seconds", 0.0);
    t.error = doc.value("error", std::string());
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("history record: ") + e.what());
  }
  return t;
}

std::vector<Trial> load_history(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Trial> trials;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    trials.push_back(parse_trial(line));
  }
  return trials;
}

std::string efficiency_csv(const std::vector<Trial>& history) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,best_objective,images_per_cycle_per_dsp\n";
  const Trial* best = nullptr;
  for (const Trial& t : history) {
    if (!t.failed && (best == nullptr || t.objective > best->objective)) best = &t;
    out << t.iteration << ',';
    if (best != nullptr) {
      out << best->objective << ',' << best->efficiency();
    } else {
      out << ',';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sparseflow
