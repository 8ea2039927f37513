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

#include "sparseflow/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace sparseflow {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string scientific(double v, int digits = 6) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(digits) << v;
  return s.str();
}

const fs::path& require(const fs::path& p, const char* what) {
  if (p.empty()) fail(ErrorKind::kUsage, std::string("missing ") + what + " path");
  if (!fs::exists(p)) fail(ErrorKind::kIo, std::string(what) + " not found: " + p.string());
  return p;
}

void require_seed(const RunConfig& cfg, const char* command) {
  if (!cfg.seed_set) fail(ErrorKind::kUsage, std::string(command) + " needs an explicit --seed");
}

fs::path output_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return cfg.output_dir / name;
}

NetworkGraph graph_of(const RunConfig& cfg) { return load_network(require(cfg.network, "network")); }

Platform platform_of(const RunConfig& cfg) {
  Platform p = cfg.platform.empty() ? u250_platform()
                                    : load_platform(require(cfg.platform, "platform"));
  if (cfg.budget_dsp) p.budget.dsp = *cfg.budget_dsp;
  if (cfg.budget_lut) p.budget.lut = *cfg.budget_lut;
  if (cfg.budget_bram18k) p.budget.bram18k = *cfg.budget_bram18k;
  return p;
}

DseOptions dse_options_of(const RunConfig& cfg, const Platform& platform) {
  DseOptions o;
  o.policy = cfg.policy;
  if (!cfg.coefficients.empty()) {
    o.model = load_coefficients(require(cfg.coefficients, "coefficients"));
  }
  o.overhead = platform.overhead;
  return o;
}

ProfileOptions profile_options_of(const RunConfig& cfg) {
  ProfileOptions o;
  o.mode = cfg.combine;
  return o;
}

ThresholdAssignment thresholds_of(const RunConfig& cfg, const NetworkGraph& graph) {
  if (cfg.thresholds.empty()) return uniform_thresholds(graph, 0.0, 0.0);
  return parse_thresholds(read_text_file(require(cfg.thresholds, "thresholds")));
}

SparsityProfile profile_of(const RunConfig& cfg, const NetworkGraph& graph) {
  if (!cfg.profile.empty()) {
    SparsityProfile p = parse_profile(read_text_file(require(cfg.profile, "profile")));
    for (const LayerSpec* l : graph.prunable_layers()) (void)p.at(l->id);
    return p;
  }
  const TensorArchive archive = load_tensors(require(cfg.tensors, "tensors"), graph);
  const HistogramSet hists = load_histograms(require(cfg.histograms, "histograms"));
  return build_profile(graph, archive, hists, thresholds_of(cfg, graph), profile_options_of(cfg));
}

std::string resources_text(const ResourceVector& r) {
  return std::to_string(r.dsp) + " DSP, " + std::to_string(r.lut) + " LUT, " +
         std::to_string(r.bram18k) + " BRAM18k";
}

std::string dse_plot_csv(const NetworkDesign& g, const NetworkGraph& graph) {
  std::ostringstream out;
  out << "layer,sparsity,N,engines\n";
  for (const LayerSpec* l : graph.prunable_layers()) {
    const LayerDesign& ld = g.at(l->id);
    out << l->id << ',' << fixed(ld.sparsity, 4) << ',' << ld.point.n << ','
        << ld.point.engines() << '\n';
  }
  return out.str();
}

void print_summary_row(std::ostream& out, const std::string& accuracy, int64_t dsp,
                      double images_per_s, double clock_hz) {
  const double eff = dsp > 0 ? efficiency_metric(images_per_s, clock_hz, static_cast<double>(dsp)) : 0.0;
  out << "accuracy (%)        : " << accuracy << '\n'
      << "DSPs                : " << dsp << '\n'
      << "images/s            : " << fixed(images_per_s, 2) << '\n'
      << "clock (MHz)         : " << fixed(clock_hz / 1e6, 1) << '\n'
      << "images/cycle/DSP    : " << fixed(eff * 1e9, 2) << "e-9\n";
}

// Fills a struct field from a JSON object when the key exists.
template <typename T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<T>();
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
      return kExitUsage;
    case ErrorKind::kInfeasible:
      return kExitInfeasible;
    case ErrorKind::kDeadlock:
      return kExitDeadlock;
    default:
      return kExitInput;
  }
}

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("run config: ") + e.what());
  }
  RunConfig cfg;
  auto path = [&](const char* key, fs::path& field) {
    if (!doc.contains(key)) return;
    fs::path p = doc.at(key).get<std::string>();
    field = p.is_absolute() ? p : base_dir / p;
  };
  try {
    path("network", cfg.network);
    path("tensors", cfg.tensors);
    path("histograms", cfg.histograms);
    path("platform", cfg.platform);
    path("coefficients", cfg.coefficients);
    path("thresholds", cfg.thresholds);
    path("profile", cfg.profile);
    path("design", cfg.design);
    path("history", cfg.history);
    path("output_dir", cfg.output_dir);
    if (doc.contains("budget")) {
      const json& b = doc.at("budget");
      if (b.contains("dsp")) cfg.budget_dsp = b.at("dsp").get<int64_t>();
      if (b.contains("lut")) cfg.budget_lut = b.at("lut").get<int64_t>();
      if (b.contains("bram18k")) cfg.budget_bram18k = b.at("bram18k").get<int64_t>();
    }
    if (doc.contains("window_policy")) {
      cfg.policy = parse_window_policy(doc.at("window_policy").get<std::string>());
    }
    if (doc.value("combine_mode", std::string("independent")) == "measured-joint") {
      cfg.combine = CombineMode::kMeasuredJoint;
    }
    if (doc.value("sparsity_weighting", std::string("operations")) == "uniform") {
      cfg.weighting = SparsityWeighting::kUniform;
    }
    if (doc.contains("lambda")) {
      const json& l = doc.at("lambda");
      take(l, "sparsity", cfg.weights.sparsity);
      take(l, "throughput", cfg.weights.throughput);
      take(l, "dsp", cfg.weights.dsp);
    }
    if (doc.contains("tpe")) {
      const json& t = doc.at("tpe");
      take(t, "startup", cfg.tpe.startup);
      take(t, "gamma", cfg.tpe.gamma);
      take(t, "candidates", cfg.tpe.candidates);
      take(t, "iterations", cfg.tpe.iterations);
    }
    if (doc.contains("annealing")) {
      const json& a = doc.at("annealing");
      take(a, "initial_temperature", cfg.annealing.initial_temperature);
      take(a, "cooling", cfg.annealing.cooling);
      take(a, "temperatures", cfg.annealing.temperatures);
      take(a, "moves_per_temperature", cfg.annealing.moves_per_temperature);
    }
    if (doc.contains("evaluator")) {
      const json& e = doc.at("evaluator");
      cfg.evaluator.kind = parse_evaluator_kind(e.value("kind", std::string("surrogate")));
      take(e, "a", cfg.evaluator.surrogate_a);
      take(e, "b", cfg.evaluator.surrogate_b);
      take(e, "command", cfg.evaluator.command);
      if (e.contains("table")) {
        fs::path p = e.at("table").get<std::string>();
        cfg.evaluator.table = p.is_absolute() ? p : base_dir / p;
      }
      if (e.contains("timeout_seconds")) {
        cfg.evaluator.timeout = std::chrono::milliseconds(
            static_cast<int64_t>(e.at("timeout_seconds").get<double>() * 1000.0));
      }
    }
    if (doc.contains("search")) {
      const json& s = doc.at("search");
      take(s, "p_max", cfg.p_max);
      take(s, "tied", cfg.tied);
      take(s, "software_only", cfg.software_only);
      take(s, "random_only", cfg.random_only);
    }
    take(doc, "partition", cfg.partition);
    take(doc, "batch", cfg.batch);
    if (doc.contains("simulate")) {
      const json& s = doc.at("simulate");
      take(s, "tokens", cfg.tokens);
      take(s, "windows_per_token", cfg.windows_per_token);
      take(s, "prefetch_windows", cfg.spe.prefetch_windows);
      take(s, "auto_depth", cfg.auto_depth);
      take(s, "buffer_percentile", cfg.buffer_percentile);
      take(s, "window_len", cfg.window_len);
      if (s.value("arbiter", std::string("ideal")) == "round-robin") {
        cfg.spe.arbiter = Arbiter::kRoundRobin;
      }
      if (s.contains("lookahead")) {
        cfg.lookahead = s.at("lookahead").get<std::map<std::string, int64_t, std::less<>>>();
      }
    }
    if (doc.contains("seed")) {
      cfg.seed = doc.at("seed").get<uint64_t>();
      cfg.seed_set = true;
    }
    take(doc, "jobs", cfg.jobs);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("run config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_text_file(require(path, "config")), path.parent_path());
}

void cmd_profile(const RunConfig& cfg, std::ostream& out) {
  const NetworkGraph graph = graph_of(cfg);
  const SparsityProfile profile = profile_of(cfg, graph);
  write_text_file(output_path(cfg, "profile.json"), serialize_profile(profile, graph));

  std::ostringstream csv;
  csv << "layer,tau_w,tau_a,weight_sparsity,activation_sparsity,combined_sparsity\n";
  out << std::left << std::setw(20) << "layer" << std::right << std::setw(10) << "S_w"
      << std::setw(10) << "S_a" << std::setw(10) << "S_bar" << '\n';
  bool clipped = false;
  for (const LayerSpec* l : graph.prunable_layers()) {
    const LayerSparsity& s = profile.at(l->id);
    clipped = clipped || s.activation_beyond_range;
    csv << l->id << ',' << s.thresholds.tau_w << ',' << s.thresholds.tau_a << ','
        << fixed(s.weight, 6) << ',' << fixed(s.activation, 6) << ',' << fixed(s.combined, 6)
        << '\n';
    out << std::left << std::setw(20) << l->id << std::right << std::setw(10)
        << fixed(s.weight, 4) << std::setw(10) << fixed(s.activation, 4) << std::setw(10)
        << fixed(s.combined, 4) << (s.activation_beyond_range ? "  (tau_a beyond histogram)" : "")
        << '\n';
  }
  write_text_file(output_path(cfg, "profile.csv"), csv.str());
  out << "network sparsity: " << fixed(network_sparsity(profile, graph, cfg.weighting), 4) << '\n';
  if (clipped) out << "warning: some activation thresholds lie beyond the histogram range\n";
}

void cmd_dse(const RunConfig& cfg, std::ostream& out) {
  const NetworkGraph graph = graph_of(cfg);
  const SparsityProfile profile = profile_of(cfg, graph);
  const Platform platform = platform_of(cfg);
  const DseOptions options = dse_options_of(cfg, platform);

  NetworkDesign design;
  std::string note;
  try {
    ExploreResult r = explore(graph, profile, platform.budget, options);
    design = std::move(r.design);
    note = r.reason == StopReason::kSaturated ? "every layer saturated" : "budget reached";
    note += ", " + std::to_string(r.trace.size() - 1) + " accepted steps";
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kInfeasible || !cfg.partition) throw;
    require_seed(cfg, "partitioning");
    AnnealingConfig ann = cfg.annealing;
    ann.seed = cfg.seed;
    PartitionResult p =
        partition_network(graph, profile, platform.budget, platform, cfg.batch, ann, options);
    design = std::move(p.design);
    note = std::to_string(p.partitions.size()) + " partitions, effective " +
           fixed(p.effective_images_per_s, 2) + " images/s at batch " + std::to_string(cfg.batch);
  }
  write_text_file(output_path(cfg, "design.json"), serialize_design(design, graph, platform, options));
  write_text_file(output_path(cfg, "dse_plot.csv"), dse_plot_csv(design, graph));

  const double theta = design_throughput(design, graph);
  const ResourceVector used = estimate_network(design, graph, options.model, options.overhead);
  out << "design: " << note << '\n'
      << "throughput: " << scientific(theta) << " images/cycle, "
      << fixed(theta * platform.clock_hz, 2) << " images/s\n"
      << "resources: " << resources_text(used) << '\n'
      << "budget:    " << resources_text(platform.budget) << '\n';
  if (options.model.placeholder) {
    out << "note: resource coefficients are placeholders, not a calibration\n";
  }
}

void cmd_search(const RunConfig& cfg, std::ostream& out) {
  require_seed(cfg, "search");
  const NetworkGraph graph = graph_of(cfg);
  const TensorArchive archive = load_tensors(require(cfg.tensors, "tensors"), graph);
  const HistogramSet hists = load_histograms(require(cfg.histograms, "histograms"));
  const Platform platform = platform_of(cfg);

  SearchInputs inputs;
  inputs.graph = &graph;
  inputs.archive = &archive;
  inputs.histograms = &hists;
  inputs.budget = platform.budget;
  inputs.dse = dse_options_of(cfg, platform);
  inputs.profile = profile_options_of(cfg);

  SearchOptions options;
  options.weights = cfg.software_only ? ObjectiveWeights{cfg.weights.sparsity, 0.0, 0.0} : cfg.weights;
  options.tpe = cfg.tpe;
  options.tpe.seed = cfg.seed;
  options.history_path = cfg.history.empty() ? output_path(cfg, "history.jsonl") : cfg.history;
  options.resume = cfg.resume;
  options.random_only = cfg.random_only;

  auto evaluator = make_evaluator(cfg.evaluator);
  const SearchSpace space = make_search_space(graph, cfg.p_max, cfg.tied);
  const SearchResult result = run_search(space, inputs, *evaluator, options);
  write_text_file(output_path(cfg, "efficiency.csv"), efficiency_csv(result.history));

  std::size_t failed = 0;
  for (const Trial& t : result.history) failed += t.failed ? 1 : 0;
  out << "trials: " << result.history.size() << " (" << failed << " failed)\n";
  if (!result.best) {
    out << "no successful trials\n";
    return;
  }
  const Trial& best = *result.best;
  write_text_file(output_path(cfg, "best_thresholds.json"), serialize_thresholds(best.thresholds));
  write_text_file(output_path(cfg, "best_trial.json"), json::parse(serialize_trial(best)).dump(2) + "\n");
  if (best.design) {
    const SparsityProfile profile =
        build_profile(graph, archive, hists, best.thresholds, inputs.profile);
    (void)profile;
    write_text_file(output_path(cfg, "best_design.json"),
                    serialize_design(*best.design, graph, platform, inputs.dse));
  }
  out << "best iteration " << best.iteration << ": objective " << fixed(best.objective, 4)
      << ", f_acc " << fixed(best.metrics.accuracy, 3) << ", f_spa " << fixed(best.metrics.sparsity, 4)
      << ", f_thr " << scientific(best.metrics.throughput) << " images/cycle, f_dsp "
      << best.metrics.dsp << '\n'
      << "efficiency: " << scientific(best.efficiency()) << " images/cycle/DSP\n";
}

void cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  require_seed(cfg, "simulate");
  const NetworkGraph graph = graph_of(cfg);
  const NetworkDesign design = load_design(require(cfg.design, "design"));
  SparsityProfile profile;
  if (!cfg.profile.empty() || (!cfg.tensors.empty() && !cfg.histograms.empty())) {
    profile = profile_of(cfg, graph);
  }
  DesignSimOptions options;
  options.tokens = cfg.tokens;
  options.windows_per_token = cfg.windows_per_token;
  options.seed = cfg.seed;
  options.spe = cfg.spe;
  options.pipeline.lookahead = cfg.lookahead;
  options.auto_depth = cfg.auto_depth;
  options.buffer_percentile = cfg.buffer_percentile;
  options.window_len = static_cast<std::size_t>(std::max<int64_t>(1, cfg.window_len));
  const DesignSimReport report = simulate_design(graph, design, profile, options);
  write_text_file(output_path(cfg, "sim_report.json"), serialize_sim_report(report, graph));

  const double ratio = report.predicted_images_per_cycle > 0.0
                           ? report.measured_images_per_cycle / report.predicted_images_per_cycle
                           : 0.0;
  double stalls = 0.0;
  for (const EdgeStats& e : report.pipeline.edges) stalls += e.stall_cycles;
  out << "predicted: " << scientific(report.predicted_images_per_cycle) << " images/cycle\n"
      << "measured:  " << scientific(report.measured_images_per_cycle) << " images/cycle ("
      << fixed(100.0 * ratio, 1) << "% of predicted)\n"
      << "MAC occupancy: " << fixed(report.occupancy, 4)
      << ", joint sparsity: " << fixed(report.joint_sparsity, 4) << '\n'
      << "FIFO stall cycles: " << fixed(stalls, 1) << '\n';
}

void cmd_report(const RunConfig& cfg, std::ostream& out) {
  const Platform platform = platform_of(cfg);
  std::ostringstream csv;
  csv << "source,accuracy,dsp,images_per_s,images_per_cycle_per_dsp\n";
  if (!cfg.history.empty()) {
    const std::vector<Trial> history = load_history(require(cfg.history, "history"));
    const Trial* best = nullptr;
    for (const Trial& t : history) {
      if (!t.failed && (best == nullptr || t.objective > best->objective)) best = &t;
    }
    if (best == nullptr) {
      out << "no trials\n";
      write_text_file(output_path(cfg, "report.csv"), csv.str());
      return;
    }
    const double images_per_s = best->metrics.throughput * platform.clock_hz;
    out << "history: " << history.size() << " trials, best at iteration " << best->iteration
        << " (objective " << fixed(best->objective, 4) << ")\n";
    print_summary_row(out, fixed(best->metrics.accuracy, 2), best->metrics.dsp, images_per_s,
                     platform.clock_hz);
    const double eff = best->metrics.dsp > 0
                           ? efficiency_metric(images_per_s, platform.clock_hz,
                                               static_cast<double>(best->metrics.dsp))
                           : 0.0;
    csv << "history," << fixed(best->metrics.accuracy, 4) << ',' << best->metrics.dsp << ','
        << fixed(images_per_s, 4) << ',' << scientific(eff) << '\n';
  } else {
    const json doc = json::parse(read_text_file(require(cfg.design, "design or history")));
    const double clock = doc.value("clock_hz", platform.clock_hz);
    const double images_per_s = doc.at("throughput").at("images_per_s").get<double>();
    const int64_t dsp = doc.at("resources").at("dsp").get<int64_t>();
    out << "design: " << doc.value("network", std::string("unnamed")) << '\n';
    print_summary_row(out, "n/a", dsp, images_per_s, clock);
    const double eff = dsp > 0 ? efficiency_metric(images_per_s, clock, static_cast<double>(dsp)) : 0.0;
    csv << "design,," << dsp << ',' << fixed(images_per_s, 4) << ',' << scientific(eff) << '\n';
  }
  write_text_file(output_path(cfg, "report.csv"), csv.str());
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hardware-aware sparsity co-design for dataflow accelerators", "sparseflow"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, output_dir, network, tensors, histograms, platform, coefficients,
        thresholds, profile, design, history, window_policy, arbiter, evaluator, command;
    std::optional<uint64_t> seed;
    std::optional<int> iterations, jobs;
    std::optional<int64_t> budget_dsp, budget_lut, budget_bram, tokens, prefetch, batch;
    bool resume = false, software_only = false, random_only = false, tied = false,
         no_partition = false, fixed_depth = false;
  } f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", f.config, "Run configuration file");
    sub->add_option("-o,--output-dir", f.output_dir, "Output directory");
    sub->add_option("--network", f.network, "Network description");
    sub->add_option("--tensors", f.tensors, "Tensor manifest");
    sub->add_option("--histograms", f.histograms, "Activation histograms");
    sub->add_option("--platform", f.platform, "Platform description");
    sub->add_option("--coefficients", f.coefficients, "Resource model coefficients");
    sub->add_option("--thresholds", f.thresholds, "Threshold assignment");
    sub->add_option("--profile", f.profile, "Precomputed sparsity profile");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--jobs", f.jobs, "Worker cap");
  };
  CLI::App* profile = app.add_subcommand("profile", "Per-layer sparsity at given thresholds");
  CLI::App* dse = app.add_subcommand("dse", "Design-space exploration");
  CLI::App* search = app.add_subcommand("search", "Threshold search");
  CLI::App* simulate = app.add_subcommand("simulate", "Simulate a design");
  CLI::App* report = app.add_subcommand("report", "Summarize a design or search history");
  for (CLI::App* sub : {profile, dse, search, simulate, report}) add_common(sub);
  for (CLI::App* sub : {dse, search}) {
    sub->add_option("--budget-dsp", f.budget_dsp, "DSP budget");
    sub->add_option("--budget-lut", f.budget_lut, "LUT budget");
    sub->add_option("--budget-bram", f.budget_bram, "BRAM18k budget");
    sub->add_option("--window-policy", f.window_policy, "kernel | channel-slice");
  }
  dse->add_flag("--no-partition", f.no_partition, "Fail instead of partitioning");
  dse->add_option("--batch", f.batch, "Batch size for partitioned designs");
  search->add_option("--iterations", f.iterations, "Search iterations");
  search->add_option("--history", f.history, "History file");
  search->add_flag("--resume", f.resume, "Continue from the history file");
  search->add_flag("--software-only", f.software_only, "Ignore hardware metrics");
  search->add_flag("--random", f.random_only, "Uniform random search");
  search->add_flag("--tied", f.tied, "One threshold pair for all layers");
  search->add_option("--evaluator", f.evaluator, "surrogate | lookup-table | external-command");
  search->add_option("--evaluator-command", f.command, "Command for external-command");
  simulate->add_option("--design", f.design, "Design document");
  simulate->add_option("--tokens", f.tokens, "Tokens to simulate");
  simulate->add_option("--prefetch", f.prefetch, "Windows the arbiter may hold");
  simulate->add_option("--arbiter", f.arbiter, "ideal | round-robin");
  simulate->add_flag("--fixed-depth", f.fixed_depth, "Use the design's buffer depths");
  report->add_option("--design", f.design, "Design document");
  report->add_option("--history", f.history, "History file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    auto set_path = [](const std::string& v, fs::path& field) {
      if (!v.empty()) field = v;
    };
    set_path(f.network, cfg.network);
    set_path(f.tensors, cfg.tensors);
    set_path(f.histograms, cfg.histograms);
    set_path(f.platform, cfg.platform);
    set_path(f.coefficients, cfg.coefficients);
    set_path(f.thresholds, cfg.thresholds);
    set_path(f.profile, cfg.profile);
    set_path(f.design, cfg.design);
    set_path(f.history, cfg.history);
    if (const char* env = std::getenv("SPARSEFLOW_OUTPUT_DIR"); env != nullptr && *env != '\0') {
      cfg.output_dir = env;
    }
    set_path(f.output_dir, cfg.output_dir);
    if (f.seed) {
      cfg.seed = *f.seed;
      cfg.seed_set = true;
    }
    if (f.jobs) cfg.jobs = *f.jobs;
    if (f.iterations) cfg.tpe.iterations = *f.iterations;
    if (f.budget_dsp) cfg.budget_dsp = f.budget_dsp;
    if (f.budget_lut) cfg.budget_lut = f.budget_lut;
    if (f.budget_bram) cfg.budget_bram18k = f.budget_bram;
    if (!f.window_policy.empty()) cfg.policy = parse_window_policy(f.window_policy);
    if (f.no_partition) cfg.partition = false;
    if (f.batch) cfg.batch = *f.batch;
    cfg.resume = cfg.resume || f.resume;
    cfg.software_only = cfg.software_only || f.software_only;
    cfg.random_only = cfg.random_only || f.random_only;
    cfg.tied = cfg.tied || f.tied;
    if (!f.evaluator.empty()) cfg.evaluator.kind = parse_evaluator_kind(f.evaluator);
    if (!f.command.empty()) {
      cfg.evaluator.command = f.command;
      if (f.evaluator.empty()) cfg.evaluator.kind = EvaluatorKind::kExternalCommand;
    }
    if (f.tokens) cfg.tokens = *f.tokens;
    if (f.prefetch) cfg.spe.prefetch_windows = *f.prefetch;
    if (!f.arbiter.empty()) {
      if (f.arbiter == "round-robin") {
        cfg.spe.arbiter = Arbiter::kRoundRobin;
      } else if (f.arbiter == "ideal") {
        cfg.spe.arbiter = Arbiter::kIdeal;
      } else {
        fail(ErrorKind::kUsage, "unknown arbiter '" + f.arbiter + "'");
      }
    }
    if (f.fixed_depth) cfg.auto_depth = false;

    if (profile->parsed()) cmd_profile(cfg, out);
    if (dse->parsed()) cmd_dse(cfg, out);
    if (search->parsed()) cmd_search(cfg, out);
    if (simulate->parsed()) cmd_simulate(cfg, out);
    if (report->parsed()) cmd_report(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace sparseflow
