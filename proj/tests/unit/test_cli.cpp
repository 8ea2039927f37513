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

#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sparseflow/cli.hpp"
#include "sparseflow/dse.hpp"
#include "support/fixtures.hpp"

using namespace sparseflow;
using namespace sparseflow::testing;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "sparseflow");
  std::ostringstream out, err;
  Run r;
  r.code = cli_main(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

NetworkGraph small_net() {
  return chain("small", {conv("c1", 8, 16, 3, 8), conv("c2", 16, 16, 3, 8), conv("c3", 16, 32, 3, 4)});
}

std::vector<std::string> bundle_args(const BundlePaths& b, const std::filesystem::path& out) {
  return {"--network", b.network.string(), "--tensors", b.tensors.string(), "--histograms",
          b.histograms.string(), "-o", out.string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"bogus"}).code == kExitUsage);
    CHECK(run({"--help"}).code == kExitOk);
    const auto dir = scratch_dir("cli-usage");
    const BundlePaths b = write_bundle(dir, small_net(), 1);
    // Stochastic commands need a seed.
    CHECK(run(cat({"search"}, bundle_args(b, dir / "out"))).code == kExitUsage);
  }

  TEST_CASE("profile at zero thresholds and missing inputs") {
    const auto dir = scratch_dir("cli-profile");
    const NetworkGraph g = small_net();
    const BundlePaths b = write_bundle(dir, g, 1);
    // Histograms without zero mass, so tau = 0 yields almost no sparsity.
    HistogramSet hists;
    std::mt19937_64 rng(1);
    for (const LayerSpec* l : g.prunable_layers()) hists[l->id].layer = relu_histogram(l->id, 0.0, 2000, rng);
    write_text_file(b.histograms, serialize_histograms(hists));
    const Run r = run(cat({"profile"}, bundle_args(b, dir / "out")));
    REQUIRE(r.code == kExitOk);
    const json doc = json::parse(read_text_file(dir / "out" / "profile.json"));
    for (const json& l : doc.at("layers")) CHECK(l.at("combined_sparsity").get<double>() < 1e-3);
    CHECK(std::filesystem::exists(dir / "out" / "profile.csv"));

    std::filesystem::remove(b.histograms);
    CHECK(run(cat({"profile"}, bundle_args(b, dir / "out"))).code == kExitInput);
    write_text_file(b.histograms, "[]");
    CHECK(run(cat({"profile"}, bundle_args(b, dir / "out"))).code == kExitInput);
  }

  TEST_CASE("profile echoes the reference sparsities") {
    const auto dir = scratch_dir("cli-reference-profile");
    const NetworkGraph g = resnet18_convs();
    save_network(g, dir / "net.json");
    write_text_file(dir / "profile.json", serialize_profile(reference_profile(g), g));
    const Run r = run({"profile", "--network", (dir / "net.json").string(), "--profile",
                       (dir / "profile.json").string(), "-o", (dir / "out").string()});
    REQUIRE(r.code == kExitOk);
    const json doc = json::parse(read_text_file(dir / "out" / "profile.json"));
    for (std::size_t k = 0; k < 16; ++k) {
      CHECK(doc.at("layers")[k].at("combined_sparsity").get<double>() ==
            doctest::Approx(kReferenceSparsity[k]));
    }
  }

  TEST_CASE("dse writes a design and plot data") {
    const auto dir = scratch_dir("cli-dse");
    const NetworkGraph g = resnet18_convs();
    save_network(g, dir / "net.json");
    write_text_file(dir / "profile.json", serialize_profile(reference_profile(g), g));
    const std::vector<std::string> base = {"dse", "--network", (dir / "net.json").string(),
                                           "--profile", (dir / "profile.json").string(),
                                           "--budget-dsp", "12288", "--budget-bram", "1000000"};
    const Run r = run(cat(base, {"-o", (dir / "ref").string()}));
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("placeholders") != std::string::npos);
    const std::string csv = read_text_file(dir / "ref" / "dse_plot.csv");
    CHECK(csv.rfind("layer,sparsity,N,engines\n", 0) == 0);
    std::vector<double> n, s;
    const json design = json::parse(read_text_file(dir / "ref" / "design.json"));
    for (const json& l : design.at("layers")) {
      n.push_back(l.at("N").get<double>());
      s.push_back(l.at("sparsity").get<double>());
    }
    REQUIRE(n.size() == 16);
    CHECK(spearman(s, n) < 0.0);

    // Budget sweep: throughput non-decreasing.
    double last = 0.0;
    for (int dsp : {64, 512, 2048, 8192}) {
      const auto out = dir / ("sweep" + std::to_string(dsp));
      const Run sweep = run({"dse", "--network", (dir / "net.json").string(), "--profile",
                             (dir / "profile.json").string(), "--budget-dsp", std::to_string(dsp),
                             "--budget-bram", "1000000", "-o", out.string()});
      REQUIRE(sweep.code == kExitOk);
      const double theta = json::parse(read_text_file(out / "design.json"))
                               .at("throughput").at("images_per_cycle").get<double>();
      CHECK(theta >= last);
      last = theta;
    }
  }

  TEST_CASE("dse at the minimal budget and below it") {
    const auto dir = scratch_dir("cli-dse-min");
    const NetworkGraph g = small_net();
    save_network(g, dir / "net.json");
    const auto prof = uniform_profile(g, {{"c1", 0.5}, {"c2", 0.5}, {"c3", 0.5}});
    write_text_file(dir / "profile.json", serialize_profile(prof, g));
    const std::vector<std::string> base = {"dse", "--network", (dir / "net.json").string(),
                                           "--profile", (dir / "profile.json").string(),
                                           "-o", (dir / "out").string()};
    // Three layers at one DSP each.
    REQUIRE(run(cat(base, {"--budget-dsp", "3"})).code == kExitOk);
    const NetworkDesign d = load_design(dir / "out" / "design.json");
    CHECK(d == minimal_design(g, prof));
    const Run infeasible = run(cat(base, {"--budget-dsp", "2", "--no-partition"}));
    CHECK(infeasible.code == kExitInfeasible);
    CHECK(infeasible.err.find("minimal design") != std::string::npos);
    // Partitioning needs a seed, then folds the network.
    CHECK(run(cat(base, {"--budget-dsp", "2"})).code == kExitUsage);
    const Run folded = run(cat(base, {"--budget-dsp", "2", "--seed", "4"}));
    REQUIRE(folded.code == kExitOk);
    CHECK(load_design(dir / "out" / "design.json").partitions.size() >= 2);
    CHECK(run(cat(base, {"--budget-dsp", "0", "--seed", "4"})).code == kExitInfeasible);
  }

  TEST_CASE("search writes history, curves and best trial") {
    const auto dir = scratch_dir("cli-search");
    const BundlePaths b = write_bundle(dir, small_net(), 2);
    const auto args = cat({"search", "--seed", "5", "--budget-dsp", "256"}, bundle_args(b, dir / "out"));
    REQUIRE(run(cat(args, {"--iterations", "1"})).code == kExitOk);
    CHECK(load_history(dir / "out" / "history.jsonl").size() == 1);

    REQUIRE(run(cat(args, {"--iterations", "14"})).code == kExitOk);
    const std::string best = read_text_file(dir / "out" / "best_trial.json");
    REQUIRE(run(cat(args, {"--iterations", "6"})).code == kExitOk);
    REQUIRE(run(cat(args, {"--iterations", "14", "--resume"})).code == kExitOk);
    const json a = json::parse(best), c = json::parse(read_text_file(dir / "out" / "best_trial.json"));
    CHECK(a.at("iteration") == c.at("iteration"));
    CHECK(a.at("objective") == c.at("objective"));
    CHECK(std::filesystem::exists(dir / "out" / "best_design.json"));
    const std::string csv = read_text_file(dir / "out" / "efficiency.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 15);

    const auto sw = cat({"search", "--seed", "5", "--iterations", "4", "--software-only"}, bundle_args(b, dir / "sw"));
    REQUIRE(run(sw).code == kExitOk);
    CHECK(std::filesystem::exists(dir / "sw" / "efficiency.csv"));
  }

  TEST_CASE("config file with flag and environment overrides") {
    const auto dir = scratch_dir("cli-config");
    const BundlePaths b = write_bundle(dir, small_net(), 3);
    write_text_file(dir / "run.json", R"({"network":"network.json","tensors":"tensors.json",)"
                                      R"("histograms":"histograms.json","seed":9,)"
                                      R"("budget":{"dsp":200},"output_dir":"from-config",)"
                                      R"("tpe":{"iterations":2}})");
    const RunConfig cfg = load_run_config(dir / "run.json");
    CHECK(cfg.network == dir / "network.json");
    CHECK(cfg.seed_set);
    CHECK(cfg.budget_dsp == 200);
    CHECK(!cfg.budget_lut);
    REQUIRE(run({"search", "-c", (dir / "run.json").string()}).code == kExitOk);
    CHECK(load_history(dir / "from-config" / "history.jsonl").size() == 2);
    setenv("SPARSEFLOW_OUTPUT_DIR", (dir / "from-env").c_str(), 1);
    REQUIRE(run({"search", "-c", (dir / "run.json").string()}).code == kExitOk);
    REQUIRE(run({"search", "-c", (dir / "run.json").string(), "-o", (dir / "from-flag").string()}).code == kExitOk);
    unsetenv("SPARSEFLOW_OUTPUT_DIR");
    CHECK(std::filesystem::exists(dir / "from-env" / "history.jsonl"));
    CHECK(std::filesystem::exists(dir / "from-flag" / "history.jsonl"));
    write_text_file(dir / "bad.json", "{");
    CHECK(run({"search", "-c", (dir / "bad.json").string()}).code == kExitInput);
  }

  TEST_CASE("simulate reports fidelity and deadlocks") {
    const auto dir = scratch_dir("cli-sim");
    const NetworkGraph g = small_net();
    save_network(g, dir / "net.json");
    const auto prof = uniform_profile(g, {});
    write_text_file(dir / "profile.json", serialize_profile(prof, g));
    ResourceVector budget = unbounded_budget();
    budget.dsp = 64;
    const ExploreResult r = explore(g, prof, budget);
    write_text_file(dir / "design.json", serialize_design(r.design, g, u250_platform()));
    const std::vector<std::string> base = {"simulate", "--network", (dir / "net.json").string(),
                                           "--profile", (dir / "profile.json").string(),
                                           "--design", (dir / "design.json").string(),
                                           "-o", (dir / "out").string(), "--tokens", "400"};
    CHECK(run(base).code == kExitUsage);
    const Run ok = run(cat(base, {"--seed", "1"}));
    REQUIRE(ok.code == kExitOk);
    const json rep = json::parse(read_text_file(dir / "out" / "sim_report.json"));
    CHECK(rep.at("mac_occupancy").get<double>() == doctest::Approx(1.0));
    CHECK(rep.at("measured_images_per_cycle").get<double>() ==
          doctest::Approx(rep.at("predicted_images_per_cycle").get<double>()).epsilon(0.02));

    write_text_file(dir / "dead.json", R"({"simulate":{"lookahead":{"c2":4},"auto_depth":false}})");
    const Run dead = run(cat(base, {"--seed", "1", "-c", (dir / "dead.json").string()}));
    CHECK(dead.code == kExitDeadlock);
    CHECK(dead.err.find("c1 -> c2") != std::string::npos);
  }

  TEST_CASE("report prints the table row and is byte stable") {
    const auto dir = scratch_dir("cli-report");
    write_text_file(dir / "design.json",
                    R"({"network":"resnet18","clock_hz":250000000.0,)"
                    R"("throughput":{"images_per_cycle":1.1276e-5,"images_per_s":2819},)"
                    R"("resources":{"dsp":12234,"lut":0,"bram18k":0}})");
    const Run r = run({"report", "--design", (dir / "design.json").string(), "-o", (dir / "a").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("0.92e-9") != std::string::npos);
    const Run again = run({"report", "--design", (dir / "design.json").string(), "-o", (dir / "b").string()});
    CHECK(again.out == r.out);
    CHECK(read_text_file(dir / "a" / "report.csv") == read_text_file(dir / "b" / "report.csv"));

    write_text_file(dir / "empty.jsonl", "");
    const Run empty = run({"report", "--history", (dir / "empty.jsonl").string(), "-o", (dir / "c").string()});
    CHECK(empty.code == kExitOk);
    CHECK(empty.out.find("no trials") != std::string::npos);
  }
}
