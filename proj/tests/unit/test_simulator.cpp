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

#include <fstream>
#include <random>

#include "doctest.h"
#include "sparseflow/dse.hpp"
#include "sparseflow/error.hpp"
#include "sparseflow/simulator.hpp"
#include "support/fixtures.hpp"

using namespace sparseflow;
using namespace sparseflow::testing;

namespace {

PairStream window(std::vector<float> w, std::vector<float> a) {
  PairStream s;
  s.m = static_cast<int64_t>(w.size());
  s.weights = std::move(w);
  s.activations = std::move(a);
  return s;
}

// Independent oracle for one window: surviving pairs, cycles, clipped dot product.
struct WindowOracle {
  int64_t k = 0;
  int64_t cycles = 0;
  double dot = 0.0;
};

WindowOracle oracle(const PairStream& s, int64_t w, int64_t n, double tw, double ta) {
  WindowOracle o;
  for (int64_t j = 0; j < s.m; ++j) {
    const double x = s.weights[static_cast<std::size_t>(w * s.m + j)];
    const double y = s.activations[static_cast<std::size_t>(w * s.m + j)];
    if (std::abs(x) > tw && std::abs(y) > ta) {
      ++o.k;
      o.dot += x * y;
    }
  }
  o.cycles = std::max<int64_t>(1, (o.k + n - 1) / n);
  return o;
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("all-zero window costs one cycle") {
    const SpeReport r = simulate_spe(window(std::vector<float>(8, 1.0F), std::vector<float>(8, 0.0F)), 2);
    CHECK(r.total_cycles == 1);
    CHECK(r.outputs[0] == 0.0);
    CHECK(r.skipped == 8);
  }

  TEST_CASE("five surviving pairs on two MACs take three cycles") {
    const SpeReport r = simulate_spe(window({1, 2, 3, 4, 5, 0, 0, 0}, {1, 1, 1, 1, 1, 1, 1, 1}), 2);
    CHECK(r.window_cycles[0] == 3);
    CHECK(r.outputs[0] == doctest::Approx(15.0));
    CHECK(r.nonzero_pairs[0] == 5);
    CHECK(r.occupancy == doctest::Approx(5.0 / 6.0));
  }

  TEST_CASE("thresholds clip with the closed rule") {
    const SpeReport r = simulate_spe(window({0.5F, -0.5F, 1.0F, 2.0F}, {1, 1, 0.25F, 1}), 1, 0.5, 0.25);
    CHECK(r.nonzero_pairs[0] == 1);
    CHECK(r.outputs[0] == doctest::Approx(2.0));
  }

  TEST_CASE("per-window oracle and conservation on random streams") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const int64_t m = std::uniform_int_distribution<int64_t>(4, 40)(rng);
      const int64_t n = std::uniform_int_distribution<int64_t>(1, std::min<int64_t>(m, 8))(rng);
      const PairStream s = generate_traces({0.3, 0.4}, m, 40, rng(), 0.0, 0.0);
      const double tw = trial % 3 == 0 ? 0.3 : 0.0;
      const SpeReport r = simulate_spe(s, n, tw, 0.0);
      for (int64_t w = 0; w < 40; ++w) {
        const WindowOracle o = oracle(s, w, n, tw, 0.0);
        CHECK(r.window_cycles[static_cast<std::size_t>(w)] == o.cycles);
        CHECK(r.nonzero_pairs[static_cast<std::size_t>(w)] == o.k);
        CHECK(r.outputs[static_cast<std::size_t>(w)] == doctest::Approx(o.dot).epsilon(1e-6));
      }
      CHECK(r.dispatched + r.skipped == static_cast<uint64_t>(m * 40));
      CHECK(r.occupancy <= 1.0);
    }
  }

  TEST_CASE("round-robin lanes never beat the ideal arbiter") {
    std::mt19937_64 rng(4);
    const PairStream s = generate_traces({0.2, 0.5}, 16, 200, 9);
    const SpeReport ideal = simulate_spe(s, 4);
    SpeConfig rr;
    rr.arbiter = Arbiter::kRoundRobin;
    const SpeReport lanes = simulate_spe(s, 4, 0, 0, rr);
    CHECK(lanes.total_cycles >= ideal.total_cycles);
    CHECK(lanes.outputs == ideal.outputs);
  }

  TEST_CASE("prefetch overlaps windows without changing outputs") {
    const PairStream s = generate_traces({0.3, 0.3}, 9, 500, 2);
    const SpeReport one = simulate_spe(s, 2);
    SpeConfig deep;
    deep.prefetch_windows = 4;
    const SpeReport four = simulate_spe(s, 2, 0, 0, deep);
    CHECK(four.total_cycles <= one.total_cycles);
    CHECK(four.outputs == one.outputs);
    CHECK_THROWS_AS(simulate_spe(s, 10), Error);
  }

  TEST_CASE("mean cycles match the binomial expectation") {
    const PairStream s = generate_traces({0.75, 0.0}, 16, 100000, 42);
    const SpeReport r = simulate_spe(s, 4);
    const double mean = static_cast<double>(r.total_cycles) / 100000.0;
    CHECK(std::abs(mean - expected_window_cycles(16, 4, 0.75)) <= 0.05);
    CHECK(expected_window_cycles(9, 3, 0.0) == doctest::Approx(3.0));
    CHECK(expected_window_cycles(9, 3, 1.0) == doctest::Approx(1.0));
  }

  TEST_CASE("trace generation rates and determinism") {
    const PairStream dense = generate_traces({0.0, 0.0}, 8, 1000, 1);
    for (std::size_t k = 0; k < dense.weights.size(); ++k) {
      CHECK(dense.weights[k] != 0.0F);
      CHECK(dense.activations[k] != 0.0F);
    }
    const PairStream a = generate_traces({0.3, 0.6}, 100, 10000, 7);
    const PairStream b = generate_traces({0.3, 0.6}, 100, 10000, 7);
    CHECK(a.weights == b.weights);
    CHECK(a.activations == b.activations);
    double joint = 0;
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
      joint += (a.weights[k] == 0.0F || a.activations[k] == 0.0F) ? 1.0 : 0.0;
    }
    CHECK(std::abs(joint / 1e6 - 0.72) <= 0.005);
  }

  TEST_CASE("zero rates reproduce the combined sparsity") {
    LayerSparsity s;
    s.weight = 0.3;
    s.combined = 0.72;
    const ZeroRates z = zero_rates(s);
    CHECK(z.weight == doctest::Approx(0.3));
    CHECK(1.0 - (1.0 - z.weight) * (1.0 - z.activation) == doctest::Approx(0.72));
    s.weight = 0.0;
    CHECK(zero_rates(s).activation == doctest::Approx(0.72));
  }

  TEST_CASE("trace files round trip and reject damage") {
    const auto dir = scratch_dir("traces");
    const PairStream s = generate_traces({0.3, 0.3}, 5, 7, 3);
    save_traces(s, dir / "t.bin");
    const PairStream back = load_traces(dir / "t.bin");
    CHECK(back.m == 5);
    CHECK(back.weights == s.weights);
    CHECK(back.activations == s.activations);
    CHECK(std::filesystem::file_size(dir / "t.bin") == 8 + 7 * (4 + 5 * 8));
    std::filesystem::resize_file(dir / "t.bin", 8 + 4 + 3 * 8);
    CHECK_THROWS_AS(load_traces(dir / "t.bin"), Error);
    write_text_file(dir / "bad.bin", "NOTATRACE");
    CHECK_THROWS_AS(load_traces(dir / "bad.bin"), Error);
  }

  TEST_CASE("single engine layer equals the engine") {
    const LayerSpec l = conv("c", 4, 4, 3, 2);
    const DesignPoint d = make_design_point(l, 1, 1, 3);
    const PairStream s = generate_traces({0.2, 0.3}, d.m, 64, 5);
    const std::vector<double> one(4, 1.0);
    const LayerReport r = simulate_layer(l, d, contiguous_allocation(one, one, 1, 1), std::span(&s, 1));
    const SpeReport e = simulate_spe(s, d.n);
    CHECK(r.total_cycles == e.total_cycles);
    CHECK(r.step_cycles == e.window_cycles);
  }

  TEST_CASE("layer steps take the slowest engine") {
    // Engine 0 has 3 survivors, engine 1 has 5.
    std::vector<PairStream> s = {window({1, 1, 1, 0, 0}, {1, 1, 1, 1, 1}),
                                 window({1, 1, 1, 1, 1}, {1, 1, 1, 1, 1})};
    const std::vector<double> ch(2, 1.0), fl(1, 1.0);
    LayerSpec wide = conv("c", 2, 1, 1, 1);
    wide.kernel_h = 5;
    const DesignPoint dd{2, 1, 1, 5, 1};
    const LayerReport r = simulate_layer(wide, dd, contiguous_allocation(ch, fl, 2, 1), s);
    CHECK(r.step_cycles[0] == 5);
    CHECK(r.engine_idle[0] == 2);
    CHECK(r.engine_idle[1] == 0);
    CHECK_THROWS_AS(simulate_layer(wide, dd, contiguous_allocation(ch, fl, 1, 1), s), Error);
  }

  TEST_CASE("balanced allocation beats contiguous on skewed channels") {
    const LayerSpec l = conv("c", 8, 2, 3, 4);
    const DesignPoint d = make_design_point(l, 2, 1, 3);
    std::vector<double> sparsity = {0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1};
    std::vector<double> load;
    for (double s : sparsity) load.push_back(1.0 - s);
    const std::vector<double> filters(2, 1.0);
    const Allocation contiguous = contiguous_allocation(load, filters, 2, 1);
    const Allocation balanced = balance_allocation(load, filters, 2, 1, AnnealingConfig{0, 0.9, 50, 20, 1});
    auto run = [&](const Allocation& a) {
      const auto streams = generate_layer_traces(l, d, a, sparsity, 4000, 11);
      return simulate_layer(l, d, a, streams).total_cycles;
    };
    CHECK(run(balanced) <= run(contiguous));
  }

  TEST_CASE("equal deterministic rates do not stall") {
    const NetworkGraph g = chain("p", {conv("a", 4, 4, 3, 2), conv("b", 4, 4, 3, 2), conv("c", 4, 4, 3, 2)});
    const std::vector<std::vector<double>> service(3, std::vector<double>(500, 2.0));
    const PipelineReport r = simulate_pipeline(g, service, {});
    for (const EdgeStats& e : r.edges) CHECK(e.stall_cycles == 0.0);
    CHECK(r.steady_tokens_per_cycle == doctest::Approx(0.5));
  }

  TEST_CASE("fast producer into slow consumer stalls by the rate gap") {
    const NetworkGraph g = chain("p", {conv("a", 4, 4, 3, 2), conv("b", 4, 4, 3, 2)});
    const std::vector<std::vector<double>> service = {std::vector<double>(1000, 1.0),
                                                      std::vector<double>(1000, 4.0)};
    const PipelineReport r = simulate_pipeline(g, service, {});
    // The producer could run at 1 token/cycle but is held to 1/4: it waits 3 of 4 cycles.
    CHECK(r.edges[0].stall_cycles / r.total_cycles == doctest::Approx(0.75).epsilon(0.01));
    CHECK(r.steady_tokens_per_cycle == doctest::Approx(0.25).epsilon(1e-6));
  }

  TEST_CASE("throughput is monotone in depth and bounded by the slowest stage") {
    std::mt19937_64 rng(8);
    std::exponential_distribution<double> service_time(1.0);
    const NetworkGraph g = chain("p", {conv("a", 4, 4, 3, 2), conv("b", 4, 4, 3, 2), conv("c", 4, 4, 3, 2)});
    std::vector<std::vector<double>> service(3, std::vector<double>(3000));
    for (auto& s : service) {
      for (double& x : s) x = 1.0 + service_time(rng);
    }
    double slowest = 0.0;
    for (const auto& s : service) slowest = std::max(slowest, std::accumulate(s.begin(), s.end(), 0.0));
    double last = 0.0;
    for (int64_t depth = 1; depth <= 16; depth *= 2) {
      std::map<Edge, int64_t> d;
      for (const Edge& e : g.edges()) d[e] = depth;
      const double theta = simulate_pipeline(g, service, d).steady_tokens_per_cycle;
      CHECK(theta >= last);
      last = theta;
    }
    CHECK(last <= 1.02 * 3000.0 / slowest);
  }

  TEST_CASE("lookahead beyond the FIFO depth deadlocks naming the edge") {
    const NetworkGraph g = chain("p", {conv("a", 4, 4, 3, 2), conv("b", 4, 4, 3, 2)});
    const std::vector<std::vector<double>> service(2, std::vector<double>(50, 1.0));
    PipelineConfig cfg;
    cfg.lookahead["b"] = 3;
    try {
      (void)simulate_pipeline(g, service, {{{"a", "b"}, 2}}, cfg);
      FAIL("expected deadlock");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDeadlock);
      CHECK(std::string(e.what()).find("a -> b") != std::string::npos);
    }
    CHECK_NOTHROW(simulate_pipeline(g, service, {{{"a", "b"}, 4}}, cfg));
  }

  TEST_CASE("dense design simulation saturates the MACs") {
    const NetworkGraph g = chain("p", {conv("a", 4, 4, 3, 4), conv("b", 4, 4, 3, 4)});
    const auto prof = uniform_profile(g, {});
    NetworkDesign d = minimal_design(g, prof);
    d.at("a").point = make_design_point(g.at("a"), 1, 1, 3);
    d.at("b").point = make_design_point(g.at("b"), 1, 1, 3);
    DesignSimOptions o;
    o.tokens = 300;
    const DesignSimReport r = simulate_design(g, d, prof, o);
    CHECK(r.occupancy == doctest::Approx(1.0));
    CHECK(r.measured_images_per_cycle == doctest::Approx(r.predicted_images_per_cycle).epsilon(0.01));
    CHECK(serialize_sim_report(r, g).find("\"fifos\"") != std::string::npos);
  }
}
