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

#include <random>

#include "doctest.h"
#include "sparseflow/error.hpp"
#include "sparseflow/perf_model.hpp"
#include "support/fixtures.hpp"

using namespace sparseflow;
using namespace sparseflow::testing;

TEST_SUITE("perf_model") {
  TEST_CASE("initiation interval") {
    CHECK(initiation_interval(0.0, 9, 3) == 3);
    CHECK(initiation_interval(0.5, 8, 2) == 2);
    CHECK(initiation_interval(0.99, 16, 4) == 1);
    CHECK(initiation_interval(0.999999, 9, 1) == 1);
    // (1 - 0.75) * 16 / 4 is exactly 1 even with rounding noise.
    CHECK(initiation_interval(0.75, 16, 4) == 1);
  }

  TEST_CASE("initiation interval monotonicity") {
    for (int64_t m = 1; m <= 40; ++m) {
      for (int64_t n = 1; n <= m; ++n) {
        int64_t last = initiation_interval(0.0, m, n);
        for (double s = 0.05; s < 1.0; s += 0.05) {
          const int64_t t = initiation_interval(s, m, n);
          CHECK(t <= last);
          CHECK(t >= 1);
          last = t;
        }
        if (n < m) CHECK(initiation_interval(0.3, m, n + 1) <= initiation_interval(0.3, m, n));
        CHECK(initiation_interval(0.3, m + 1, n) >= initiation_interval(0.3, m, n));
      }
    }
  }

  TEST_CASE("layer throughput examples") {
    LayerSpec l = conv("c", 4, 4, 1, 1);
    DesignPoint d{4, 4, 4, 36, 1};
    // Force C_l = 10 000 through the output size.
    l.in_channels = 4;
    l.out_filters = 25;
    l.out_h = 100;
    l.out_w = 1;
    REQUIRE(ops_count(l) == 10000);
    CHECK(layer_throughput(l, d, 0.5) == doctest::Approx(0.01152));

    const LayerSpec c = conv("k", 16, 32, 3, 8);
    const DesignPoint dense = make_design_point(c, 4, 8, 3);
    CHECK(layer_throughput(c, dense, 0.0) ==
          doctest::Approx(4.0 * 8 * 3 / static_cast<double>(ops_count(c))));
    const DesignPoint full = make_design_point(c, 1, 1, 9);
    CHECK(layer_throughput(c, full, 0.4) == doctest::Approx(9.0 / static_cast<double>(ops_count(c))));
  }

  TEST_CASE("throughput is monotone in parallelism and sparsity") {
    const LayerSpec c = conv("k", 16, 32, 3, 8);
    for (int64_t i : divisors(16)) {
      for (int64_t o : divisors(32)) {
        for (int64_t n = 1; n <= 9; ++n) {
          const DesignPoint d = make_design_point(c, i, o, n);
          const double t = layer_throughput(c, d, 0.3);
          if (n < 9) CHECK(layer_throughput(c, make_design_point(c, i, o, n + 1), 0.3) >= t);
          CHECK(layer_throughput(c, d, 0.6) >= t);
        }
      }
    }
  }

  TEST_CASE("window length policies") {
    const LayerSpec c = conv("k", 64, 64, 3, 8);
    CHECK(window_length(c, 4) == 9);
    CHECK(window_length(c, 4, WindowPolicy::kChannelSlice) == 144);
    const LayerSpec p = conv("p", 64, 64, 1, 8);
    CHECK(window_length(p, 8) == 8);
    CHECK(parse_window_policy(to_string(WindowPolicy::kChannelSlice)) == WindowPolicy::kChannelSlice);
    CHECK_THROWS_AS(parse_window_policy("bogus"), Error);
    CHECK(make_design_point(c, 1, 1, 99).n == 9);
    CHECK_THROWS_AS(validate_design_point(c, DesignPoint{3, 1, 1, 9, 1}), Error);
    CHECK(divisors(12) == std::vector<int64_t>{1, 2, 3, 4, 6, 12});
  }

  TEST_CASE("network throughput is the slowest layer") {
    const NetworkGraph g = chain("two", {conv("a", 8, 8, 3, 4), conv("b", 8, 8, 3, 4)});
    NetworkDesign d;
    d.layers["a"] = {make_design_point(g.at("a"), 1, 1, 9), 0.0};
    d.layers["b"] = {make_design_point(g.at("b"), 2, 1, 9), 0.0};
    CHECK(network_throughput(d, g) == doctest::Approx(layer_throughput(d, g.at("a"))));
    CHECK(layer_throughput(d, g.at("b")) == doctest::Approx(2 * layer_throughput(d, g.at("a"))));
    d.layers.erase("b");
    CHECK_THROWS_AS(network_throughput(d, g), Error);
  }

  TEST_CASE("efficiency metric table values") {
    CHECK(efficiency_metric(2819, 250e6, 12234) * 1e9 == doctest::Approx(0.92).epsilon(0.01));
    CHECK(efficiency_metric(4495, 250e6, 5261) * 1e9 == doctest::Approx(3.42).epsilon(0.01));
    CHECK(efficiency_metric(4895, 250e6, 1796) * 1e9 == doctest::Approx(10.90).epsilon(0.01));
    CHECK_THROWS_AS(efficiency_metric(1, 250e6, 0), Error);
  }
}
