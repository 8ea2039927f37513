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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sparseflow/cli.hpp"
#include "sparseflow/dse.hpp"
#include "sparseflow/error.hpp"
#include "sparseflow/perf_model.hpp"
#include "sparseflow/simulator.hpp"
#include "sparseflow/sparsity.hpp"

namespace py = pybind11;
namespace sf = sparseflow;

namespace {

std::tuple<int, std::string, std::string> run(std::vector<std::string> args) {
  args.insert(args.begin(), "sparseflow");
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = sf::cli_main(args, out, err);
  }
  return {code, out.str(), err.str()};
}

double weight_zero_fraction(const std::vector<float>& values, double tau) {
  sf::WeightTensor t;
  t.shape = {1, static_cast<int64_t>(values.size()), 1, 1};
  t.values = values;
  return sf::weight_sparsity(t, tau).overall;
}

std::string canonical_network(const std::string& text) {
  return sf::serialize_network(sf::parse_network(text));
}

std::string explore_design(const std::string& network, const std::string& profile,
                           int64_t dsp) {
  const sf::NetworkGraph graph = sf::parse_network(network);
  sf::ResourceVector budget = sf::unbounded_budget();
  budget.dsp = dsp;
  const sf::ExploreResult r = sf::explore(graph, sf::parse_profile(profile), budget);
  sf::Platform platform = sf::u250_platform();
  platform.budget = budget;
  return sf::serialize_design(r.design, graph, platform);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the sparseflow toolkit";

  static py::exception<sf::Error> error(m, "SparseflowError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const sf::Error& e) {
      error(e.what());
    }
  });

  m.def("run", &run, py::arg("args"),
        "Run the command-line tool in process; returns (exit_code, stdout, stderr).");
  m.def("efficiency_metric", &sf::efficiency_metric, py::arg("images_per_s"),
        py::arg("clock_hz"), py::arg("dsps"));
  m.def("expected_window_cycles", &sf::expected_window_cycles, py::arg("m"), py::arg("n"),
        py::arg("sparsity"));
  m.def("initiation_interval", &sf::initiation_interval, py::arg("sparsity"), py::arg("m"),
        py::arg("n"));
  m.def(
      "combined_sparsity",
      [](double weight, double activation) {
        return sf::combined_sparsity(weight, activation, sf::CombineMode::kIndependent);
      },
      py::arg("weight"), py::arg("activation"));
  m.def("weight_zero_fraction", &weight_zero_fraction, py::arg("values"), py::arg("tau"),
        "Fraction of weights clipped to zero at threshold tau (|x| <= tau).");
  m.def("canonical_network", &canonical_network, py::arg("text"),
        "Validate a network document and return its canonical serialization.");
  m.def("explore_design", &explore_design, py::arg("network"), py::arg("profile"),
        py::arg("dsp"), "Run resource-constrained exploration; returns the design document.");
}
