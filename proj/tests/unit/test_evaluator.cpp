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

#include <chrono>

#include "doctest.h"
#include "sparseflow/error.hpp"
#include "sparseflow/evaluator.hpp"
#include "support/fixtures.hpp"

using namespace sparseflow;
using namespace sparseflow::testing;
using namespace std::chrono_literals;

namespace {

ErrorKind kind_of(AccuracyEvaluator& e, const ThresholdAssignment& t) {
  try {
    (void)e.evaluate(t, 0.0);
  } catch (const Error& err) {
    return err.kind();
  }
  return ErrorKind::kUsage;
}

ThresholdAssignment one_layer(double w, double a) {
  ThresholdAssignment t;
  t.layers["l"] = {w, a};
  return t;
}

}  // namespace

TEST_SUITE("evaluator") {
  TEST_CASE("surrogate accuracy") {
    auto e = make_surrogate_evaluator();
    CHECK(e->evaluate({}, 0.0) == doctest::Approx(72.0));
    CHECK(e->evaluate({}, 0.5) == doctest::Approx(67.0));
    auto custom = make_evaluator(EvaluatorSpec{EvaluatorKind::kSurrogate, 50.0, 10.0});
    CHECK(custom->evaluate({}, 1.0) == doctest::Approx(40.0));
  }

  TEST_CASE("external command protocol") {
    auto echo = make_command_evaluator("echo 69.59", 10s);
    CHECK(echo->evaluate(one_layer(0.1, 0.2), 0.0) == doctest::Approx(69.59));
    // The request document arrives on standard input.
    auto reader = make_command_evaluator(
        "python3 -c \"import json,sys; d=json.load(sys.stdin); print(100*d['layers']['l']['tau_w'])\"", 10s);
    CHECK(reader->evaluate(one_layer(0.25, 0.0), 0.0) == doctest::Approx(25.0));
  }

  TEST_CASE("external command failures") {
    auto fails = make_command_evaluator("exit 3", 10s);
    CHECK(kind_of(*fails, one_layer(0, 0)) == ErrorKind::kEvaluator);
    auto junk = make_command_evaluator("echo not-a-number", 10s);
    CHECK(kind_of(*junk, one_layer(0, 0)) == ErrorKind::kEvaluator);
    auto two = make_command_evaluator("echo 1 2", 10s);
    CHECK(kind_of(*two, one_layer(0, 0)) == ErrorKind::kEvaluator);
    auto nan = make_command_evaluator("echo nan", 10s);
    CHECK(kind_of(*nan, one_layer(0, 0)) == ErrorKind::kEvaluator);
    const auto start = std::chrono::steady_clock::now();
    auto slow = make_command_evaluator("sleep 30", 300ms);
    CHECK(kind_of(*slow, one_layer(0, 0)) == ErrorKind::kEvaluator);
    CHECK(std::chrono::steady_clock::now() - start < 10s);
  }

  TEST_CASE("lookup table returns the nearest recorded point") {
    std::vector<LookupEntry> entries;
    for (int k = 0; k < 5; ++k) entries.push_back({one_layer(0.1 * k, 0.05 * k), 70.0 - k});
    auto table = make_lookup_evaluator(entries);
    CHECK(table->evaluate(one_layer(0.3, 0.15), 0.0) == doctest::Approx(67.0));
    CHECK(table->evaluate(one_layer(0.31, 0.16), 0.0) == doctest::Approx(67.0));
    const auto parsed = parse_lookup_table(
        R"({"entries":[{"thresholds":{"layers":{"l":{"tau_w":0.1,"tau_a":0.2}}},"accuracy":61.5}]})");
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].accuracy == 61.5);
    CHECK_THROWS_AS(make_lookup_evaluator({}), Error);
  }

  TEST_CASE("evaluator kinds parse") {
    CHECK(parse_evaluator_kind("lookup-table") == EvaluatorKind::kLookupTable);
    CHECK(to_string(EvaluatorKind::kExternalCommand) == "external-command");
    CHECK_THROWS_AS(parse_evaluator_kind("oracle"), Error);
  }
}
