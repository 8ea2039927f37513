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

#include "sparseflow/resource_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "sparseflow/error.hpp"

namespace sparseflow {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "bias", "io_n", "io", "m", "buffer_words", "weight_bits"};
constexpr std::array<std::string_view, kResourceCount> kResourceNames = {
    "dsp", "lut", "bram18k"};

int64_t round_clamped(double v) {
  return v <= 0.0 ? 0 : static_cast<int64_t>(std::llround(v));
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string(what) + ": " + e.what());
  }
}

ResourceVector parse_resources(const json& j) {
  return {j.value("dsp", int64_t{0}), j.value("lut", int64_t{0}),
          j.value("bram18k", int64_t{0})};
}

json resources_json(const ResourceVector& r) {
  return {{"dsp", r.dsp}, {"lut", r.lut}, {"bram18k", r.bram18k}};
}

}  // namespace

ResourceVector componentwise_max(const ResourceVector& a, const ResourceVector& b) {
  return {std::max(a.dsp, b.dsp), std::max(a.lut, b.lut),
          std::max(a.bram18k, b.bram18k)};
}

ResourceVector unbounded_budget() {
  constexpr int64_t kHuge = std::numeric_limits<int64_t>::max() / 4;
  return {kHuge, kHuge, kHuge};
}

std::string_view to_string(Resource r) {
  return kResourceNames[static_cast<std::size_t>(r)];
}

std::string_view to_string(Feature f) {
  return kFeatureNames[static_cast<std::size_t>(f)];
}

FeatureVector layer_features(const LayerSpec& layer, const DesignPoint& d) {
  const auto engines = static_cast<double>(d.engines());
  return {1.0,
          static_cast<double>(d.macs()),
          engines,
          static_cast<double>(d.m),
          static_cast<double>(d.buffer_depth) * engines,
          static_cast<double>(layer.weight_count() * kWeightBits)};
}

ResourceVector RegressionModel::predict(const FeatureVector& x) const {
  std::array<int64_t, kResourceCount> out{};
  for (std::size_t r = 0; r < kResourceCount; ++r) {
    double acc = 0.0;
    for (std::size_t f = 0; f < kFeatureCount; ++f) acc += coeffs[r][f] * x[f];
    out[r] = round_clamped(acc);
  }
  return {out[0], out[1], out[2]};
}

bool RegressionModel::non_negative() const {
  for (const auto& row : coeffs) {
    for (double c : row) {
      if (c < 0.0) return false;
    }
  }
  return true;
}

RegressionModel default_model() {
  RegressionModel m;
  m.coeffs[0] = {0, 1, 0, 0, 0, 0};
  m.coeffs[1] = {0, 120, 350, 0, 0, 0};
  m.coeffs[2] = {0, 0, 0, 0, 1.0 / 1024.0, 1.0 / 18432.0};
  m.placeholder = true;
  return m;
}

RegressionModel fit(const std::vector<ResourceSample>& samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto k = static_cast<Eigen::Index>(kFeatureCount);
  if (n < k) {
    fail(ErrorKind::kValidation, "resource fit needs at least " +
                                     std::to_string(kFeatureCount) + " samples");
  }
  Eigen::MatrixXd x(n, k);
  Eigen::MatrixXd y(n, static_cast<Eigen::Index>(kResourceCount));
  for (Eigen::Index s = 0; s < n; ++s) {
    const ResourceSample& sample = samples[static_cast<std::size_t>(s)];
    for (Eigen::Index f = 0; f < k; ++f) {
      x(s, f) = sample.features[static_cast<std::size_t>(f)];
    }
    y(s, 0) = static_cast<double>(sample.measured.dsp);
    y(s, 1) = static_cast<double>(sample.measured.lut);
    y(s, 2) = static_cast<double>(sample.measured.bram18k);
  }
  // Column scaling keeps the rank test meaningful across feature magnitudes.
  Eigen::VectorXd scale = x.cwiseAbs().colwise().maxCoeff().transpose();
  for (Eigen::Index f = 0; f < k; ++f) {
    if (scale(f) == 0.0) {
      fail(ErrorKind::kValidation, "resource fit is rank-deficient: feature '" +
                                       std::string(kFeatureNames[f]) + "' is always 0");
    }
  }
  const Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    fail(ErrorKind::kValidation, "resource fit is rank-deficient (rank " +
                                     std::to_string(qr.rank()) + " of " +
                                     std::to_string(k) + ")");
  }
  const Eigen::MatrixXd beta = scale.cwiseInverse().asDiagonal() * qr.solve(y);
  const Eigen::MatrixXd resid = y - x * beta;

  RegressionModel model;
  for (std::size_t r = 0; r < kResourceCount; ++r) {
    const auto col = static_cast<Eigen::Index>(r);
    for (Eigen::Index f = 0; f < k; ++f) {
      model.coeffs[r][static_cast<std::size_t>(f)] = beta(f, col);
    }
    model.residual_rms[r] =
        std::sqrt(resid.col(col).squaredNorm() / static_cast<double>(n));
  }
  return model;
}

RegressionModel parse_coefficients(std::string_view text) {
  const json doc = parse_json(text, "coefficients");
  RegressionModel model;
  try {
    const int version = doc.value("version", kFeatureVersion);
    if (version != kFeatureVersion) {
      fail(ErrorKind::kValidation,
           "unsupported coefficient version " + std::to_string(version));
    }
    for (std::size_t r = 0; r < kResourceCount; ++r) {
      const std::string key(kResourceNames[r]);
      if (!doc.contains(key)) continue;
      for (const auto& [name, value] : doc.at(key).items()) {
        auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), name);
        if (it == kFeatureNames.end()) {
          fail(ErrorKind::kValidation, "unknown resource feature '" + name + "'");
        }
        model.coeffs[r][static_cast<std::size_t>(it - kFeatureNames.begin())] =
            value.get<double>();
      }
    }
    model.placeholder = doc.value("placeholder", false);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("coefficients: ") + e.what());
  }
  return model;
}

RegressionModel load_coefficients(const std::filesystem::path& path) {
  return parse_coefficients(read_text_file(path));
}

std::string serialize_coefficients(const RegressionModel& model) {
  json doc{{"version", kFeatureVersion}, {"placeholder", model.placeholder}};
  for (std::size_t r = 0; r < kResourceCount; ++r) {
    json row = json::object();
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      row[std::string(kFeatureNames[f])] = model.coeffs[r][f];
    }
    doc[std::string(kResourceNames[r])] = std::move(row);
  }
  return doc.dump(2) + "\n";
}

ResourceVector estimate_layer(const LayerSpec& layer, const DesignPoint& d,
                              const RegressionModel& model) {
  if (!layer.prunable()) return {};
  return model.predict(layer_features(layer, d));
}

ResourceVector estimate_network(const NetworkDesign& g, const NetworkGraph& graph,
                                const RegressionModel& model,
                                const ResourceVector& overhead) {
  auto cost = [&](std::string_view id) {
    const LayerSpec& layer = graph.at(id);
    if (!layer.prunable()) return ResourceVector{};
    return estimate_layer(layer, g.at(id).point, model);
  };
  ResourceVector total;
  if (g.partitions.empty()) {
    for (const auto& [id, ld] : g.layers) total += cost(id);
  } else {
    for (const auto& part : g.partitions) {
      ResourceVector sum;
      for (const std::string& id : part) {
        if (g.layers.count(id) != 0) sum += cost(id);
      }
      total = componentwise_max(total, sum);
    }
  }
  return total + overhead;
}

Platform u250_platform() { return Platform{}; }

Platform parse_platform(std::string_view text) {
  const json doc = parse_json(text, "platform");
  Platform p;
  try {
    p.name = doc.value("name", p.name);
    if (doc.contains("budget")) p.budget = parse_resources(doc.at("budget"));
    p.clock_hz = doc.value("clock_hz", p.clock_hz);
    p.reconfig_seconds = doc.value("reconfig_seconds", p.reconfig_seconds);
    if (doc.contains("overhead")) p.overhead = parse_resources(doc.at("overhead"));
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("platform: ") + e.what());
  }
  if (p.clock_hz <= 0.0 || p.reconfig_seconds < 0.0) {
    fail(ErrorKind::kValidation, "platform clock must be positive and reconfiguration time non-negative");
  }
  return p;
}

Platform load_platform(const std::filesystem::path& path) {
  return parse_platform(read_text_file(path));
}

std::string serialize_platform(const Platform& p) {
  json doc{{"name", p.name},
           {"budget", resources_json(p.budget)},
           {"clock_hz", p.clock_hz},
           {"reconfig_seconds", p.reconfig_seconds},
           {"overhead", resources_json(p.overhead)}};
  return doc.dump(2) + "\n";
}

}  // namespace sparseflow
