# Copyright 2026 The Sparseflow Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math
import pathlib

import numpy as np
import pytest

import sparseflow

GOLDEN = pathlib.Path(__file__).resolve().parents[1] / "golden" / "tie_rule.json"


def network_doc():
    def conv(name, cin, cout):
        return {"id": name, "kind": "conv2d", "in_channels": cin, "out_filters": cout,
                "kernel": [3, 3], "stride": [1, 1],
                "out_spatial": [8, 8]}
    return {"name": "tiny", "layers": [conv("a", 8, 16), conv("b", 16, 16)], "edges": [["a", "b"]]}


def test_efficiency_matches_table_arithmetic():
    assert sparseflow.efficiency_metric(2819, 250e6, 12234) == pytest.approx(0.9217e-9, rel=1e-3)


def test_window_cycles_closed_form():
    assert sparseflow.expected_window_cycles(9, 9, 0.0) == pytest.approx(1.0)
    mean = sum(math.comb(16, k) * 0.5**16 * max(1, -(-k // 4)) for k in range(17))
    assert sparseflow.expected_window_cycles(16, 4, 0.5) == pytest.approx(mean)
    assert sparseflow.initiation_interval(0.5, 9, 3) == 2


def test_combined_sparsity_law():
    assert sparseflow.combined_sparsity(0.5, 0.5) == pytest.approx(0.75)


def test_tie_rule_golden_matches_numpy_exporter_rule():
    cases = json.loads(GOLDEN.read_text())["cases"]
    for case in cases:
        values = np.asarray(case["values"], dtype=np.float32)
        exporter = float(np.mean(np.abs(values) <= np.float32(case["tau"])))
        assert exporter == pytest.approx(case["zero_fraction"])
        core = sparseflow.weight_zero_fraction(values.tolist(), case["tau"])
        assert core == pytest.approx(case["zero_fraction"])


def test_network_validation_and_errors():
    text = json.dumps(network_doc())
    canonical = sparseflow.canonical_network(text)
    assert sparseflow.canonical_network(canonical) == canonical
    bad = network_doc()
    bad["edges"].append(["b", "a"])
    with pytest.raises(sparseflow.SparseflowError):
        sparseflow.canonical_network(json.dumps(bad))


def test_explore_and_cli(tmp_path):
    net = tmp_path / "network.json"
    net.write_text(json.dumps(network_doc()))
    profile = {"mode": "independent", "layers": [
        {"id": "a", "combined_sparsity": 0.5}, {"id": "b", "combined_sparsity": 0.25}]}
    prof = tmp_path / "profile.json"
    prof.write_text(json.dumps(profile))
    design = json.loads(sparseflow.explore_design(net.read_text(), prof.read_text(), 64))
    assert design["resources"]["dsp"] <= 64
    assert [l["id"] for l in design["layers"]] == ["a", "b"]

    code, out, err = sparseflow.run(["dse", "--network", str(net), "--profile", str(prof),
                                     "--budget-dsp", "1", "--no-partition",
                                     "-o", str(tmp_path / "out")])
    assert code == 3, err
    code, out, err = sparseflow.run(["dse", "--network", str(net), "--profile", str(prof),
                                     "--budget-dsp", "64", "-o", str(tmp_path / "out")])
    assert code == 0, err
    assert (tmp_path / "out" / "design.json").exists()
    code, _, _ = sparseflow.run(["nonsense"])
    assert code == 1
