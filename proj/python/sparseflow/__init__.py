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
"""Sparsity-aware dataflow accelerator design toolkit."""

from sparseflow._core import (
    SparseflowError,
    canonical_network,
    combined_sparsity,
    efficiency_metric,
    expected_window_cycles,
    explore_design,
    initiation_interval,
    run,
    weight_zero_fraction,
)

__all__ = [
    "SparseflowError",
    "canonical_network",
    "combined_sparsity",
    "efficiency_metric",
    "expected_window_cycles",
    "explore_design",
    "initiation_interval",
    "run",
    "weight_zero_fraction",
]
