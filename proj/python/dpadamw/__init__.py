# Copyright 2026 The dpadamw Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Differentially private AdamW and friends, backed by a C++ core."""

from ._dpadamw import (
    DpAdamWError,
    HyperParams,
    OptimizerState,
    PrivatizedGradient,
    bound_rhs,
    calibrate_sigma_closed_form,
    calibrate_sigma_rdp,
    epsilon_rdp,
    gen_blobs,
    learning_rate_schedule,
    minimal_delta0,
    normalize_config,
    optimizers,
    phi,
    privatize,
    rdp_subsampled_gaussian,
    run_experiment,
    stationary_bias_check,
    step,
)

__all__ = [
    "DpAdamWError",
    "HyperParams",
    "OptimizerState",
    "PrivatizedGradient",
    "bound_rhs",
    "calibrate_sigma_closed_form",
    "calibrate_sigma_rdp",
    "epsilon_rdp",
    "gen_blobs",
    "learning_rate_schedule",
    "minimal_delta0",
    "normalize_config",
    "optimizers",
    "phi",
    "privatize",
    "rdp_subsampled_gaussian",
    "run_experiment",
    "stationary_bias_check",
    "step",
]
