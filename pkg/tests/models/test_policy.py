# Copyright 2024 UC Davis Plant AI and Biophysics Lab
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

import pytest
import numpy as np
import torch

from demobot.errors import (
    ConfigurationError, ContractViolationError, TrainingAbortedError)
from demobot.models import PolicyNet, RESIDUAL_CLIP, act_residual


@pytest.fixture
def policy():
    torch.manual_seed(0)
    return PolicyNet(12, 4, hidden = (32, 16))


def test_untrained_policy_replays_base_actions(policy):
    obs = np.random.default_rng(0).normal(size = (5, 12))
    base = np.random.default_rng(1).uniform(-1, 1, size = (5, 4))
    out = act_residual(policy, obs, base, mode = 'deterministic')
    assert np.array_equal(out.action, base)
    assert np.all(out.residual == 0.0)
    assert out.value.shape == (5, )


def test_residual_is_clipped(policy):
    with torch.no_grad():
        policy.actor[-1].bias.fill_(0.5)
    out = act_residual(policy, np.zeros(12), np.zeros(4), mode = 'deterministic')
    assert np.allclose(out.residual, RESIDUAL_CLIP)
    assert np.allclose(out.raw, 0.5)
    unclipped = act_residual(policy, np.zeros(12), np.zeros(4),
                             mode = 'deterministic', clip = None)
    assert np.allclose(unclipped.action, 0.5)


def test_logprob_is_of_the_raw_sample(policy):
    with torch.no_grad():
        policy.log_std.fill_(0.0)
    out = act_residual(policy, np.zeros(12), np.zeros(4),
                       generator = torch.Generator().manual_seed(4))
    expected = -0.5 * np.sum(out.raw ** 2) - 2.0 * np.log(2 * np.pi)
    assert out.logprob == pytest.approx(expected, abs = 1e-5)
    assert np.all(np.abs(out.residual) <= RESIDUAL_CLIP)


def test_sampling_is_reproducible(policy):
    a = act_residual(policy, np.zeros((3, 12)), np.zeros((3, 4)),
                     generator = torch.Generator().manual_seed(7))
    b = act_residual(policy, np.zeros((3, 12)), np.zeros((3, 4)),
                     generator = torch.Generator().manual_seed(7))
    assert np.array_equal(a.raw, b.raw)
    assert np.all(np.std(a.raw, axis = 0) > 0)


def test_invalid_inputs(policy):
    with pytest.raises(ConfigurationError):
        act_residual(policy, np.zeros(12), np.zeros(4), mode = 'greedy')
    with pytest.raises(ContractViolationError):
        act_residual(policy, np.zeros(12), np.zeros(5))
    with pytest.raises(ConfigurationError):
        PolicyNet(12, 4, activation = 'gelu')


def test_non_finite_output_aborts(policy):
    with torch.no_grad():
        policy.actor[-1].bias.fill_(float('nan'))
    with pytest.raises(TrainingAbortedError) as exec_info:
        act_residual(policy, np.zeros(12), np.zeros(4))
    assert exec_info.value.diagnostics['quantity'] == 'action mean'


def test_logprob_skips_masked_dimensions(policy):
    with torch.no_grad():
        policy.log_std.fill_(0.0)
    mask = np.array([True, True, False, False])
    out = act_residual(policy, np.zeros(12), np.zeros(4), mask = mask,
                       generator = torch.Generator().manual_seed(4))
    expected = -0.5 * np.sum(out.raw[:2] ** 2) - np.log(2 * np.pi)
    assert out.logprob == pytest.approx(expected, abs = 1e-5)
    batched = act_residual(policy, np.zeros((3, 12)), np.zeros((3, 4)),
                           mask = np.tile(mask, (3, 1)))
    assert batched.logprob.shape == (3, )
    with pytest.raises(ContractViolationError):
        act_residual(policy, np.zeros(12), np.zeros(4), mask = np.ones(5, dtype = bool))
