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

from demobot.errors import ContractViolationError
from demobot.models import (
    RolloutBuffer, compute_gae, normalize_advantages,
    EmpiricalNormalizer, ValueNormalizer, normalize_obs)
from demobot.models.policy import ResidualAction


def _brute_force_gae(rewards, values, dones, last_value, gamma, lam):
    # Sums the discounted TD residuals up to the first done step.
    T = len(rewards)
    next_values = np.append(values[1:], last_value)
    deltas = rewards + gamma * next_values * (1 - dones) - values
    out = np.zeros(T)
    for t in range(T):
        total, factor = 0.0, 1.0
        for k in range(t, T):
            total += factor * deltas[k]
            if dones[k]:
                break
            factor *= gamma * lam
        out[t] = total
    return out


def test_gae_three_step_example():
    advantages, returns = compute_gae(
        [1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [False, False, True], 0.0)
    assert advantages[0] == pytest.approx(1 + 0.9405 * (1 + 0.9405), abs = 1e-10)
    assert advantages[0] == pytest.approx(2.82503, abs = 1e-5)
    assert np.array_equal(advantages, returns)


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_gae_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    rewards = rng.normal(size = 40)
    values = rng.normal(size = 40)
    dones = rng.uniform(size = 40) < 0.15
    last_value = rng.normal()
    advantages, returns = compute_gae(rewards, values, dones, last_value)
    expected = _brute_force_gae(rewards, values, dones.astype(float),
                                last_value, 0.99, 0.95)
    assert np.allclose(advantages, expected, atol = 1e-10)
    assert np.allclose(returns, advantages + values, atol = 1e-12)


def test_gae_lanes_are_independent():
    rng = np.random.default_rng(3)
    rewards, values = rng.normal(size = (10, 2)), rng.normal(size = (10, 2))
    dones = np.zeros((10, 2), dtype = bool)
    dones[4, 0] = True
    joint, _ = compute_gae(rewards, values, dones, [0.5, -0.5])
    for lane, last in enumerate([0.5, -0.5]):
        single, _ = compute_gae(rewards[:, lane], values[:, lane],
                                dones[:, lane], last)
        assert np.allclose(joint[:, lane], single)


def test_gae_shape_mismatch():
    with pytest.raises(ContractViolationError):
        compute_gae([1.0, 1.0], [0.0], [False, False], 0.0)


def test_normalized_advantages():
    out = normalize_advantages(np.random.default_rng(0).normal(3.0, 2.0, size = 1000))
    assert out.mean() == pytest.approx(0.0, abs = 1e-10)
    assert out.std() == pytest.approx(1.0, abs = 1e-6)


def test_empirical_normalizer_statistics():
    rng = np.random.default_rng(0)
    normalizer = EmpiricalNormalizer(3)
    for _ in range(20):
        normalizer.update(rng.normal(5.0, 2.0, size = (500, 3)))
    assert normalizer.count == 10000
    assert np.allclose(normalizer.mean, 5.0, atol = 0.1)
    assert np.allclose(np.sqrt(normalizer.var), 2.0, atol = 0.1)
    out = normalizer(rng.normal(5.0, 2.0, size = (5000, 3)))
    assert np.allclose(out.mean(axis = 0), 0.0, atol = 0.1)
    assert np.allclose(out.std(axis = 0), 1.0, atol = 0.1)


def test_normalization_without_update_is_pure():
    normalizer = EmpiricalNormalizer(2)
    normalizer.update(np.array([[1.0, 2.0], [3.0, 6.0]]))
    before = normalizer.state_dict()
    normalize_obs(normalizer, np.ones((4, 2)))
    assert normalizer.state_dict() == before
    assert np.all(np.abs(normalizer(np.full(2, 1e9))) == 10.0)


def test_first_observation_normalizes_to_zero():
    normalizer = EmpiricalNormalizer(4)
    assert np.allclose(normalizer(np.arange(4.0), update = True), 0.0)


def test_value_normalizer_round_trip():
    normalizer = ValueNormalizer()
    assert normalizer.normalize(3.0) == 3.0
    normalizer.update(np.random.default_rng(1).normal(100.0, 20.0, size = 2000))
    values = np.linspace(-50, 250, 7)
    assert np.allclose(normalizer.denormalize(normalizer.normalize(values)), values)
    restored = ValueNormalizer()
    restored.load_state_dict(normalizer.state_dict())
    assert np.allclose(restored.normalize(values), normalizer.normalize(values))
    with pytest.raises(ContractViolationError):
        normalizer.update([1.0, float('inf')])


def _step(num_lanes, action_dim, value):
    zeros = np.zeros((num_lanes, action_dim))
    return ResidualAction(
        action = zeros, residual = zeros, raw = zeros,
        logprob = np.zeros(num_lanes), value = np.full(num_lanes, value),
        mean = zeros, std = np.ones((num_lanes, action_dim)))


def test_rollout_buffer():
    buffer = RolloutBuffer(num_lanes = 2, steps = 3, obs_dim = 5, action_dim = 4)
    with pytest.raises(ContractViolationError):
        buffer.compute_returns(np.zeros(2), 0.99, 0.95)
    for t in range(3):
        buffer.add(np.zeros((2, 5)), _step(2, 4, 0.0), np.ones(2),
                   np.array([False, t == 2]), np.zeros((2, 4)))
    assert buffer.full and len(buffer) == 6
    with pytest.raises(ContractViolationError):
        buffer.add(np.zeros((2, 5)), _step(2, 4, 0.0), np.ones(2),
                   np.zeros(2, dtype = bool), np.zeros((2, 4)))
    advantages, _ = buffer.compute_returns(np.zeros(2), 0.99, 0.95)
    assert advantages[0, 1] == pytest.approx(2.82503, abs = 1e-5)
    assert buffer.flat('obs').shape == (6, 5)
    indices = np.concatenate(list(buffer.minibatches(3)))
    assert sorted(indices.tolist()) == list(range(6))
    buffer.clear()
    assert len(buffer) == 0 and buffer.advantages is None


def test_rollout_buffer_keeps_action_masks():
    buffer = RolloutBuffer(num_lanes = 2, steps = 2, obs_dim = 5, action_dim = 4)
    masks = np.array([[True, True, False, False], [True] * 4])
    buffer.add(np.zeros((2, 5)), _step(2, 4, 0.0), np.ones(2),
               np.zeros(2, dtype = bool), np.zeros((2, 4)), masks = masks)
    buffer.add(np.zeros((2, 5)), _step(2, 4, 0.0), np.ones(2),
               np.zeros(2, dtype = bool), np.zeros((2, 4)))
    flat = buffer.flat('masks')
    assert flat.shape == (4, 4)
    assert np.array_equal(flat[:2], masks) and np.all(flat[2:])
