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

"""
Rollout storage and generalized advantage estimation.
"""

import numpy as np
import torch

from demobot.errors import ContractViolationError


def compute_gae(rewards, values, dones, last_values, gamma = 0.99, lam = 0.95):
    """Computes generalized advantage estimates and returns.

    With `δ_t = r_t + γ V_{t+1} (1 - done_t) - V_t`, the advantages are
    `A_t = δ_t + γ λ (1 - done_t) A_{t+1}` and the returns `A + V`. A
    done step (a failure, a completed episode or a gated reset) cuts
    both the bootstrap and the advantage recursion.

    Parameters
    ----------
    rewards, values, dones : array_like
        Arrays shaped `(T,)` or `(T, lanes)`, with `values` in the
        un-normalized return scale.
    last_values : array_like
        The value estimates of the observations following the last step.

    Returns
    -------
    The (un-normalized) advantages and the returns, as float64 arrays.
    """
    rewards = np.asarray(rewards, dtype = np.float64)
    values = np.asarray(values, dtype = np.float64)
    not_done = 1.0 - np.asarray(dones, dtype = np.float64)
    if not rewards.shape == values.shape == not_done.shape:
        raise ContractViolationError(
            f"Rewards {rewards.shape}, values {values.shape} and dones "
            f"{not_done.shape} must share a shape.")
    next_values = np.asarray(last_values, dtype = np.float64).reshape(rewards.shape[1:])
    advantages = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    for t in reversed(range(rewards.shape[0])):
        delta = rewards[t] + gamma * next_values * not_done[t] - values[t]
        running = delta + gamma * lam * not_done[t] * running
        advantages[t] = running
        next_values = values[t]
    return advantages, advantages + values


def normalize_advantages(advantages, eps = 1e-8):
    advantages = np.asarray(advantages, dtype = np.float64)
    return (advantages - advantages.mean()) / (advantages.std() + eps)


class RolloutBuffer(object):
    """Transitions of every lane over one rollout.

    Holds `steps_per_env` steps of `num_lanes` lanes. Actions are stored
    as the raw (pre-clip) residual samples, whose log probabilities the
    update re-evaluates; the executed actions and the base actions are
    kept alongside for diagnostics.

    Parameters
    ----------
    num_lanes : int
        The number of environment lanes.
    steps : int
        The number of steps collected per lane.
    obs_dim, action_dim : int
        Observation and action sizes.
    """

    def __init__(self, num_lanes, steps, obs_dim, action_dim):
        self.num_lanes, self.steps = int(num_lanes), int(steps)
        self.obs_dim, self.action_dim = int(obs_dim), int(action_dim)
        shape = (self.steps, self.num_lanes)
        self.obs = np.zeros(shape + (self.obs_dim,))
        self.actions = np.zeros(shape + (self.action_dim,))
        self.residuals = np.zeros(shape + (self.action_dim,))
        self.base_actions = np.zeros(shape + (self.action_dim,))
        self.means = np.zeros(shape + (self.action_dim,))
        self.stds = np.zeros(shape + (self.action_dim,))
        self.masks = np.ones(shape + (self.action_dim,), dtype = bool)
        self.logprobs = np.zeros(shape)
        self.rewards = np.zeros(shape)
        self.dones = np.zeros(shape, dtype = bool)
        self.values = np.zeros(shape)
        self.advantages = None
        self.returns = None
        self._step = 0

    def __len__(self):
        return self._step * self.num_lanes

    @property
    def capacity(self):
        return self.steps * self.num_lanes

    @property
    def full(self):
        return self._step == self.steps

    def add(self, obs, act, rewards, dones, base_actions, values = None,
            masks = None):
        """Stores one step of every lane.

        `act` is a `ResidualAction`; `values` (un-normalized) override
        the values it carries, for when value normalization is on.
        `masks` mark the action dimensions the environments executed.
        """
        if self.full:
            raise ContractViolationError(
                f"The rollout buffer is full ({self.steps} steps); "
                f"compute returns and clear it first.")
        t = self._step
        self.obs[t] = obs
        self.actions[t] = act.raw
        self.residuals[t] = act.residual
        self.base_actions[t] = base_actions
        self.means[t] = act.mean
        self.stds[t] = act.std
        self.logprobs[t] = act.logprob
        self.masks[t] = True if masks is None else masks
        self.rewards[t] = rewards
        self.dones[t] = dones
        self.values[t] = act.value if values is None else values
        self._step += 1

    def compute_returns(self, last_values, gamma, lam):
        if not self.full:
            raise ContractViolationError(
                f"Advantages are computed on a full buffer, but only "
                f"{self._step} of {self.steps} steps are stored.")
        self.advantages, self.returns = compute_gae(
            self.rewards, self.values, self.dones, last_values,
            gamma = gamma, lam = lam)
        return self.advantages, self.returns

    def clear(self):
        self._step = 0
        self.advantages = self.returns = None

    def minibatches(self, num_minibatches, generator: torch.Generator = None):
        """Yields shuffled index arrays over the flattened transitions."""
        total = self.capacity
        size = max(1, total // num_minibatches)
        order = torch.randperm(total, generator = generator).numpy()
        for start in range(0, size * min(num_minibatches, total), size):
            yield order[start:start + size]

    def flat(self, name):
        """A stored array with the step and lane axes merged."""
        arr = getattr(self, name)
        return arr.reshape(self.capacity, *arr.shape[2:])
