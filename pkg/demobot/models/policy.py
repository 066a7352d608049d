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
The residual Gaussian policy and its value network.

The policy outputs a correction `Δa` that is added to the base action
replayed from the demonstration. Its output layer starts at exactly
zero, so an untrained policy in deterministic mode replays the base
actions unchanged.
"""

import math
from typing import NamedTuple, Sequence

import numpy as np
import torch
import torch.nn as nn
from torch.distributions import Normal

from demobot.errors import (
    ConfigurationError, ContractViolationError, TrainingAbortedError)

RESIDUAL_CLIP = 0.25

_ACTIVATIONS = {
    'elu': nn.ELU,
    'relu': nn.ReLU,
    'tanh': nn.Tanh,
    'selu': nn.SELU,
}


def _mlp(in_dim, hidden, activation, out_dim):
    layers, prev = [], in_dim
    for size in hidden:
        layers.extend([nn.Linear(prev, size), _ACTIVATIONS[activation]()])
        prev = size
    layers.append(nn.Linear(prev, out_dim))
    return nn.Sequential(*layers)


class PolicyNet(nn.Module):
    """A Gaussian actor with a separate critic of the same trunk shape.

    Parameters
    ----------
    obs_dim : int
        The size of a (normalized) observation.
    action_dim : int
        The number of joints commanded.
    hidden : sequence of int
        Hidden layer sizes of both the actor and the critic.
    activation : str
        One of `elu`, `relu`, `tanh` or `selu`.
    init_log_std : float
        The initial per-dimension log standard deviation.
    """

    def __init__(self, obs_dim, action_dim, hidden: Sequence[int] = (256, 128, 64),
                 activation = 'elu', init_log_std = math.log(0.1)):
        super(PolicyNet, self).__init__()
        if activation not in _ACTIVATIONS:
            raise ConfigurationError(
                f"Unknown activation '{activation}', expected one "
                f"of {list(_ACTIVATIONS)}.")
        self.obs_dim, self.action_dim = int(obs_dim), int(action_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        self.actor = _mlp(self.obs_dim, self.hidden, activation, self.action_dim)
        self.critic = _mlp(self.obs_dim, self.hidden, activation, 1)
        self.log_std = nn.Parameter(torch.full((self.action_dim,), float(init_log_std)))

        # The residual starts at exactly zero for any input.
        nn.init.zeros_(self.actor[-1].weight)
        nn.init.zeros_(self.actor[-1].bias)

    def architecture(self):
        return {'obs_dim': self.obs_dim, 'action_dim': self.action_dim,
                'hidden': list(self.hidden), 'activation': self.activation}

    def _as_input(self, obs):
        param = self.log_std
        if not isinstance(obs, torch.Tensor):
            obs = torch.as_tensor(np.asarray(obs), dtype = param.dtype)
        return obs.to(device = param.device, dtype = param.dtype)

    def distribution(self, obs) -> Normal:
        mean = self.actor(self._as_input(obs))
        return Normal(mean, self.log_std.exp().expand_as(mean))

    def value(self, obs):
        return self.critic(self._as_input(obs)).squeeze(-1)

    def forward(self, obs):
        obs = self._as_input(obs)
        return self.actor(obs), self.critic(obs).squeeze(-1)


class ResidualAction(NamedTuple):
    """The output of `act_residual`, as float64 NumPy arrays."""
    action: np.ndarray
    residual: np.ndarray
    raw: np.ndarray
    logprob: np.ndarray
    value: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def _check_finite(name, tensor, obs):
    if not torch.all(torch.isfinite(tensor)):
        raise TrainingAbortedError(
            f"The policy produced a non-finite {name}.",
            diagnostics = {
                'quantity': name,
                'non_finite': int((~torch.isfinite(tensor)).sum()),
                'obs_finite': bool(torch.all(torch.isfinite(obs)))})


def masked_sum(values: torch.Tensor, mask = None):
    """Sums the last axis of `values` over the dimensions set in `mask`."""
    if mask is None:
        return values.sum(-1)
    if not isinstance(mask, torch.Tensor):
        mask = torch.as_tensor(np.asarray(mask))
    mask = mask.to(dtype = values.dtype, device = values.device)
    if mask.shape != values.shape and mask.shape != values.shape[-1:]:
        raise ContractViolationError(
            f"Expected an action mask broadcastable to {tuple(values.shape)}, "
            f"got {tuple(mask.shape)}.")
    return (values * mask).sum(-1)


@torch.no_grad()
def act_residual(policy: PolicyNet, obs, base_action, mode = 'stochastic',
                 generator: torch.Generator = None, clip = RESIDUAL_CLIP,
                 mask = None):
    """Chooses the executed action `a = a_demo + Δa`.

    The raw residual is drawn from the policy's Gaussian (or is its mean
    in `deterministic` mode) and clipped to `±clip` rad; the log
    probability is that of the raw, pre-clip sample. Passing
    `clip = None` disables clipping.

    Parameters
    ----------
    policy : PolicyNet
        The policy.
    obs : array_like
        Normalized observation(s), shaped `(obs_dim,)` or `(N, obs_dim)`.
    base_action : array_like
        The base action(s) (rad), matching the batch shape.
    mode : str
        Either `stochastic` or `deterministic`.
    generator : torch.Generator
        The generator for sampling; fixing its seed makes sampling
        reproducible.
    clip : float
        The residual bound (rad).
    mask : array_like
        Boolean action dimensions the environment executes; the log
        probability sums over these only. All dimensions if `None`.
    """
    if mode not in ('stochastic', 'deterministic'):
        raise ConfigurationError(
            f"Expected a mode of `stochastic` or `deterministic`, got '{mode}'.")
    obs = policy._as_input(obs)
    mean, value = policy(obs)
    std = policy.log_std.exp().expand_as(mean)
    _check_finite('action mean', mean, obs)
    _check_finite('action std', std, obs)
    _check_finite('value', value, obs)
    if mode == 'deterministic':
        raw = mean
    else:
        noise = torch.randn(mean.shape, generator = generator, dtype = mean.dtype)
        raw = mean + std * noise.to(mean.device)
    logprob = masked_sum(Normal(mean, std).log_prob(raw), mask)

    raw = raw.cpu().numpy().astype(np.float64)
    residual = raw if clip is None else np.clip(raw, -clip, clip)
    base_action = np.asarray(base_action, dtype = np.float64)
    if base_action.shape != residual.shape:
        raise ContractViolationError(
            f"Expected base actions of shape {residual.shape}, "
            f"got {base_action.shape}.")
    return ResidualAction(
        action = base_action + residual,
        residual = residual,
        raw = raw,
        logprob = logprob.cpu().numpy().astype(np.float64),
        value = value.cpu().numpy().astype(np.float64),
        mean = mean.cpu().numpy().astype(np.float64),
        std = std.cpu().numpy().astype(np.float64))
