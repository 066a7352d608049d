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
Proximal policy optimization of the residual policy.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch
import torch.nn as nn

from demobot.framework import Parameters
from demobot.errors import ConfigurationError, TrainingAbortedError
from demobot.models.normalization import (
    EmpiricalNormalizer, ValueNormalizer, normalize_obs, normalize_values)
from demobot.models.policy import (
    PolicyNet, ResidualAction, RESIDUAL_CLIP, act_residual, masked_sum)
from demobot.models.storage import RolloutBuffer, normalize_advantages


@dataclass(repr = False)
class PpoConfig(Parameters):
    """Hyperparameters of PPO.

    Parameters
    ----------
    steps_per_env : int
        Steps collected per lane between updates.
    epochs : int
        Passes over the rollout per update.
    minibatches : int
        Minibatches per epoch.
    clip : float
        The ratio clip of the surrogate (and of the clipped value loss).
    entropy_coef : float
        The weight of the entropy bonus.
    value_loss_coef : float
        The weight of the value loss.
    clipped_value_loss : bool
        Whether value predictions are clipped around the rollout's values.
    lr : float
        The initial learning rate.
    schedule : str
        `adaptive` (KL-driven) or `fixed`.
    gamma, lam : float
        The discount and the GAE factor.
    desired_kl : float
        The target KL divergence of the adaptive schedule.
    max_lr : float
        The ceiling of the adaptive schedule.
    max_grad_norm : float
        The gradient norm clip.
    empirical_normalization : bool
        Whether observations are normalized by running statistics.
    value_normalization : bool
        Whether value targets are normalized by running statistics.
    hidden : tuple of int
        Hidden layer sizes of the actor and the critic.
    activation : str
        The hidden nonlinearity.
    init_log_std : float
        The initial log standard deviation of the policy.
    """
    steps_per_env: int = 24
    epochs: int = 4
    minibatches: int = 32
    clip: float = 0.2
    entropy_coef: float = 5.0e-5
    value_loss_coef: float = 0.5
    clipped_value_loss: bool = True
    lr: float = 5.0e-4
    schedule: str = 'adaptive'
    gamma: float = 0.99
    lam: float = 0.95
    desired_kl: float = 0.008
    max_lr: float = 1.0e-2
    max_grad_norm: float = 1.0
    empirical_normalization: bool = True
    value_normalization: bool = True
    hidden: tuple = (256, 128, 64)
    activation: str = 'elu'
    init_log_std: float = math.log(0.1)

    def validate(self):
        if self.schedule not in ('adaptive', 'fixed'):
            raise ConfigurationError(
                f"Expected a learning rate schedule of `adaptive` or "
                f"`fixed`, got '{self.schedule}'.")
        for name in ('steps_per_env', 'epochs', 'minibatches'):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"`{name}` must be positive.")
        if not 0 < self.lr <= self.max_lr:
            raise ConfigurationError(
                f"Expected 0 < lr <= max_lr, got lr = {self.lr}.")
        if not (0 <= self.gamma <= 1 and 0 <= self.lam <= 1):
            raise ConfigurationError("`gamma` and `lam` must lie in [0, 1].")
        self.hidden = tuple(int(h) for h in self.hidden)


def adapt_learning_rate(lr, kl, config: PpoConfig):
    """The adaptive schedule: shrink on large KL, grow on small KL.

    If `kl > 2 · desired_kl`, the rate is divided by 1.5; if
    `kl < desired_kl / 2`, it is multiplied by 1.5 up to `max_lr`.
    """
    if config.schedule != 'adaptive':
        return lr
    if kl > 2.0 * config.desired_kl:
        return lr / 1.5
    if kl < config.desired_kl / 2.0:
        return min(lr * 1.5, config.max_lr)
    return lr


def gaussian_kl(old_mean, old_std, mean, std, mask = None):
    """The mean (over the batch) KL divergence between diagonal Gaussians.

    With a `mask`, only the set action dimensions contribute.
    """
    kl = torch.log(std / old_std) \
        + (old_std ** 2 + (old_mean - mean) ** 2) / (2.0 * std ** 2) - 0.5
    return masked_sum(kl, mask).mean()


def ppo_loss(policy: PolicyNet, batch, config: PpoConfig):
    """The total PPO loss of one minibatch.

    `batch` holds tensors `obs`, `actions` (raw residual samples),
    `logprobs`, `advantages`, `returns` and `values`, the last two in
    the scale the critic regresses. An optional `masks` tensor restricts
    the log probabilities to the executed action dimensions.

    Returns
    -------
    The loss tensor and a dictionary of its (detached) components.
    """
    dist = policy.distribution(batch['obs'])
    logprobs = masked_sum(dist.log_prob(batch['actions']), batch.get('masks'))
    entropy = dist.entropy().sum(-1).mean()

    ratio = torch.exp(logprobs - batch['logprobs'])
    advantages = batch['advantages']
    surrogate = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * advantages
    policy_loss = -torch.min(surrogate, clipped).mean()

    values = policy.value(batch['obs'])
    if config.clipped_value_loss:
        values_clipped = batch['values'] + torch.clamp(
            values - batch['values'], -config.clip, config.clip)
        value_loss = torch.max((values - batch['returns']) ** 2,
                               (values_clipped - batch['returns']) ** 2).mean()
    else:
        value_loss = ((values - batch['returns']) ** 2).mean()

    loss = policy_loss + config.value_loss_coef * value_loss \
        - config.entropy_coef * entropy
    return loss, {'policy_loss': policy_loss.detach(),
                  'value_loss': value_loss.detach(),
                  'entropy': entropy.detach()}


def _set_lr(optimizer, lr):
    for group in optimizer.param_groups:
        group['lr'] = lr


def ppo_update(policy: PolicyNet, optimizer, buffer: RolloutBuffer,
               config: PpoConfig, value_normalizer: ValueNormalizer = None,
               lr = None, generator: torch.Generator = None):
    """Runs `epochs × minibatches` clipped-surrogate steps on a rollout.

    Advantages must have been computed on the buffer; they are
    normalized to zero mean and unit deviation here. With a value
    normalizer, it is first updated with the rollout's returns and the
    critic regresses normalized targets.

    Returns
    -------
    A dictionary with the mean policy loss, value loss, entropy and
    approximate KL over all minibatches, and the final learning rate.
    """
    if buffer.advantages is None:
        raise ConfigurationError("Compute the buffer's returns before updating.")
    lr = config.lr if lr is None else lr
    dtype = policy.log_std.dtype

    returns = buffer.flat('returns')
    values = buffer.flat('values')
    if value_normalizer is not None:
        value_normalizer.update(returns)
        returns = normalize_values(value_normalizer, returns)
        values = normalize_values(value_normalizer, values)

    def tensor(arr):
        return torch.as_tensor(np.asarray(arr), dtype = dtype)

    data = {'obs': tensor(buffer.flat('obs')),
            'actions': tensor(buffer.flat('actions')),
            'logprobs': tensor(buffer.flat('logprobs')),
            'means': tensor(buffer.flat('means')),
            'stds': tensor(buffer.flat('stds')),
            'masks': tensor(buffer.flat('masks')),
            'advantages': tensor(normalize_advantages(buffer.flat('advantages'))),
            'returns': tensor(returns),
            'values': tensor(values)}

    totals = {'policy_loss': 0.0, 'value_loss': 0.0, 'entropy': 0.0, 'approx_kl': 0.0}
    count = 0
    for _ in range(config.epochs):
        for index in buffer.minibatches(config.minibatches, generator = generator):
            index = torch.as_tensor(index)
            batch = {k: v[index] for k, v in data.items()}

            if config.schedule == 'adaptive':
                with torch.no_grad():
                    dist = policy.distribution(batch['obs'])
                    kl = float(gaussian_kl(batch['means'], batch['stds'],
                                           dist.mean, dist.stddev, batch['masks']))
                lr = adapt_learning_rate(lr, kl, config)
            else:
                kl = float('nan')
            _set_lr(optimizer, lr)

            loss, stats = ppo_loss(policy, batch, config)
            if not torch.isfinite(loss):
                raise TrainingAbortedError(
                    "Encountered a non-finite PPO loss.", diagnostics = {
                        **{k: float(v) for k, v in stats.items()},
                        'approx_kl': kl, 'lr': lr})
            optimizer.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(policy.parameters(), config.max_grad_norm)
            optimizer.step()

            for key, value in stats.items():
                totals[key] += float(value)
            totals['approx_kl'] += kl
            count += 1

    out = {k: v / max(count, 1) for k, v in totals.items()}
    out['lr'] = lr
    return out


class PPOAgent(object):
    """The residual policy with its optimizer and normalizers.

    Parameters
    ----------
    obs_dim, action_dim : int
        Observation and action sizes.
    config : PpoConfig
        The hyperparameters.
    residual_clip : float
        The residual bound (rad), or None to disable clipping.
    seed : int
        Seeds the network initialization and the sampling generator.
    """

    def __init__(self, obs_dim, action_dim, config: PpoConfig = None,
                 residual_clip = RESIDUAL_CLIP, seed = 0):
        self.config = config or PpoConfig()
        self.residual_clip = residual_clip
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.policy = PolicyNet(
                obs_dim, action_dim, hidden = self.config.hidden,
                activation = self.config.activation,
                init_log_std = self.config.init_log_std)
        self.optimizer = torch.optim.Adam(self.policy.parameters(), lr = self.config.lr)
        self.lr = self.config.lr
        self.generator = torch.Generator().manual_seed(int(seed))
        self.obs_normalizer = EmpiricalNormalizer(obs_dim) \
            if self.config.empirical_normalization else None
        self.value_normalizer = ValueNormalizer() \
            if self.config.value_normalization else None

    def __repr__(self):
        return f"<PPOAgent obs={self.policy.obs_dim} actions={self.policy.action_dim}>"

    def normalize(self, obs, update = False):
        if self.obs_normalizer is None:
            return np.asarray(obs, dtype = np.float64)
        return normalize_obs(self.obs_normalizer, obs, update = update)

    def values(self, obs):
        """Un-normalized value estimates of (normalized) observations."""
        with torch.no_grad():
            values = self.policy.value(obs).cpu().numpy().astype(np.float64)
        if self.value_normalizer is not None:
            values = normalize_values(self.value_normalizer, values, denormalize = True)
        return values

    def act(self, obs, base_actions, mode = 'stochastic', update = False,
            mask = None) -> Tuple[ResidualAction, np.ndarray]:
        """Acts on raw observations; returns the action and normalized observations."""
        nobs = self.normalize(obs, update = update)
        act = act_residual(self.policy, nobs, base_actions, mode = mode,
                           generator = self.generator, clip = self.residual_clip,
                           mask = mask)
        if self.value_normalizer is not None:
            act = act._replace(value = normalize_values(
                self.value_normalizer, act.value, denormalize = True))
        return act, nobs

    def update(self, buffer: RolloutBuffer, last_obs):
        last_values = self.values(self.normalize(last_obs))
        buffer.compute_returns(last_values, self.config.gamma, self.config.lam)
        stats = ppo_update(self.policy, self.optimizer, buffer, self.config,
                           value_normalizer = self.value_normalizer,
                           lr = self.lr, generator = self.generator)
        self.lr = stats['lr']
        buffer.clear()
        return stats

    def state_dict(self):
        return {
            'architecture': self.policy.architecture(),
            'policy': self.policy.state_dict(),
            'optimizer': self.optimizer.state_dict(),
            'lr': self.lr,
            'residual_clip': self.residual_clip,
            'generator': self.generator.get_state(),
            'obs_normalizer': None if self.obs_normalizer is None
            else self.obs_normalizer.state_dict(),
            'value_normalizer': None if self.value_normalizer is None
            else self.value_normalizer.state_dict()}

    def load_state_dict(self, contents):
        self.policy.load_state_dict(contents['policy'])
        if contents.get('optimizer') is not None:
            self.optimizer.load_state_dict(contents['optimizer'])
        self.lr = contents['lr']
        self.residual_clip = contents['residual_clip']
        if contents.get('generator') is not None:
            self.generator.set_state(contents['generator'])
        for name in ('obs_normalizer', 'value_normalizer'):
            normalizer = getattr(self, name)
            if normalizer is not None and contents.get(name) is not None:
                normalizer.load_state_dict(contents[name])
