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
Running normalizers for observations and value targets.

Both normalizers keep float64 running statistics, merged batch by batch
with the parallel (Chan et al.) variance update, so the statistics
stay accurate over long streams.
"""

import numpy as np
import torch

from demobot.framework import DemoBotSerializable
from demobot.errors import ContractViolationError


class _RunningMoments(DemoBotSerializable):
    """Running mean and (population) variance of a stream of vectors."""
    serializable = frozenset(('mean', 'var', 'count'))

    def __init__(self, shape):
        self._mean = np.zeros(shape, dtype = np.float64)
        self._var = np.ones(shape, dtype = np.float64)
        self._count = 0

    @property
    def mean(self):
        return self._mean

    @property
    def var(self):
        return self._var

    @property
    def count(self):
        return self._count

    def update(self, batch):
        batch = np.asarray(batch, dtype = np.float64).reshape(-1, *self._mean.shape)
        if not np.all(np.isfinite(batch)):
            raise ContractViolationError(
                "Cannot update running statistics with non-finite values.")
        n = batch.shape[0]
        if n == 0:
            return
        batch_mean = batch.mean(axis = 0)
        batch_var = batch.var(axis = 0)
        if self._count == 0:
            self._mean, self._var, self._count = batch_mean, batch_var, n
            return
        total = self._count + n
        delta = batch_mean - self._mean
        m2 = self._var * self._count + batch_var * n \
            + delta ** 2 * self._count * n / total
        self._mean = self._mean + delta * n / total
        self._var = m2 / total
        self._count = total

    def state_dict(self):
        return {'mean': self._mean.tolist(), 'var': self._var.tolist(),
                'count': int(self._count)}

    def load_state_dict(self, contents):
        mean = np.asarray(contents['mean'], dtype = np.float64)
        if mean.shape != self._mean.shape:
            raise ContractViolationError(
                f"Expected statistics of shape {self._mean.shape}, "
                f"got {mean.shape}.")
        self._mean = mean
        self._var = np.asarray(contents['var'], dtype = np.float64)
        self._count = int(contents['count'])


class EmpiricalNormalizer(_RunningMoments):
    """Normalizes observations by their running mean and variance.

    Outputs are `(obs - mean) / sqrt(var + eps)`, clipped to `±clip`.
    Statistics are only updated when asked to, which the trainer does
    while collecting rollouts; evaluation uses frozen statistics.

    Parameters
    ----------
    shape : int or tuple
        The shape of a single observation.
    eps : float
        Added to the variance before taking its root.
    clip : float
        The bound on normalized values.
    """
    serializable = frozenset(('mean', 'var', 'count', 'eps', 'clip'))

    def __init__(self, shape, eps = 1e-8, clip = 10.0):
        super(EmpiricalNormalizer, self).__init__(shape)
        self._eps = eps
        self._clip = clip

    def __repr__(self):
        return f"<EmpiricalNormalizer shape={self._mean.shape} count={self._count}>"

    def __call__(self, obs, update = False):
        return normalize_obs(self, obs, update = update)

    def normalize(self, obs):
        obs = np.asarray(obs, dtype = np.float64)
        out = (obs - self._mean) / np.sqrt(self._var + self._eps)
        return np.clip(out, -self._clip, self._clip)


class ValueNormalizer(_RunningMoments):
    """Scales value targets by the running statistics of the returns.

    The value network regresses normalized returns; its predictions are
    de-normalized before they enter advantage estimation. Before any
    update, the normalizer is the identity.
    """
    serializable = frozenset(('mean', 'var', 'count', 'eps'))

    def __init__(self, eps = 1e-8):
        super(ValueNormalizer, self).__init__(())
        self._eps = eps

    def __repr__(self):
        return f"<ValueNormalizer mean={float(self._mean):.4g} " \
               f"std={float(self.std):.4g}>"

    @property
    def std(self):
        return np.maximum(np.sqrt(self._var), self._eps)

    def normalize(self, values):
        if isinstance(values, torch.Tensor):
            return (values - float(self._mean)) / float(self.std)
        return (np.asarray(values, dtype = np.float64) - self._mean) / self.std

    def denormalize(self, values):
        if isinstance(values, torch.Tensor):
            return values * float(self.std) + float(self._mean)
        return np.asarray(values, dtype = np.float64) * self.std + self._mean


def normalize_obs(normalizer: EmpiricalNormalizer, obs, update = False):
    """Normalizes a (batch of) observation(s), optionally updating first.

    With `update = False` the call is pure. The very first observation
    normalizes to zero, since it becomes the running mean.
    """
    if update:
        normalizer.update(obs)
    return normalizer.normalize(obs)


def normalize_values(normalizer: ValueNormalizer, values, denormalize = False,
                     update = False):
    """Normalizes value targets (or de-normalizes value predictions)."""
    if update:
        normalizer.update(np.asarray(values, dtype = np.float64).reshape(-1))
    if denormalize:
        return normalizer.denormalize(values)
    return normalizer.normalize(values)
