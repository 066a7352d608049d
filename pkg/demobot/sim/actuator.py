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
The randomized actuation model.

Every joint is driven by a PD controller whose gains, position
measurement bias, saturation onset and strength are randomized per
joint at the start of every episode. The commanded torque is clipped
to a velocity-dependent torque-speed envelope:

    τ_des     = α_p K_p (q_des - (q + b)) + α_d K_d (q̇_des - q̇)
    τ_max(ω)  = τ_stall / (1 - ν) · ( 1 - |ω| / ω_max)
    τ_min(ω)  = τ_stall / (1 - ν) · (-1 - |ω| / ω_max)
    τ_applied = γ · clip(τ_des, τ_min(ω), τ_max(ω))
"""

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from demobot.framework import Parameters
from demobot.errors import ConfigurationError

# The uniform range of every randomized quantity.
RANDOMIZATION_RANGES = {
    'alpha_p': (0.9, 1.1),
    'alpha_d': (0.9, 1.1),
    'bias': (-0.1, 0.1),
    'nu': (1.0 / 3.0, 2.0 / 3.0),
    'gamma': (0.9, 1.1),
}

TORQUE_MODES = ('literal', 'stall_clamp')


@dataclass(repr = False)
class ActuatorTemplate(Parameters):
    """The nominal actuator of one class of joints.

    Parameters
    ----------
    kp : float
        Proportional gain (N·m/rad).
    kd : float
        Derivative gain (N·m·s/rad).
    tau_stall : float
        Stall torque (N·m).
    omega_max : float
        No-load speed (rad/s).
    """
    kp: float = 40.0
    kd: float = 3.0
    tau_stall: float = 20.0
    omega_max: float = 6.0

    def validate(self):
        if self.kp < 0 or self.kd < 0:
            raise ConfigurationError(
                f"Actuator gains must be non-negative, got "
                f"kp = {self.kp}, kd = {self.kd}.")
        if self.tau_stall <= 0 or self.omega_max <= 0:
            raise ConfigurationError(
                f"The stall torque and no-load speed must be positive, got "
                f"tau_stall = {self.tau_stall}, omega_max = {self.omega_max}.")


@dataclass
class ActuatorParams(object):
    """Per-joint actuator parameters, as arrays of equal length.

    The randomized quantities are the gain multipliers `alpha_p` and
    `alpha_d`, the position-measurement bias `bias` (rad), the
    saturation-onset fraction `nu` and the strength multiplier `gamma`.
    """
    kp: np.ndarray
    kd: np.ndarray
    alpha_p: np.ndarray
    alpha_d: np.ndarray
    bias: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    tau_stall: np.ndarray
    omega_max: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(getattr(self, f.name), dtype = np.float64))
                  for f in fields(self)]
        size = max(len(a) for a in arrays)
        for f, arr in zip(fields(self), arrays):
            if len(arr) == 1 and size > 1:
                arr = np.full(size, arr[0])
            elif len(arr) != size:
                raise ConfigurationError(
                    f"Actuator parameter '{f.name}' has {len(arr)} entries, "
                    f"expected {size}.")
            setattr(self, f.name, arr)
        self.validate()

    def validate(self):
        for name, (lo, hi) in RANDOMIZATION_RANGES.items():
            value = getattr(self, name)
            if np.any(value < lo - 1e-12) or np.any(value > hi + 1e-12):
                raise ConfigurationError(
                    f"Actuator parameter '{name}' must lie in "
                    f"[{lo:.4f}, {hi:.4f}], got {value.tolist()}.")
        if np.any(self.tau_stall <= 0) or np.any(self.omega_max <= 0):
            raise ConfigurationError(
                "The stall torque and no-load speed must be positive.")

    def __len__(self):
        return len(self.kp)

    @classmethod
    def nominal(cls, template: ActuatorTemplate, num_joints = 1):
        """Un-randomized parameters (unit multipliers, no bias, ν = 1/2)."""
        ones = np.ones(num_joints)
        return cls(template.kp * ones, template.kd * ones, ones, ones,
                   np.zeros(num_joints), 0.5 * ones, ones,
                   template.tau_stall * ones, template.omega_max * ones)

    @classmethod
    def concatenate(cls, params: Sequence['ActuatorParams']):
        return cls(**{f.name: np.concatenate([getattr(p, f.name) for p in params])
                      for f in fields(cls)})

    def copy(self):
        return ActuatorParams(**{f.name: getattr(self, f.name).copy()
                                 for f in fields(self)})

    def __eq__(self, other):
        if not isinstance(other, ActuatorParams):
            return NotImplemented
        return all(np.array_equal(getattr(self, f.name), getattr(other, f.name))
                   for f in fields(self))


def torque_envelope(params: ActuatorParams, omega):
    """Returns `(τ_min(ω), τ_max(ω))` for joint velocities `omega`."""
    scale = params.tau_stall / (1.0 - params.nu)
    speed = np.abs(omega) / params.omega_max
    return scale * (-1.0 - speed), scale * (1.0 - speed)


def compute_joint_torque(params: ActuatorParams, q_des, q, qd, qd_des = 0.0,
                         mode = 'literal'):
    """Torque applied by each actuator for a position target.

    Parameters
    ----------
    params : ActuatorParams
        The (randomized) per-joint actuator parameters.
    q_des, q : np.ndarray
        Target and measured joint positions (rad). The measurement is
        offset by the actuator's bias before the PD law is applied.
    qd, qd_des : np.ndarray
        Measured and target joint velocities (rad/s).
    mode : str
        `literal` clips to the torque-speed envelope only. `stall_clamp`
        additionally bounds |τ| by τ_stall while |ω| < ν ω_max.

    Returns
    -------
    The applied torques (N·m).
    """
    if mode not in TORQUE_MODES:
        raise ConfigurationError(
            f"Unknown torque mode '{mode}', expected one of {TORQUE_MODES}.")
    q_des = np.asarray(q_des, dtype = np.float64)
    q = np.asarray(q, dtype = np.float64)
    qd = np.asarray(qd, dtype = np.float64)
    tau_des = params.alpha_p * params.kp * (q_des - (q + params.bias)) + \
              params.alpha_d * params.kd * (qd_des - qd)
    tau_min, tau_max = torque_envelope(params, qd)
    if mode == 'stall_clamp':
        stalled = np.abs(qd) < params.nu * params.omega_max
        tau_min = np.where(stalled, np.maximum(tau_min, -params.tau_stall), tau_min)
        tau_max = np.where(stalled, np.minimum(tau_max, params.tau_stall), tau_max)
    return params.gamma * np.clip(tau_des, tau_min, tau_max)


def sample_actuator_params(template: ActuatorParams, rng: np.random.Generator):
    """Draws the randomized quantities independently for every joint.

    `alpha_p`, `alpha_d`, `bias`, `nu` and `gamma` are each drawn
    uniformly over their range, in that order, one value per joint; the
    gains, stall torque and no-load speed are kept from `template`.
    """
    n = len(template)
    draws = {name: rng.uniform(lo, hi, size = n)
             for name, (lo, hi) in RANDOMIZATION_RANGES.items()}
    return ActuatorParams(
        kp = template.kp.copy(), kd = template.kd.copy(),
        tau_stall = template.tau_stall.copy(),
        omega_max = template.omega_max.copy(), **draws)
