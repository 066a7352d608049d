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
Retargeting of human hand keypoints onto a robot hand.

The robot hand is treated as a floating base (its root pose) plus its
finger joints. Both are solved together so that the robot's frames,
matched through the chain's `correspondence` map, land on the human
keypoints.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from demobot.errors import ConfigurationError, ContractViolationError
from demobot.kinematics.chain import KinematicChain, JointConfig, keypoint_jacobians
from demobot.kinematics.transforms import (
    Pose, skew, quat_multiply, rotvec_to_quat, quat_to_rotvec
)
from demobot.prior.optim import LMParameters, levenberg_marquardt


@dataclass
class RetargetResult(object):
    q: JointConfig
    base: Pose
    residual: float
    cost_trace: list = field(default_factory = list)
    iterations: int = 0


class RetargetObjective(object):
    """The keypoint-matching least-squares problem for one frame.

    The parameter vector is `[q, ω, t]`, with the base rotation stored
    as a rotation vector and perturbed on the left (in the world frame).
    """

    def __init__(self, robot_hand: KinematicChain, targets):
        correspondence = robot_hand.correspondence
        if not correspondence:
            raise ConfigurationError(
                f"Chain '{robot_hand.name}' declares no keypoint "
                f"correspondence, so it cannot be retargeted to.")
        targets = np.asarray(targets, dtype = np.float64)
        if targets.shape != (len(correspondence), 3):
            raise ContractViolationError(
                f"Chain '{robot_hand.name}' matches {len(correspondence)} "
                f"keypoints, but targets of shape {targets.shape} were given.")
        self.chain = robot_hand
        self.frames = list(correspondence)
        self.targets = targets
        self.lower, self.upper = robot_hand.limits
        self.n = robot_hand.num_joints

    def pack(self, q, base: Pose):
        return np.concatenate([self.chain.as_values(q), base.rotvec, base.translation])

    def unpack(self, x):
        return x[:self.n], Pose.from_rotvec(x[self.n:self.n + 3], x[self.n + 3:])

    def residual(self, x):
        q, base = self.unpack(x)
        positions, _ = keypoint_jacobians(self.chain, q, base, self.frames)
        return (positions - self.targets).reshape(-1)

    def jacobian(self, x):
        q, base = self.unpack(x)
        positions, jacs = keypoint_jacobians(self.chain, q, base, self.frames)
        rows = []
        for position, jac in zip(positions, jacs):
            rows.append(np.hstack([jac, -skew(position - base.translation), np.eye(3)]))
        return np.vstack(rows)

    def retract(self, x, delta):
        out = x + delta
        n = self.n
        quat = quat_multiply(rotvec_to_quat(delta[n:n + 3]), rotvec_to_quat(x[n:n + 3]))
        out[n:n + 3] = quat_to_rotvec(quat)
        return out

    def project(self, x):
        x = x.copy()
        x[:self.n] = np.clip(x[:self.n], self.lower, self.upper)
        return x

    def rms(self, x):
        residual = self.residual(x).reshape(-1, 3)
        return float(np.sqrt(np.mean(np.sum(residual ** 2, axis = 1))))


def retarget_hand(hand_joints_3d, robot_hand: KinematicChain, q_init,
                  p_init: Pose, params: Optional[LMParameters] = None):
    """Fits the robot hand's joints and base pose to human hand keypoints.

    Parameters
    ----------
    hand_joints_3d : np.ndarray
        The `(K, 3)` world-frame human hand keypoints.
    robot_hand : KinematicChain
        The robot hand, with a `correspondence` map of `K` frames.
    q_init : JointConfig or array-like
        The initial finger joints (the previous frame's solution).
    p_init : Pose
        The initial base pose (the previous frame's solution).

    Returns
    -------
    A `RetargetResult`, whose `residual` is the RMS keypoint distance (m).
    """
    objective = RetargetObjective(robot_hand, hand_joints_3d)
    q0, _ = robot_hand.clamp(q_init)
    x0 = objective.pack(q0, p_init)
    result = levenberg_marquardt(
        objective.residual, x0, jacobian_fn = objective.jacobian,
        retract = objective.retract, project = objective.project,
        params = params or LMParameters(max_iters = 100))
    if result.accepted_steps == 0:
        q, base, x = q0, p_init, x0
    else:
        x = result.x
        q, base = objective.unpack(x)
    return RetargetResult(robot_hand.config(q), base, objective.rms(x),
                          result.cost_trace, result.iterations)
