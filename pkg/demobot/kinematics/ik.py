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

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from demobot.framework import Parameters
from demobot.errors import ConfigurationError
from demobot.kinematics.chain import KinematicChain, JointConfig, _jacobian_from
from demobot.kinematics.transforms import (
    Pose, matrix_to_quat, rotation_error
)


@dataclass(repr = False)
class IKParameters(Parameters):
    """Parameters of the damped least-squares inverse kinematics solver.

    Parameters
    ----------
    damping : float
        The damping factor λ in `(JᵀJ + λ²I)⁻¹Jᵀe`.
    max_iters : int
        The maximum number of iterations.
    position_tol : float
        Converged position error (meters).
    orientation_tol : float
        Converged orientation (geodesic) error (radians).
    max_backtracks : int
        How many times a step which increases the error is halved
        before the solver stops early.
    """
    damping: float = 1e-2
    max_iters: int = 200
    position_tol: float = 1e-5
    orientation_tol: float = 1e-4
    max_backtracks: int = 8

    def validate(self):
        if self.damping < 0:
            raise ConfigurationError(
                f"IK damping must be non-negative, got {self.damping}.")
        if self.max_iters < 0 or self.max_backtracks < 0:
            raise ConfigurationError(
                "IK iteration counts must be non-negative.")
        if self.position_tol <= 0 or self.orientation_tol <= 0:
            raise ConfigurationError("IK tolerances must be positive.")


@dataclass
class IKResult(object):
    """The result of `solve_ik`.

    `residual` is `(position error m, orientation error rad)`, and
    `trace` holds the combined error norm after each iteration.
    """
    q: JointConfig
    position_error: float
    orientation_error: float
    converged: bool
    iterations: int
    trace: List[float] = field(default_factory = list)

    @property
    def residual(self):
        return self.position_error, self.orientation_error


def _pose_error(mat, target):
    position = target.translation - mat[:3, 3]
    orientation = rotation_error(matrix_to_quat(mat[:3, :3]), target.rotation)
    return np.concatenate([position, orientation])


def solve_ik(chain: KinematicChain, target: Pose, q_init,
             params: Optional[IKParameters] = None,
             frame: Optional[str] = None, base: Optional[Pose] = None):
    """Damped least-squares inverse kinematics for a single frame.

    Iterates `q ← clamp(q + (JᵀJ + λ²I)⁻¹Jᵀe)`, where `e` stacks the
    position error and the world-frame rotation-vector orientation error
    of `frame` (by default the chain's end effector). A step which would
    increase the error is halved up to `max_backtracks` times, and the
    solver stops once no shorter step helps, so the error never grows.

    Reaching `max_iters` is not an error: the result then reports
    `converged = False` alongside the best configuration found.

    Parameters
    ----------
    chain : KinematicChain
        The chain to solve for.
    target : Pose
        The desired world pose of `frame`.
    q_init : JointConfig or array-like
        The initial configuration (clamped into the joint limits).
    params : IKParameters
        Solver parameters (defaults if `None`).
    frame : str
        The frame to place at `target`.
    base : Pose
        The world pose of the chain's root.

    Returns
    -------
    An `IKResult`.
    """
    params = params or IKParameters()
    frame = chain.end_effector if frame is None else frame
    index = chain.frame_index(frame)
    mask = chain.ancestors(frame)
    lower, upper = chain.limits

    q, _ = chain.clamp(q_init)
    mats, origins, axes = chain.frame_matrices(q, base)
    error = _pose_error(mats[index], target)
    norm = float(np.linalg.norm(error))
    eye = np.eye(chain.num_joints)
    trace, iterations = [], 0

    def _converged(err):
        return np.linalg.norm(err[:3]) < params.position_tol and \
               np.linalg.norm(err[3:]) < params.orientation_tol

    while iterations < params.max_iters and not _converged(error):
        jac = _jacobian_from(mats[index, :3, 3], origins, axes, mask)
        step = np.linalg.solve(
            jac.T @ jac + params.damping ** 2 * eye, jac.T @ error)

        # Only accept steps which do not increase the error.
        scale, accepted = 1.0, False
        for _ in range(params.max_backtracks + 1):
            candidate = np.clip(q + scale * step, lower, upper)
            c_mats, c_origins, c_axes = chain.frame_matrices(candidate, base)
            c_error = _pose_error(c_mats[index], target)
            c_norm = float(np.linalg.norm(c_error))
            if c_norm <= norm:
                accepted = True
                break
            scale *= 0.5
        iterations += 1
        if not accepted:
            break
        stalled = norm - c_norm <= 1e-15
        q, mats, origins, axes = candidate, c_mats, c_origins, c_axes
        error, norm = c_error, c_norm
        trace.append(norm)
        if stalled:
            break

    return IKResult(
        q = JointConfig(q, chain.name),
        position_error = float(np.linalg.norm(error[:3])),
        orientation_error = float(np.linalg.norm(error[3:])),
        converged = bool(_converged(error)),
        iterations = iterations, trace = trace)
