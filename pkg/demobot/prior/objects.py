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
Task-aware refinement of object pose tracks.

Object pose estimates drift by millimeters to centimeters, which is
enough to make an assembly keyframe physically impossible. At frames
flagged as assembly contact, the peg pose is refined so that its axis
is co-linear with the hole's axis and its tip sits at the hole's entry,
without moving further than a trust region from the tracked pose.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from demobot.framework import Parameters
from demobot.errors import ConfigurationError
from demobot.kinematics.transforms import Pose, rotvec_to_quat, quat_multiply
from demobot.prior.optim import LMParameters, levenberg_marquardt


@dataclass(repr = False)
class PegHoleObjective(Parameters):
    """The peg-in-hole refinement objective.

    Parameters
    ----------
    peg_tip, peg_tail : tuple
        The peg's axis endpoints, in the peg frame (meters).
    hole_entry, hole_exit : tuple
        The hole's axis endpoints, in the base frame (meters). At an
        assembly-contact frame the peg tip should sit at `hole_entry`.
    w_axis : float
        Weight of the axis co-linearity term.
    w_endpoint : float
        Weight of the tip-to-entry distance term (per meter²).
    """
    peg_tip: tuple = (0.0, 0.0, -0.05)
    peg_tail: tuple = (0.0, 0.0, 0.05)
    hole_entry: tuple = (0.0, 0.0, 0.0)
    hole_exit: tuple = (0.0, 0.0, 0.03)
    w_axis: float = 1.0
    w_endpoint: float = 100.0

    def validate(self):
        if self.w_axis < 0 or self.w_endpoint < 0:
            raise ConfigurationError(
                f"Refinement weights must be non-negative, got "
                f"w_axis = {self.w_axis}, w_endpoint = {self.w_endpoint}.")
        if self.w_axis == 0 and self.w_endpoint == 0:
            raise ConfigurationError(
                "At least one refinement weight must be positive.")
        if np.linalg.norm(np.subtract(self.peg_tip, self.peg_tail)) < 1e-9:
            raise ConfigurationError(
                f"The peg axis is degenerate: both endpoints are at "
                f"{list(self.peg_tip)}.")
        if np.linalg.norm(np.subtract(self.hole_entry, self.hole_exit)) < 1e-9:
            raise ConfigurationError(
                f"The hole axis is degenerate: both endpoints are at "
                f"{list(self.hole_entry)}.")

    def residual(self, pose: Pose, base_pose: Pose):
        """Residuals whose squared norm equals `cost(pose, base_pose)`."""
        u_peg = pose.rotation_matrix @ np.subtract(self.peg_tip, self.peg_tail)
        u_peg /= np.linalg.norm(u_peg)
        u_hole = base_pose.rotation_matrix @ np.subtract(self.hole_entry, self.hole_exit)
        u_hole /= np.linalg.norm(u_hole)
        dot = abs(float(u_peg @ u_hole))

        # |u x v|² / (1 + |u.v|) = 1 - |u.v| for unit vectors.
        axis = np.sqrt(self.w_axis) * np.cross(u_peg, u_hole) / np.sqrt(1.0 + dot)
        tip = pose.apply(np.asarray(self.peg_tip, dtype = np.float64))
        entry = base_pose.apply(np.asarray(self.hole_entry, dtype = np.float64))
        return np.concatenate([axis, np.sqrt(self.w_endpoint) * (tip - entry)])

    def cost(self, pose: Pose, base_pose: Pose):
        """`w_axis (1 - |û_peg·û_hole|) + w_endpoint ||p_tip - p_entry||²`."""
        u_peg = pose.rotation_matrix @ np.subtract(self.peg_tip, self.peg_tail)
        u_hole = base_pose.rotation_matrix @ np.subtract(self.hole_entry, self.hole_exit)
        dot = abs(float(u_peg @ u_hole)) / (np.linalg.norm(u_peg) * np.linalg.norm(u_hole))
        tip = pose.apply(np.asarray(self.peg_tip, dtype = np.float64))
        entry = base_pose.apply(np.asarray(self.hole_entry, dtype = np.float64))
        return self.w_axis * (1.0 - min(dot, 1.0)) + \
               self.w_endpoint * float(np.sum((tip - entry) ** 2))

    def axis_alignment(self, pose: Pose, base_pose: Pose):
        """The absolute cosine between the peg and hole axes."""
        u_peg = pose.rotation_matrix @ np.subtract(self.peg_tip, self.peg_tail)
        u_hole = base_pose.rotation_matrix @ np.subtract(self.hole_entry, self.hole_exit)
        return abs(float(u_peg @ u_hole)) / (
                np.linalg.norm(u_peg) * np.linalg.norm(u_hole))


@dataclass
class RefinementResult(object):
    pose: Pose
    cost_before: float
    cost_after: float
    at_trust_boundary: bool = False
    cost_trace: list = field(default_factory = list)


def refine_object_pose(track_pose: Pose, objective: PegHoleObjective,
                       base_pose: Pose, max_translation: float = 0.03,
                       max_rotation: float = 0.2,
                       params: Optional[LMParameters] = None):
    """Refines a tracked peg pose against the peg-in-hole objective.

    The refined pose is `(exp(ω) R_track, t_track + v)`, with the offset
    kept inside the trust region `||v|| <= max_translation` and
    `||ω|| <= max_rotation`. The result flags whether the solution
    lies on the boundary of that region.

    Parameters
    ----------
    track_pose : Pose
        The tracked (noisy) peg pose.
    objective : PegHoleObjective
        The refinement objective.
    base_pose : Pose
        The pose of the base object holding the hole.
    max_translation : float
        The translational trust region (meters).
    max_rotation : float
        The rotational trust region (radians).

    Returns
    -------
    A `RefinementResult`.
    """
    rotation0 = track_pose.rotation
    translation0 = track_pose.translation

    def _pose(x):
        return Pose(quat_multiply(rotvec_to_quat(x[:3]), rotation0),
                    translation0 + x[3:])

    def _residual(x):
        return objective.residual(_pose(x), base_pose)

    def _trust_region(x):
        x = x.copy()
        for sl, limit in ((slice(0, 3), max_rotation),
                          (slice(3, 6), max_translation)):
            norm = np.linalg.norm(x[sl])
            if norm > limit:
                x[sl] *= limit / norm
        return x

    cost_before = objective.cost(track_pose, base_pose)
    result = levenberg_marquardt(
        _residual, np.zeros(6), project = _trust_region,
        params = params or LMParameters(max_iters = 200))
    if result.accepted_steps == 0:
        return RefinementResult(track_pose, cost_before, cost_before,
                                False, result.cost_trace)
    pose = _pose(result.x)
    cost_after = objective.cost(pose, base_pose)
    if cost_after > cost_before:
        return RefinementResult(track_pose, cost_before, cost_before,
                                False, result.cost_trace)
    at_boundary = np.linalg.norm(result.x[3:]) >= max_translation * (1 - 1e-9) or \
                  np.linalg.norm(result.x[:3]) >= max_rotation * (1 - 1e-9)
    return RefinementResult(pose, cost_before, cost_after,
                            bool(at_boundary), result.cost_trace)
