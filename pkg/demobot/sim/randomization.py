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
Randomization of the initial object poses.
"""

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from demobot.framework import Parameters
from demobot.errors import ConfigurationError
from demobot.kinematics.transforms import Pose, quat_multiply, quat_from_axis_angle


@dataclass(repr = False)
class RandomizationSpec(Parameters):
    """Ranges of the initial-pose randomization.

    Parameters
    ----------
    trans_range : float
        Offsets along each table axis are uniform in ±`trans_range` (m).
    rot_range : float
        Yaw offsets are uniform in ±`rot_range` (rad).
    objects : dict
        Per-object enable flags; objects which are not listed are
        randomized.
    """
    trans_range: float = 0.10
    rot_range: float = 0.1
    objects: Optional[dict] = None

    def validate(self):
        if self.trans_range < 0 or self.rot_range < 0:
            raise ConfigurationError(
                f"Randomization ranges must be non-negative, got "
                f"trans_range = {self.trans_range}, rot_range = {self.rot_range}.")

    def enabled(self, name):
        return bool((self.objects or {}).get(name, True))


def randomize_initial_poses(spec: RandomizationSpec, nominal: Mapping[str, Pose],
                            rng: np.random.Generator):
    """Perturbs nominal object poses on the table plane.

    Each object's translation is offset uniformly in ±`trans_range`
    along x and y, and its orientation is yawed uniformly in
    ±`rot_range` about the world z axis. Three values are drawn for
    every object, in the order of `nominal`, whether or not the object
    is enabled, so disabling an object does not shift the others' draws.
    """
    poses = {}
    for name, pose in nominal.items():
        dx, dy = rng.uniform(-spec.trans_range, spec.trans_range, size = 2)
        yaw = rng.uniform(-spec.rot_range, spec.rot_range)
        if not spec.enabled(name) or (spec.trans_range == 0 and spec.rot_range == 0):
            poses[name] = pose
            continue
        rotation = quat_multiply(quat_from_axis_angle((0.0, 0.0, 1.0), yaw), pose.rotation)
        poses[name] = Pose(rotation, pose.translation + np.array([dx, dy, 0.0]))
    return poses
