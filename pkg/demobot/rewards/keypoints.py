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
Object keypoints and goal distances.

Axis-symmetric objects are represented by three points on their
principal axis (both endpoints and the midpoint), so rotating them
about that axis does not change their keypoints. Other objects are
represented by the eight corners of their oriented bounding box.
"""

from typing import TYPE_CHECKING

import numpy as np

from demobot.errors import ContractViolationError
from demobot.kinematics.transforms import Pose

if TYPE_CHECKING:
    from demobot.sim.objects import ObjectSpec

# Corner signs of a box, in a fixed order.
_CORNERS = np.array([[sx, sy, sz] for sx in (-1.0, 1.0)
                     for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)])


def body_keypoints(spec: 'ObjectSpec'):
    """The object's keypoints in its body frame."""
    extents = spec.box_extents
    if spec.symmetric:
        half = extents[2]
        return np.array([[0.0, 0.0, -half], [0.0, 0.0, 0.0], [0.0, 0.0, half]])
    return _CORNERS * extents


def object_keypoints(spec: 'ObjectSpec', pose: Pose):
    """The object's world-frame keypoints at `pose`."""
    return pose.apply(body_keypoints(spec))


def goal_distance(keypoints, goal_keypoints):
    """Mean Euclidean distance between corresponding keypoints."""
    keypoints = np.asarray(keypoints, dtype = np.float64)
    goal_keypoints = np.asarray(goal_keypoints, dtype = np.float64)
    if keypoints.shape != goal_keypoints.shape:
        raise ContractViolationError(
            f"Cannot compare {keypoints.shape[0]} object keypoints "
            f"with {goal_keypoints.shape[0]} goal keypoints.")
    return float(np.mean(np.linalg.norm(keypoints - goal_keypoints, axis = -1)))


def check_stage_success(keypoints, goal_keypoints, delta_goal):
    """Whether the object is within `delta_goal` of its goal."""
    return goal_distance(keypoints, goal_keypoints) < delta_goal
