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
The full-body robot: one arm per hand, each carrying a robot hand.

Full-body joint vectors are laid out as `[arm_left, hand_left,
arm_right, hand_right]`, keeping only the sides which are present.
The robot hand's root frame is rigidly attached to the arm's end
effector (its `hand_mount` frame).
"""

from dataclasses import dataclass

import numpy as np

from demobot.errors import ConfigurationError, ContractViolationError
from demobot.kinematics.chain import KinematicChain, load_chain
from demobot.kinematics.transforms import Pose

SIDES = ('left', 'right')

# The world position of each arm's base, for the default desk layout.
DEFAULT_MOUNTS = {'left': (0.0, 0.35, 0.0), 'right': (0.0, -0.35, 0.0)}


@dataclass(frozen = True)
class RobotSide(object):
    side: str
    arm: KinematicChain
    hand: KinematicChain
    mount: Pose

    @property
    def home(self):
        """The arm's home configuration followed by the open hand."""
        arm_home = self.arm.extra.get('home', None)
        arm = self.arm.zero_config().values if arm_home is None \
            else self.arm.as_values(arm_home)
        return np.concatenate([arm, self.hand.zero_config().values])

    @property
    def shoulder(self):
        """World position of the arm's shoulder (its second keypoint)."""
        frame = self.arm.keypoints[1] if len(self.arm.keypoints) > 1 else self.arm.root
        mats, _, _ = self.arm.frame_matrices(
            self.arm.zero_config().values, self.mount)
        return mats[self.arm.frame_index(frame), :3, 3].copy()

    @property
    def reach(self):
        return float(self.arm.extra.get('reach', np.inf))


class RobotModel(object):
    """A bimanual (or single-arm) robot assembled from kinematic chains.

    Parameters
    ----------
    sides : list of RobotSide
        The arm-and-hand assemblies, at most one per side.
    """

    def __init__(self, sides):
        sides = list(sides)
        if not sides:
            raise ConfigurationError("A robot needs at least one arm.")
        names = [s.side for s in sides]
        for name in names:
            if name not in SIDES:
                raise ConfigurationError(
                    f"Unknown robot side '{name}', expected one of {SIDES}.")
        if len(set(names)) != len(names):
            raise ConfigurationError(f"Duplicate robot sides in {names}.")
        self._sides = {s.side: s for s in sorted(sides, key = lambda s: SIDES.index(s.side))}

        self._slices, start = {}, 0
        for name, s in self._sides.items():
            arm = slice(start, start + s.arm.num_joints)
            hand = slice(arm.stop, arm.stop + s.hand.num_joints)
            self._slices[name] = (arm, hand)
            start = hand.stop
        self._num_joints = start

        lower, upper, fingers = [], [], []
        for s in self._sides.values():
            for chain, is_hand in ((s.arm, False), (s.hand, True)):
                lo, hi = chain.limits
                lower.append(lo)
                upper.append(hi)
                fingers.append(chain.finger_mask if is_hand
                               else np.zeros(chain.num_joints, dtype = bool))
        self._lower = np.concatenate(lower)
        self._upper = np.concatenate(upper)
        self._finger_mask = np.concatenate(fingers)
        for arr in (self._lower, self._upper, self._finger_mask):
            arr.setflags(write = False)

    @classmethod
    def load(cls, sides = SIDES, arm = 'arm', hand = 'robot_hand', mounts = None):
        """Builds a robot from chain files; left hands are mirrored."""
        mounts = dict(DEFAULT_MOUNTS, **(mounts or {}))
        assemblies = []
        for side in sides:
            if side not in SIDES:
                raise ConfigurationError(
                    f"Unknown robot side '{side}', expected one of {SIDES}.")
            mount = mounts[side]
            if not isinstance(mount, Pose):
                mount = Pose.from_translation(mount)
            assemblies.append(RobotSide(
                side, load_chain(arm, name = f'arm_{side}'),
                load_chain(hand, mirror = side == 'left', name = f'robot_hand_{side}'),
                mount))
        return cls(assemblies)

    def __repr__(self):
        return f"<RobotModel {list(self._sides)}: {self._num_joints} joints>"

    @property
    def sides(self):
        return tuple(self._sides)

    def side(self, name) -> RobotSide:
        if name not in self._sides:
            raise ConfigurationError(
                f"The robot has no '{name}' side, only {list(self._sides)}.")
        return self._sides[name]

    @property
    def num_joints(self):
        return self._num_joints

    @property
    def limits(self):
        return self._lower, self._upper

    @property
    def finger_mask(self):
        """Boolean mask of finger joints in the full-body vector."""
        return self._finger_mask

    @property
    def joint_names(self):
        names = []
        for name, s in self._sides.items():
            names.extend(f'{name}/{j}' for j in s.arm.joint_names)
            names.extend(f'{name}/{j}' for j in s.hand.joint_names)
        return names

    def slices(self, side):
        """The `(arm, hand)` slices of `side` in the full-body vector."""
        self.side(side)
        return self._slices[side]

    def home(self):
        return np.concatenate([s.home for s in self._sides.values()])

    def assemble(self, parts):
        """Concatenates a mapping of side to `(arm values, hand values)`."""
        values = np.empty(self._num_joints)
        for name, (arm, hand) in self._slices.items():
            if name not in parts:
                raise ContractViolationError(
                    f"Missing joint values for the '{name}' side.")
            q_arm, q_hand = parts[name]
            values[arm] = self._sides[name].arm.as_values(q_arm)
            values[hand] = self._sides[name].hand.as_values(q_hand)
        return values

    def split(self, values):
        """The inverse of `assemble`."""
        values = self._check(values)
        return {name: (values[arm].copy(), values[hand].copy())
                for name, (arm, hand) in self._slices.items()}

    def _check(self, values):
        values = np.asarray(values, dtype = np.float64).reshape(-1)
        if values.shape[0] != self._num_joints:
            raise ContractViolationError(
                f"The robot has {self._num_joints} joints, but a vector "
                f"of length {values.shape[0]} was given.")
        return values

    def hand_base(self, side, values):
        """World pose of the robot hand's root frame."""
        values = self._check(values)
        s = self._sides[side]
        arm, _ = self._slices[side]
        mats, _, _ = s.arm.frame_matrices(values[arm], s.mount)
        return Pose.from_matrix(mats[s.arm.frame_index(s.arm.end_effector)])

    def hand_frames(self, side, values, frames):
        """World positions of frames of the robot hand on `side`."""
        values = self._check(values)
        s = self._sides[side]
        _, hand = self._slices[side]
        mats, _, _ = s.hand.frame_matrices(values[hand], self.hand_base(side, values))
        return mats[[s.hand.frame_index(f) for f in frames], :3, 3].copy()

    def grasp_frame(self, side, values):
        """World pose of the hand's end effector (its grasp site)."""
        values = self._check(values)
        s = self._sides[side]
        _, hand = self._slices[side]
        mats, _, _ = s.hand.frame_matrices(values[hand], self.hand_base(side, values))
        return Pose.from_matrix(mats[s.hand.frame_index(s.hand.end_effector)])

    def closure(self, side, values):
        """Mean finger joint angle of the hand on `side` (radians)."""
        values = self._check(values)
        s = self._sides[side]
        _, hand = self._slices[side]
        mask = s.hand.finger_mask
        if not mask.any():
            return 0.0
        return float(np.mean(values[hand][mask]))
