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
Serial and tree-structured revolute kinematic chains.

A chain is loaded from a declarative YAML file with one record per
joint, in the following format:

    name: arm
    root: base
    end_effector: hand_mount
    joints:
      - name: shoulder_yaw
        parent: base
        axis: [0, 0, 1]
        offset_translation: [0.0, 0.0, 0.1]
        offset_rotation_quat: [1, 0, 0, 0]
        limits: [-3.1, 3.1]
    frames:
      - name: hand_mount
        parent: wrist_roll
        offset_translation: [0.0, 0.0, 0.08]
        offset_rotation_quat: [1, 0, 0, 0]
    keypoints: [base, elbow, hand_mount]

Every joint defines a frame with the joint's name, whose pose is the
parent frame's pose, composed with the fixed offset, composed with the
rotation by the joint angle about `axis`. Fixed `frames` carry no joint.
"""

from dataclasses import dataclass
from typing import Sequence, Optional

import numpy as np

from demobot.errors import ConfigurationError, ContractViolationError
from demobot.kinematics.transforms import Pose, axis_rotation_matrix
from demobot.utils.data import load_yaml, maybe_you_meant


@dataclass(frozen = True)
class JointConfig(object):
    """Joint positions (radians) for a named chain."""
    values: np.ndarray
    chain: str

    def __post_init__(self):
        values = np.array(self.values, dtype = np.float64).reshape(-1)
        values.setflags(write = False)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen = True)
class JointSpec(object):
    name: str
    parent: str
    axis: tuple
    offset: Pose
    limits: tuple


@dataclass(frozen = True)
class FrameSpec(object):
    name: str
    parent: str
    offset: Pose


class FramePoses(dict):
    """A mapping of frame name to `Pose`, as returned by forward kinematics.

    The `clamped` attribute is a boolean array flagging joints whose
    requested values were outside of their limits and were clamped.
    """
    clamped: np.ndarray

    def __init__(self, *args, clamped = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.clamped = clamped

    @property
    def any_clamped(self):
        return bool(np.any(self.clamped))


class KinematicChain(object):
    """A revolute kinematic tree with named frames.

    Chains are immutable once constructed: all internal arrays are
    read-only, so a single chain can be shared by any number of
    environments and worker threads.

    Parameters
    ----------
    name : str
        The chain's identifier, used to check `JointConfig`s.
    root : str
        The name of the root frame.
    joints : list of JointSpec
        The revolute joints of the chain.
    frames : list of FrameSpec
        Fixed (non-actuated) frames, such as fingertips.
    keypoints : list of str
        The frames whose positions `joint_positions_3d` returns.
    end_effector : str
        The default frame for inverse kinematics.
    correspondence : list of str
        For robot hands, the robot frame matched to each hand-model
        keypoint during retargeting (in hand-model keypoint order).
    finger_joints : list of str
        Joints whose mean angle measures the closure of a hand.
    """

    def __init__(self, name, root, joints, frames = (), keypoints = (),
                 end_effector = None, correspondence = None,
                 finger_joints = None, extra = None):
        self._name = name
        self._root = root
        self._joints = tuple(joints)
        self._fixed = tuple(frames)
        self._extra = dict(extra or {})
        self._build_tree()

        # Validate the named frame lists.
        self._keypoints = tuple(keypoints)
        for frame in self._keypoints:
            self._check_frame(frame, 'keypoint frame')
        if end_effector is None:
            end_effector = self._frame_names[-1]
        self._check_frame(end_effector, 'end-effector frame')
        self._end_effector = end_effector
        self._correspondence = None
        if correspondence is not None:
            self._correspondence = tuple(correspondence)
            for frame in self._correspondence:
                self._check_frame(frame, 'correspondence frame')
        finger_joints = tuple(finger_joints or ())
        for joint in finger_joints:
            if joint not in self._joint_index:
                raise ConfigurationError(maybe_you_meant(
                    joint, f"Unknown finger joint '{joint}' in "
                           f"chain '{name}'.", self._joint_index))
        self._finger_joints = finger_joints
        self._finger_mask = np.array(
            [j.name in finger_joints for j in self._joints], dtype = bool)
        self._finger_mask.setflags(write = False)

    def _build_tree(self):
        records = [(j.name, j.parent, j) for j in self._joints] + \
                  [(f.name, f.parent, f) for f in self._fixed]
        names = [self._root] + [r[0] for r in records]
        duplicates = {n for n in names if names.count(n) > 1}
        if duplicates:
            raise ConfigurationError(
                f"Duplicate frame names {sorted(duplicates)} in "
                f"chain '{self._name}'.")

        # Order the frames so that every parent precedes its children.
        ordered, placed, pending = [], {self._root}, list(records)
        while pending:
            remaining = [r for r in pending if r[1] not in placed]
            ready = [r for r in pending if r[1] in placed]
            if not ready:
                known = set(names)
                bad = [r for r in remaining if r[1] not in known]
                if bad:
                    raise ConfigurationError(maybe_you_meant(
                        bad[0][1], f"Frame '{bad[0][0]}' of chain "
                                   f"'{self._name}' has unknown parent "
                                   f"'{bad[0][1]}'.", known))
                raise ConfigurationError(
                    f"The frames {[r[0] for r in remaining]} of chain "
                    f"'{self._name}' do not form a tree.")
            for r in ready:
                ordered.append(r)
                placed.add(r[0])
            pending = remaining

        self._frame_names = [self._root] + [r[0] for r in ordered]
        self._frame_index = {n: i for i, n in enumerate(self._frame_names)}
        self._joint_index = {j.name: i for i, j in enumerate(self._joints)}

        n_frames, n_joints = len(self._frame_names), len(self._joints)
        self._parents = np.full(n_frames, -1, dtype = int)
        self._offsets = np.tile(np.eye(4), (n_frames, 1, 1))
        self._frame_joint = np.full(n_frames, -1, dtype = int)
        self._joint_frame = np.zeros(n_joints, dtype = int)
        self._axes = np.zeros((n_joints, 3))
        self._lower = np.zeros(n_joints)
        self._upper = np.zeros(n_joints)
        for i, (name, parent, spec) in enumerate(ordered, start = 1):
            self._parents[i] = self._frame_index[parent]
            self._offsets[i] = spec.offset.as_matrix()
            if isinstance(spec, JointSpec):
                j = self._joint_index[name]
                self._frame_joint[i] = j
                self._joint_frame[j] = i
                self._axes[j] = spec.axis
                self._lower[j], self._upper[j] = spec.limits

        # The joints on the path from the root to every frame.
        self._ancestors = np.zeros((n_frames, n_joints), dtype = bool)
        for i in range(1, n_frames):
            self._ancestors[i] = self._ancestors[self._parents[i]]
            if self._frame_joint[i] >= 0:
                self._ancestors[i, self._frame_joint[i]] = True

        for arr in (self._parents, self._offsets, self._frame_joint,
                    self._joint_frame, self._axes, self._lower,
                    self._upper, self._ancestors):
            arr.setflags(write = False)

    def _check_frame(self, frame, kind = 'frame'):
        if frame not in self._frame_index:
            raise ConfigurationError(maybe_you_meant(
                frame, f"Unknown {kind} '{frame}' in chain "
                       f"'{self._name}'.", self._frame_names))

    def __repr__(self):
        return f"<KinematicChain {self._name}: {self.num_joints} " \
               f"joints, {len(self._frame_names)} frames>"

    @property
    def name(self):
        return self._name

    @property
    def root(self):
        return self._root

    @property
    def joints(self):
        return self._joints

    @property
    def joint_names(self):
        return [j.name for j in self._joints]

    @property
    def num_joints(self):
        return len(self._joints)

    @property
    def frame_names(self):
        return list(self._frame_names)

    @property
    def keypoints(self):
        return self._keypoints

    @property
    def end_effector(self):
        return self._end_effector

    @property
    def correspondence(self):
        return self._correspondence

    @property
    def finger_mask(self):
        return self._finger_mask

    @property
    def extra(self):
        return dict(self._extra)

    @property
    def limits(self):
        return self._lower, self._upper

    def frame_index(self, frame):
        self._check_frame(frame)
        return self._frame_index[frame]

    def ancestors(self, frame):
        """Boolean mask of the joints on the root-to-`frame` path."""
        return self._ancestors[self.frame_index(frame)]

    def zero_config(self):
        """The home configuration, clamped into the joint limits."""
        return JointConfig(np.clip(np.zeros(self.num_joints),
                                   self._lower, self._upper), self._name)

    def config(self, values):
        """Wraps raw joint values into a `JointConfig` for this chain."""
        return JointConfig(self.as_values(values), self._name)

    def as_values(self, q):
        """Validates `q` against this chain and returns its values."""
        if isinstance(q, JointConfig):
            if q.chain != self._name:
                raise ContractViolationError(
                    f"Received a configuration for chain '{q.chain}' "
                    f"where one for chain '{self._name}' was expected.")
            q = q.values
        values = np.asarray(q, dtype = np.float64).reshape(-1)
        if values.shape[0] != self.num_joints:
            raise ContractViolationError(
                f"Chain '{self._name}' has {self.num_joints} joints, "
                f"but a configuration of length {values.shape[0]} was given.")
        return values

    def clamp(self, q):
        """Returns `(clamped values, mask of clamped joints)`."""
        values = self.as_values(q)
        clamped = np.clip(values, self._lower, self._upper)
        return clamped, clamped != values

    @property
    def offsets(self):
        """The `(F, 4, 4)` fixed parent-to-frame offset transforms."""
        return self._offsets

    def frame_matrices(self, values, base = None, offsets = None):
        """Homogeneous world transforms of every frame (no clamping).

        Returns an `(F, 4, 4)` array of frame transforms, and the
        `(n, 3)` world-frame joint origins and axes used by the Jacobian.
        `offsets` optionally replaces the fixed offsets (for scaled hands).
        """
        offsets = self._offsets if offsets is None else offsets
        n_frames = len(self._frame_names)
        mats = np.empty((n_frames, 4, 4))
        mats[0] = np.eye(4) if base is None else base.as_matrix()
        origins = np.empty((self.num_joints, 3))
        axes = np.empty((self.num_joints, 3))
        for i in range(1, n_frames):
            pre = mats[self._parents[i]] @ offsets[i]
            j = self._frame_joint[i]
            if j >= 0:
                origins[j] = pre[:3, 3]
                axes[j] = pre[:3, :3] @ self._axes[j]
                rot = np.eye(4)
                rot[:3, :3] = axis_rotation_matrix(self._axes[j], values[j])
                pre = pre @ rot
            mats[i] = pre
        return mats, origins, axes

    def mirrored(self, name = None):
        """Returns this chain reflected across its x-z plane.

        Used to build a left hand from a right-hand definition. Offsets
        have their y translation negated and their rotations conjugated
        by the reflection; joint axes become `(-x, y, -z)` so positive
        joint angles produce the mirror-image motion.
        """
        def _mirror_pose(pose):
            w, x, y, z = pose.rotation
            tx, ty, tz = pose.translation
            return Pose([w, -x, y, -z], [tx, -ty, tz])

        joints = [JointSpec(j.name, j.parent,
                            (-j.axis[0], j.axis[1], -j.axis[2]),
                            _mirror_pose(j.offset), j.limits)
                  for j in self._joints]
        frames = [FrameSpec(f.name, f.parent, _mirror_pose(f.offset))
                  for f in self._fixed]
        return KinematicChain(
            name or f'{self._name}_mirrored', self._root, joints, frames,
            keypoints = self._keypoints, end_effector = self._end_effector,
            correspondence = self._correspondence,
            finger_joints = self._finger_joints, extra = self._extra)


def _parse_offset(record, where):
    try:
        translation = record.get('offset_translation', [0.0, 0.0, 0.0])
        rotation = record.get('offset_rotation_quat', [1.0, 0.0, 0.0, 0.0])
        return Pose(np.asarray(rotation, dtype = np.float64),
                    np.asarray(translation, dtype = np.float64))
    except (ContractViolationError, ValueError, TypeError) as e:
        raise ConfigurationError(f"Invalid offset for {where}: {e}")


def chain_from_dict(contents, name = None):
    """Builds a `KinematicChain` from the contents of a chain file."""
    name = contents.get('name', name)
    if name is None:
        raise ConfigurationError("Chain definitions need a `name`.")
    joints = []
    for record in contents.get('joints', []):
        for key in ('name', 'parent', 'axis', 'limits'):
            if key not in record:
                raise ConfigurationError(
                    f"Joint record {record} in chain '{name}' "
                    f"is missing the field '{key}'.")
        axis = np.asarray(record['axis'], dtype = np.float64)
        norm = np.linalg.norm(axis)
        if axis.shape != (3,) or norm < 1e-9:
            raise ConfigurationError(
                f"Joint '{record['name']}' of chain '{name}' has an "
                f"invalid axis {record['axis']}.")
        lo, hi = (float(v) for v in record['limits'])
        if lo > hi:
            raise ConfigurationError(
                f"Joint '{record['name']}' of chain '{name}' has "
                f"limits [{lo}, {hi}] with lo > hi.")
        joints.append(JointSpec(
            record['name'], record['parent'], tuple(axis / norm),
            _parse_offset(record, f"joint '{record['name']}'"), (lo, hi)))
    frames = []
    for record in contents.get('frames', []) or []:
        for key in ('name', 'parent'):
            if key not in record:
                raise ConfigurationError(
                    f"Frame record {record} in chain '{name}' "
                    f"is missing the field '{key}'.")
        frames.append(FrameSpec(
            record['name'], record['parent'],
            _parse_offset(record, f"frame '{record['name']}'")))
    known = {'name', 'root', 'joints', 'frames', 'keypoints', 'end_effector',
             'correspondence', 'finger_joints'}
    return KinematicChain(
        name, contents.get('root', 'base'), joints, frames,
        keypoints = contents.get('keypoints', ()) or (),
        end_effector = contents.get('end_effector', None),
        correspondence = contents.get('correspondence', None),
        finger_joints = contents.get('finger_joints', None),
        extra = {k: v for k, v in contents.items() if k not in known})


def load_chain(path_or_name, mirror = False, name = None):
    """Loads a kinematic chain from a YAML file or a bundled chain name.

    Parameters
    ----------
    path_or_name : str
        A path to a chain file, or the name of a bundled chain
        (`arm`, `human_hand`, `robot_hand`).
    mirror : bool
        Whether to reflect the chain (building a left hand from a right one).
    name : str
        An optional override for the chain's name.

    Returns
    -------
    The loaded `KinematicChain`.
    """
    contents = dict(load_yaml(path_or_name, kind = 'chains'))
    if name is not None:
        contents['name'] = name
    chain = chain_from_dict(contents)
    if mirror:
        chain = chain.mirrored(name = name or f"{chain.name}_left")
    return chain


def forward_kinematics(chain: KinematicChain, q, base: Optional[Pose] = None):
    """Computes the pose of every frame of `chain` at configuration `q`.

    Out-of-limit joint values are clamped, and flagged in the `clamped`
    attribute of the returned `FramePoses`. The optional `base` places
    the chain's root frame (by default, at the identity).
    """
    values, clamped = chain.clamp(q)
    mats, _, _ = chain.frame_matrices(values, base)
    return FramePoses(
        {name: Pose.from_matrix(mats[i])
         for i, name in enumerate(chain.frame_names)}, clamped = clamped)


def joint_positions_3d(chain: KinematicChain, q, base: Optional[Pose] = None,
                       keypoints: Optional[Sequence[str]] = None):
    """Returns the `(K, 3)` positions of the chain's keypoint frames.

    The ordering follows the chain's `keypoints` list (or the explicitly
    provided `keypoints`), which matches the hand-model keypoint order.
    """
    keypoints = chain.keypoints if keypoints is None else keypoints
    indices = [chain.frame_index(k) for k in keypoints]
    values, _ = chain.clamp(q)
    mats, _, _ = chain.frame_matrices(values, base)
    return mats[indices, :3, 3].copy()


def jacobian(chain: KinematicChain, q, frame: Optional[str] = None,
             base: Optional[Pose] = None):
    """Geometric Jacobian (6 x n) of `frame`, in the world frame.

    Rows are `[linear velocity; angular velocity]`. Columns of joints
    which are not on the path from the root to `frame` are zero.
    """
    frame = chain.end_effector if frame is None else frame
    index = chain.frame_index(frame)
    values, _ = chain.clamp(q)
    mats, origins, axes = chain.frame_matrices(values, base)
    return _jacobian_from(mats[index, :3, 3], origins, axes,
                          chain._ancestors[index])


def _jacobian_from(position, origins, axes, mask):
    jac = np.zeros((6, len(mask)))
    jac[:3, mask] = np.cross(axes[mask], position - origins[mask]).T
    jac[3:, mask] = axes[mask].T
    return jac


def keypoint_jacobians(chain: KinematicChain, values, base = None,
                       frames: Optional[Sequence[str]] = None):
    """Positions and linear Jacobians of several frames in one pass.

    Returns `(positions (K, 3), jacobians (K, 3, n))`; `values` must
    already be within the joint limits.
    """
    frames = chain.keypoints if frames is None else frames
    indices = [chain.frame_index(f) for f in frames]
    mats, origins, axes = chain.frame_matrices(values, base)
    positions = mats[indices, :3, 3]
    jacs = np.zeros((len(indices), 3, chain.num_joints))
    for k, index in enumerate(indices):
        mask = chain._ancestors[index]
        jacs[k][:, mask] = np.cross(axes[mask], positions[k] - origins[mask]).T
    return positions.copy(), jacs
