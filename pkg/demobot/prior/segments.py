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
Demonstration replay and segmentation.

The retargeted hand trajectory is replayed frame by frame: each robot
hand's base pose is turned into arm joints with inverse kinematics,
and the full-body configuration is buffered. Every keyframe closes the
current buffer into a temporal segment whose sub-goal is the pose of
the task objects at that keyframe.
"""

from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence

import numpy as np

from demobot.errors import ConfigurationError, ContractViolationError, ProcessingError
from demobot.kinematics.ik import IKParameters, solve_ik
from demobot.kinematics.robot import RobotModel
from demobot.kinematics.transforms import Pose
from demobot.utils.logging import log
from demobot.utils.random import make_rng

PHASES = ('reach', 'grasp_lift', 'goal')


@dataclass(frozen = True)
class Keyframe(object):
    """A keyframe of a demonstration and the stage it closes.

    Parameters
    ----------
    frame : int
        The frame index of the keyframe.
    phase : str
        The reward phase of the stage it closes: `reach`, `grasp_lift`
        or `goal`.
    pairs : dict
        The objects each hand interacts with during the stage.
    switch : bool
        Whether entering this stage switches the active hand.
    sync : bool
        Whether both hands should reach their goals together.
    contact : bool
        Whether the keyframe is an assembly-contact frame.
    name : str
        An optional human-readable label.
    """
    frame: int
    phase: str = 'goal'
    pairs: Mapping[str, str] = field(default_factory = dict)
    switch: bool = False
    sync: bool = False
    contact: bool = False
    name: str = ''

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ConfigurationError(
                f"Unknown keyframe phase '{self.phase}', "
                f"expected one of {PHASES}.")
        object.__setattr__(self, 'frame', int(self.frame))
        object.__setattr__(self, 'pairs', dict(sorted(dict(self.pairs).items())))

    def to_dict(self):
        return {'frame': self.frame, 'phase': self.phase,
                'pairs': dict(self.pairs),
                'switch': self.switch, 'sync': self.sync,
                'contact': self.contact, 'name': self.name}

    @classmethod
    def from_dict(cls, contents):
        return cls(**contents)


@dataclass(frozen = True)
class ObjectTrack(object):
    """The per-frame pose track of one object."""
    name: str
    poses: tuple
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'poses', tuple(self.poses))
        timestamps = np.arange(len(self.poses), dtype = np.float64) \
            if self.timestamps is None else \
            np.asarray(self.timestamps, dtype = np.float64)
        if timestamps.shape != (len(self.poses),):
            raise ContractViolationError(
                f"Track '{self.name}' has {len(self.poses)} poses "
                f"but {timestamps.shape[0]} timestamps.")
        if np.any(np.diff(timestamps) <= 0):
            raise ContractViolationError(
                f"The timestamps of track '{self.name}' "
                f"are not strictly increasing.")
        timestamps.setflags(write = False)
        object.__setattr__(self, 'timestamps', timestamps)

    def __len__(self):
        return len(self.poses)

    def __getitem__(self, t) -> Pose:
        return self.poses[t]

    def replaced(self, t, pose):
        """A copy of the track with frame `t` set to `pose`."""
        poses = list(self.poses)
        poses[t] = pose
        return ObjectTrack(self.name, poses, self.timestamps)


@dataclass
class HandTrajectory(object):
    """Per-frame retargeted robot hand joints and base poses."""
    q: np.ndarray
    bases: List[Pose]

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype = np.float64)
        if len(self.q) != len(self.bases):
            raise ContractViolationError(
                f"A hand trajectory has {len(self.q)} joint frames "
                f"but {len(self.bases)} base poses.")

    def __len__(self):
        return len(self.bases)


@dataclass
class Segment(object):
    """A temporal segment: its base actions and its object sub-goal.

    `base_actions` has one full-body joint vector per frame, from frame
    `start` up to and including the closing keyframe. `goals` holds the
    pose of every tracked object at the closing keyframe.
    """
    index: int
    keyframe: Keyframe
    start: int
    base_actions: np.ndarray
    goals: Mapping[str, Pose]

    def __post_init__(self):
        self.base_actions = np.asarray(self.base_actions, dtype = np.float64)
        if self.base_actions.ndim != 2 or len(self.base_actions) == 0:
            raise ContractViolationError(
                f"Segment {self.index} has no base actions.")

    def __len__(self):
        return len(self.base_actions)

    @property
    def end(self):
        return self.start + len(self.base_actions) - 1

    @property
    def phase(self):
        return self.keyframe.phase

    @property
    def pairs(self):
        return self.keyframe.pairs

    @property
    def goal_object(self):
        """The object whose pose is this segment's sub-goal."""
        if self.keyframe.pairs:
            return next(iter(self.keyframe.pairs.values()))
        return next(iter(self.goals))

    @property
    def goal(self) -> Pose:
        return self.goals[self.goal_object]


class SegmentList(list):
    """A list of segments, with the replay's per-frame IK report.

    `ik_position_errors` and `ik_converged` have one row per frame and
    one column per robot side.
    """
    ik_position_errors: np.ndarray
    ik_converged: np.ndarray

    def __init__(self, segments = (), ik_position_errors = None, ik_converged = None):
        super().__init__(segments)
        self.ik_position_errors = ik_position_errors
        self.ik_converged = ik_converged

    @property
    def ik_convergence_rate(self):
        if self.ik_converged is None or self.ik_converged.size == 0:
            return 1.0
        return float(np.mean(self.ik_converged))


def normalize_keyframes(keyframes: Sequence, last_frame: int):
    """Validates keyframes, appending the final frame if it is missing."""
    keyframes = [k if isinstance(k, Keyframe) else Keyframe(int(k))
                 for k in keyframes]
    frames = [k.frame for k in keyframes]
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise ConfigurationError(
            f"Keyframes must be strictly increasing, got {frames}.")
    if frames and (frames[0] < 0 or frames[-1] > last_frame):
        raise ConfigurationError(
            f"Keyframes {frames} fall outside of the trajectory [0, {last_frame}].")
    if not frames or frames[-1] != last_frame:
        log(f"The final frame {last_frame} is not a keyframe; "
            f"appending it to close the last segment.")
        keyframes.append(Keyframe(last_frame))
    return keyframes


def build_segments(robot: RobotModel, hand_trajs: Mapping[str, HandTrajectory],
                   obj_tracks: Mapping[str, ObjectTrack], keyframes: Sequence,
                   ik_params: Optional[IKParameters] = None,
                   max_residual: float = 0.01, restarts: int = 20):
    """Replays a retargeted demonstration and cuts it into segments.

    For every frame, the arm joints of each side are solved with inverse
    kinematics, warm-started from the previous frame, so that the arm's
    `hand_mount` frame lands on the retargeted hand base. Sides without
    a hand trajectory are held at their home configuration. At every
    keyframe, the buffered full-body configurations are emitted as a
    segment whose goals are the object poses at that frame.

    Parameters
    ----------
    robot : RobotModel
        The robot whose arms replay the trajectory.
    hand_trajs : dict
        A `HandTrajectory` per robot side.
    obj_tracks : dict
        An `ObjectTrack` per object.
    keyframes : list
        Sorted keyframes (`Keyframe`s or frame indices) within [0, T].
    ik_params : IKParameters
        Inverse kinematics parameters.
    max_residual : float
        The position error (m) above which an unconverged IK solve
        fails the segmentation.
    restarts : int
        Random starting configurations tried, within the joint limits,
        when the first frame does not converge from home.

    Returns
    -------
    A `SegmentList` which partitions frames [0, T].
    """
    lengths = {len(t) for t in hand_trajs.values()} | {len(t) for t in obj_tracks.values()}
    if len(lengths) != 1:
        raise ContractViolationError(
            f"Hand trajectories and object tracks have differing "
            f"lengths {sorted(lengths)}.")
    num_frames = lengths.pop()
    if num_frames == 0:
        raise ContractViolationError("Cannot segment an empty trajectory.")
    for side in hand_trajs:
        robot.side(side)
    keyframes = normalize_keyframes(keyframes, num_frames - 1)
    ik_params = ik_params or IKParameters()

    sides = robot.sides
    home = robot.split(robot.home())
    previous = {side: home[side][0] for side in sides}
    errors = np.zeros((num_frames, len(sides)))
    converged = np.ones((num_frames, len(sides)), dtype = bool)

    segments, buffer, start = SegmentList(), [], 0
    closing = iter(keyframes)
    keyframe = next(closing)
    for t in range(num_frames):
        parts = {}
        for j, side in enumerate(sides):
            assembly = robot.side(side)
            if side not in hand_trajs:
                parts[side] = home[side]
                continue
            traj = hand_trajs[side]
            result = solve_ik(assembly.arm, traj.bases[t], previous[side],
                              params = ik_params, base = assembly.mount)
            if t == 0 and not result.converged:
                result = _search_first_frame(
                    assembly, traj.bases[0], result, ik_params, restarts)
            errors[t, j] = result.position_error
            converged[t, j] = result.converged
            if not result.converged:
                log(f"Inverse kinematics for the {side} arm did not converge "
                    f"at frame {t} (position error {result.position_error:.2e} m, "
                    f"orientation error {result.orientation_error:.2e} rad).")
                if result.position_error > max_residual:
                    raise ProcessingError(
                        f"The {side} arm cannot reach the demonstrated hand "
                        f"pose at frame {t}: the position error "
                        f"{result.position_error:.4f} m exceeds "
                        f"{max_residual} m.", stage = 'segment')
            previous[side] = result.q.values
            parts[side] = (result.q.values, traj.q[t])
        buffer.append(robot.assemble(parts))

        if t == keyframe.frame:
            segments.append(Segment(
                len(segments), keyframe, start, np.stack(buffer),
                {name: track[t] for name, track in obj_tracks.items()}))
            buffer, start = [], t + 1
            keyframe = next(closing, None)

    segments.ik_position_errors = errors
    segments.ik_converged = converged
    return segments


def _search_first_frame(assembly, target: Pose, best, ik_params, restarts):
    """Retries the first frame from random configurations; keeps the best."""
    lower, upper = assembly.arm.limits
    rng = make_rng(0)
    for _ in range(restarts):
        q0 = lower + rng.uniform(size = len(lower)) * (upper - lower)
        result = solve_ik(assembly.arm, target, q0,
                          params = ik_params, base = assembly.mount)
        if result.position_error < best.position_error:
            best = result
        if best.converged:
            break
    return best


def concatenate_segments(segments: Sequence[Segment]):
    """The full replayed trajectory, `(T + 1, D)`, from its segments."""
    return np.concatenate([s.base_actions for s in segments], axis = 0)
