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
Scripted demonstrations.

A `TaskScript` describes what a demonstrator does: a schedule of wrist
poses and grasp apertures for every hand, which hand carries which
object over which frames, and the keyframes which close each stage.
Hand motion between waypoints follows a minimum-jerk profile; a
carried object keeps the wrist-relative pose it had when the carry
started. Wrist waypoints are computed from the object poses the script
wants to reach, so objects land exactly on their sub-goals.
"""

import copy
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from demobot.errors import ScriptError, ConfigurationError
from demobot.kinematics.robot import RobotModel
from demobot.kinematics.transforms import Pose, quat_slerp
from demobot.prior.segments import Keyframe
from demobot.sim.config import EnvConfig, load_env_config
from demobot.synthetic.options import TaskKind, SUBGOAL_COUNTS

# Object pose in the wrist frame while grasped: the grasp site of the
# hand (in front of and below the palm).
GRASP_OFFSET = Pose.from_translation((0.10, 0.0, -0.05))

HOVER_HEIGHT = 0.10
LIFT_HEIGHT = 0.12

# Offset of the starting wrist pose from the first grasp pose.
REST_OFFSET = (-0.10, 0.0, 0.15)

# Height of a peg tip above its seated position just before insertion
# (one centimeter above a three centimeter hole).
PRE_INSERT_HEIGHT = 0.04


def minimum_jerk(tau):
    """The minimum-jerk profile `10τ³ - 15τ⁴ + 6τ⁵` on [0, 1]."""
    tau = float(np.clip(tau, 0.0, 1.0))
    return tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau ** 2)


def wrist_for(object_pose: Pose):
    """The wrist pose holding an object at `object_pose`."""
    return object_pose @ GRASP_OFFSET.inverse()


@dataclass(frozen = True)
class Waypoint(object):
    """A wrist pose and grasp aperture (0 open, 1 closed) at a frame."""
    frame: int
    wrist: Pose
    aperture: float = 0.0
    name: str = ''


@dataclass(frozen = True)
class Carry(object):
    """A hand carrying an object from frame `start` to frame `end`."""
    obj: str
    hand: str
    start: int
    end: int


@dataclass
class TaskScript(object):
    """A scripted demonstration of one task.

    Parameters
    ----------
    kind : TaskKind
        The task the script demonstrates.
    num_frames : int
        The length of the demonstration.
    initial : dict
        The initial pose of every object.
    waypoints : dict
        The waypoints of each demonstrating hand, by frame.
    carries : list of Carry
        The frame ranges over which hands carry objects.
    keyframes : list of Keyframe
        The keyframes, one per sub-goal.
    goals : dict
        The object poses each keyframe is meant to reach, by frame.
    contact : tuple
        The first and last frame of assembly contact.
    assembly : dict
        The peg and base objects of the assembly.
    """
    kind: TaskKind
    num_frames: int
    initial: Dict[str, Pose]
    waypoints: Dict[str, List[Waypoint]]
    carries: List[Carry] = field(default_factory = list)
    keyframes: List[Keyframe] = field(default_factory = list)
    goals: Dict[int, Dict[str, Pose]] = field(default_factory = dict)
    contact: tuple = None
    assembly: Dict[str, str] = field(default_factory = dict)

    def __post_init__(self):
        for side, points in self.waypoints.items():
            frames = [w.frame for w in points]
            if not frames or frames[0] != 0 or frames != sorted(set(frames)):
                raise ConfigurationError(
                    f"The waypoints of the {side} hand must start at frame 0 "
                    f"and strictly increase, got frames {frames}.")

    @property
    def sides(self):
        return tuple(s for s in ('left', 'right') if s in self.waypoints)

    @property
    def subgoal_count(self):
        return len(self.keyframes)

    @property
    def contact_flags(self):
        flags = np.zeros(self.num_frames, dtype = bool)
        if self.contact is not None:
            flags[self.contact[0]: self.contact[1] + 1] = True
        return flags

    def add_waypoint(self, side, waypoint: Waypoint):
        """Returns a copy of the script with an extra waypoint."""
        script = copy.deepcopy(self)
        points = [w for w in script.waypoints[side] if w.frame != waypoint.frame]
        script.waypoints[side] = sorted(points + [waypoint], key = lambda w: w.frame)
        return script

    def wrist_track(self, side):
        """Per-frame wrist poses of one hand."""
        points = self.waypoints[side]
        track = []
        for t in range(self.num_frames):
            after = next((i for i, w in enumerate(points) if w.frame >= t), None)
            if after is None:
                track.append(points[-1].wrist)
                continue
            b = points[after]
            if b.frame == t or after == 0:
                track.append(b.wrist)
                continue
            a = points[after - 1]
            s = minimum_jerk((t - a.frame) / (b.frame - a.frame))
            track.append(Pose(
                quat_slerp(a.wrist.rotation, b.wrist.rotation, s),
                (1.0 - s) * a.wrist.translation + s * b.wrist.translation))
        return track

    def aperture_track(self, side):
        """Per-frame grasp apertures of one hand."""
        points = self.waypoints[side]
        frames = np.array([w.frame for w in points], dtype = np.float64)
        values = np.array([w.aperture for w in points])
        out = np.empty(self.num_frames)
        for t in range(self.num_frames):
            i = int(np.searchsorted(frames, t))
            if i >= len(frames):
                out[t] = values[-1]
            elif frames[i] == t or i == 0:
                out[t] = values[i]
            else:
                s = minimum_jerk((t - frames[i - 1]) / (frames[i] - frames[i - 1]))
                out[t] = (1.0 - s) * values[i - 1] + s * values[i]
        return out

    def object_poses(self):
        """Per-frame poses of every object."""
        wrists = {side: self.wrist_track(side) for side in self.sides}
        tracks = {name: [pose] * self.num_frames for name, pose in self.initial.items()}
        for carry in sorted(self.carries, key = lambda c: c.start):
            track = tracks[carry.obj]
            wrist = wrists[carry.hand]
            relative = wrist[carry.start].inverse() @ track[carry.start]
            for t in range(carry.start, carry.end + 1):
                track[t] = wrist[t] @ relative
            for t in range(carry.end + 1, self.num_frames):
                track[t] = track[carry.end]
        return tracks

    def subgoal_poses(self):
        """The object poses at every keyframe, as the demonstration shows them."""
        tracks = self.object_poses()
        return [{name: track[k.frame] for name, track in tracks.items()}
                for k in self.keyframes]

    def check_reachable(self, robot: RobotModel):
        """Raises a `ScriptError` naming the first out-of-reach waypoint."""
        for side in self.sides:
            if side not in robot.sides:
                raise ScriptError(
                    f"The script moves the {side} hand, but the robot only "
                    f"has the {list(robot.sides)} sides.")
            arm = robot.side(side)
            for w in self.waypoints[side]:
                distance = float(np.linalg.norm(w.wrist.translation - arm.shoulder))
                if distance > arm.reach:
                    raise ScriptError(
                        f"Waypoint '{w.name or w.frame}' of the {side} hand at "
                        f"frame {w.frame} is {distance:.3f} m from the shoulder, "
                        f"beyond the arm's reach of {arm.reach:.3f} m.",
                        waypoint = w.name or str(w.frame))


class _Hand(object):
    """Accumulates one hand's waypoints."""

    def __init__(self, first_grasp: Pose, rest = REST_OFFSET):
        self.points = [Waypoint(0, first_grasp.translated(rest), 0.0, 'rest')]

    @property
    def last(self):
        return self.points[-1]

    def to(self, frame, wrist, aperture = None, name = ''):
        aperture = self.last.aperture if aperture is None else aperture
        self.points.append(Waypoint(frame, wrist, aperture, name))
        return wrist

    def hold(self, frame, aperture = None, name = ''):
        return self.to(frame, self.last.wrist, aperture, name)

    def pick(self, obj_pose, hover, reach, close, lift, label):
        """Hover over, reach, close on and lift an object."""
        grasp = wrist_for(obj_pose)
        self.to(hover, grasp.translated((0.0, 0.0, HOVER_HEIGHT)), 0.0, f'hover_{label}')
        self.to(reach, grasp, 0.0, f'reach_{label}')
        self.hold(close, 1.0, f'close_{label}')
        self.to(lift, grasp.translated((0.0, 0.0, LIFT_HEIGHT)), 1.0, f'lift_{label}')


def _assembly_offset(env: EnvConfig, peg, base):
    """Pose of the inserted peg relative to its base."""
    entry, _ = env.object(base).hole_axis()
    tip, _ = env.object(peg).axis_endpoints
    return Pose.from_translation(entry - tip)


def _lifted(pose: Pose, height = LIFT_HEIGHT):
    return pose.translated((0.0, 0.0, height))


def sync_assembly(env: EnvConfig):
    """Both hands pick up the base and peg and insert the peg mid-air."""
    kind = TaskKind.sync_assembly
    initial = env.nominal_poses(kind.value)
    base0, peg0 = initial['base'], initial['peg']
    inserted = _assembly_offset(env, 'peg', 'base')

    base_goal = Pose(base0.rotation, np.array([0.45, 0.02, 0.16]))
    above = base_goal @ Pose.from_translation((0.0, 0.0, 0.06)) @ inserted
    pre = base_goal @ Pose.from_translation((0.0, 0.0, PRE_INSERT_HEIGHT)) @ inserted
    seated = base_goal @ inserted

    left, right = _Hand(wrist_for(base0)), _Hand(wrist_for(peg0))
    left.pick(base0, 25, 45, 60, 90, 'base')
    right.pick(peg0, 25, 45, 60, 90, 'peg')
    left.to(135, wrist_for(base_goal), name = 'base_goal')
    right.to(135, wrist_for(above), name = 'peg_above')
    left.hold(205, name = 'base_hold')
    right.to(165, wrist_for(pre), name = 'peg_pre_insert')
    right.to(195, wrist_for(seated), name = 'peg_inserted')
    right.hold(205, name = 'peg_hold')

    pairs = {'left': 'base', 'right': 'peg'}
    keyframes = [
        Keyframe(45, 'reach', pairs, name = 'reach'),
        Keyframe(90, 'grasp_lift', pairs, name = 'lift'),
        Keyframe(135, 'goal', pairs, sync = True, name = 'align'),
        Keyframe(165, 'goal', pairs, sync = True, name = 'pre_insert'),
        Keyframe(205, 'goal', pairs, sync = True, contact = True, name = 'insert')]
    goals = {45: {'base': base0, 'peg': peg0},
             90: {'base': _lifted(base0), 'peg': _lifted(peg0)},
             135: {'base': base_goal, 'peg': above},
             165: {'base': base_goal, 'peg': pre},
             205: {'base': base_goal, 'peg': seated}}
    return TaskScript(
        kind, 206, initial, {'left': left.points, 'right': right.points},
        carries = [Carry('base', 'left', 60, 205), Carry('peg', 'right', 60, 205)],
        keyframes = keyframes, goals = goals, contact = (195, 205),
        assembly = {'peg': 'peg', 'base': 'base'})


def async_assembly(env: EnvConfig):
    """The left hand places the base, then the right hand inserts the handle."""
    kind = TaskKind.async_assembly
    initial = env.nominal_poses(kind.value)
    base0, handle0 = initial['base'], initial['handle']
    inserted = _assembly_offset(env, 'handle', 'base')

    base_above = Pose(base0.rotation, np.array([0.50, 0.0, 0.10]))
    base_placed = Pose(base0.rotation, np.array([0.50, 0.0, base0.translation[2]]))
    handle_goals = [base_placed @ Pose.from_translation((0.0, 0.0, h)) @ inserted
                    for h in (0.08, PRE_INSERT_HEIGHT, 0.015, 0.0)]
    above, pre, half, seated = handle_goals

    left, right = _Hand(wrist_for(base0)), _Hand(wrist_for(handle0))
    left.pick(base0, 20, 40, 52, 80, 'base')
    left.to(120, wrist_for(base_above), name = 'base_above')
    left.to(150, wrist_for(base_placed), name = 'base_placed')
    left.hold(160, 0.0, name = 'base_release')
    left.to(175, wrist_for(base_placed).translated((0.0, 0.0, HOVER_HEIGHT)),
            name = 'left_retreat')

    right.hold(180, name = 'right_wait')
    right.pick(handle0, 200, 215, 227, 255, 'handle')
    right.to(295, wrist_for(above), name = 'handle_above')
    right.to(325, wrist_for(pre), name = 'handle_pre_insert')
    right.to(350, wrist_for(half), name = 'handle_half')
    right.to(370, wrist_for(seated), name = 'handle_inserted')
    right.hold(380, name = 'handle_hold')

    lb, rh = {'left': 'base'}, {'right': 'handle'}
    keyframes = [
        Keyframe(40, 'reach', lb, name = 'reach_base'),
        Keyframe(80, 'grasp_lift', lb, name = 'lift_base'),
        Keyframe(120, 'goal', lb, name = 'base_above'),
        Keyframe(150, 'goal', lb, name = 'base_placed'),
        Keyframe(175, 'goal', lb, name = 'release_base'),
        Keyframe(215, 'reach', rh, switch = True, name = 'reach_handle'),
        Keyframe(255, 'grasp_lift', rh, name = 'lift_handle'),
        Keyframe(295, 'goal', rh, name = 'handle_above'),
        Keyframe(325, 'goal', rh, name = 'pre_insert'),
        Keyframe(350, 'goal', rh, name = 'half_insert'),
        Keyframe(380, 'goal', rh, contact = True, name = 'insert')]
    goals = {40: {'base': base0}, 80: {'base': _lifted(base0)},
             120: {'base': base_above}, 150: {'base': base_placed},
             175: {'base': base_placed}, 215: {'handle': handle0},
             255: {'handle': _lifted(handle0)}, 295: {'handle': above},
             325: {'handle': pre}, 350: {'handle': half}, 380: {'handle': seated}}
    return TaskScript(
        kind, 381, initial, {'left': left.points, 'right': right.points},
        carries = [Carry('base', 'left', 52, 160), Carry('handle', 'right', 227, 380)],
        keyframes = keyframes, goals = goals, contact = (370, 380),
        assembly = {'peg': 'handle', 'base': 'base'})


def single_arm_multi_step(env: EnvConfig):
    """One hand inserts the peg, pulls it out again, and sets it down."""
    kind = TaskKind.single_arm_multi_step
    initial = env.nominal_poses(kind.value)
    base0, peg0 = initial['base'], initial['peg']
    inserted = _assembly_offset(env, 'peg', 'base')

    above, pre, seated, extracted = [
        base0 @ Pose.from_translation((0.0, 0.0, h)) @ inserted
        for h in (0.06, PRE_INSERT_HEIGHT, 0.0, 0.06)]
    place_above = Pose(peg0.rotation, np.array([0.40, -0.20, 0.11]))
    placed = Pose(peg0.rotation, np.array([0.40, -0.20, peg0.translation[2]]))

    # The peg sits close to the right shoulder; resting behind the grasp
    # would need the elbow folded past its limit.
    right = _Hand(wrist_for(peg0), rest = (0.0, 0.0, 0.15))
    right.pick(peg0, 20, 40, 52, 80, 'peg')
    right.to(120, wrist_for(above), name = 'peg_above')
    right.to(150, wrist_for(pre), name = 'peg_pre_insert')
    right.to(172, wrist_for(seated), name = 'peg_inserted')
    right.hold(180, name = 'peg_hold')
    right.to(215, wrist_for(extracted), name = 'peg_extracted')
    right.to(250, wrist_for(place_above), name = 'peg_place_above')
    right.to(280, wrist_for(placed), name = 'peg_placed')

    pairs = {'right': 'peg'}
    keyframes = [
        Keyframe(40, 'reach', pairs, name = 'reach'),
        Keyframe(80, 'grasp_lift', pairs, name = 'lift'),
        Keyframe(120, 'goal', pairs, name = 'above'),
        Keyframe(150, 'goal', pairs, name = 'pre_insert'),
        Keyframe(180, 'goal', pairs, contact = True, name = 'insert'),
        Keyframe(215, 'goal', pairs, name = 'extract'),
        Keyframe(250, 'goal', pairs, name = 'place_above'),
        Keyframe(280, 'goal', pairs, name = 'place')]
    goals = {40: {'peg': peg0}, 80: {'peg': _lifted(peg0)}, 120: {'peg': above},
             150: {'peg': pre}, 180: {'peg': seated}, 215: {'peg': extracted},
             250: {'peg': place_above}, 280: {'peg': placed}}
    return TaskScript(
        kind, 281, initial, {'right': right.points},
        carries = [Carry('peg', 'right', 52, 280)],
        keyframes = keyframes, goals = goals, contact = (172, 180),
        assembly = {'peg': 'peg', 'base': 'base'})


_SCRIPTS = {TaskKind.sync_assembly: sync_assembly,
            TaskKind.async_assembly: async_assembly,
            TaskKind.single_arm_multi_step: single_arm_multi_step}


def load_script(task, env = None) -> TaskScript:
    """Builds the built-in script of a task in an environment."""
    kind = TaskKind.parse(task)
    env = env if isinstance(env, EnvConfig) else load_env_config(env or 'desk')
    script = _SCRIPTS[kind](env)
    if script.subgoal_count != SUBGOAL_COUNTS[kind]:
        raise ConfigurationError(
            f"The {kind.value} script has {script.subgoal_count} sub-goals, "
            f"expected {SUBGOAL_COUNTS[kind]}.")
    return script
