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
Environment configuration files.

An environment config (see `demobot/_assets/envs/desk.yaml`) declares
the physics constants, the table, the robot, the camera, the actuator
templates, the grasp model, the task objects and their per-task layout,
and the reward and curriculum parameters. Every section is optional and
falls back to the bundled `desk` config.
"""

import copy
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from demobot.framework import Parameters
from demobot.errors import ConfigurationError
from demobot.kinematics.robot import RobotModel
from demobot.kinematics.transforms import Pose, look_at, quat_from_axis_angle
from demobot.prior.hand import CameraIntrinsics
from demobot.rewards.curriculum import CurriculumParams
from demobot.rewards.reward import RewardSpec
from demobot.sim.actuator import ActuatorTemplate, ActuatorParams, TORQUE_MODES
from demobot.sim.objects import ObjectSpec
from demobot.sim.randomization import RandomizationSpec
from demobot.utils.data import load_yaml, maybe_you_meant

SECTIONS = ('physics', 'table', 'robot', 'camera', 'actuators', 'grasp',
            'randomization', 'objects', 'tasks', 'episode', 'reward', 'curriculum')


@dataclass(repr = False)
class PhysicsSpec(Parameters):
    dt: float = 1.0 / 30.0
    substeps: int = 4
    gravity: float = 9.81
    inertia: float = 0.05

    def validate(self):
        if self.dt <= 0 or self.substeps < 1 or self.inertia <= 0:
            raise ConfigurationError(
                f"Invalid physics constants: dt = {self.dt}, substeps = "
                f"{self.substeps}, inertia = {self.inertia}.")


@dataclass(repr = False)
class TableSpec(Parameters):
    """The table's height and its region on the floor plane (m)."""
    height: float = 0.0
    x_range: tuple = (0.1, 0.9)
    y_range: tuple = (-0.6, 0.6)

    def validate(self):
        for name in ('x_range', 'y_range'):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigurationError(
                    f"The table's `{name}` must be increasing, got {(lo, hi)}.")

    def contains(self, point):
        x, y = point[0], point[1]
        return self.x_range[0] <= x <= self.x_range[1] and \
               self.y_range[0] <= y <= self.y_range[1]


@dataclass(repr = False)
class GraspSpec(Parameters):
    """Thresholds of the attach/detach grasp model.

    Parameters
    ----------
    attach_dist : float
        Mean fingertip-to-surface distance (m) under which a closed
        hand attaches an object.
    release_dist : float
        Mean fingertip-to-surface distance (m) above which an attached
        object is released; larger than `attach_dist`.
    attach_closure : float
        Mean finger angle (rad) above which a hand is closed.
    release_aperture : float
        Mean finger angle (rad) under which a hand releases its object.
    """
    attach_dist: float = 0.035
    release_dist: float = 0.06
    attach_closure: float = 0.5
    release_aperture: float = 0.3

    def validate(self):
        if not 0 < self.attach_dist < self.release_dist:
            raise ConfigurationError(
                f"Expected 0 < attach_dist < release_dist, got attach_dist "
                f"= {self.attach_dist}, release_dist = {self.release_dist}.")
        if not self.release_aperture < self.attach_closure:
            raise ConfigurationError(
                f"Expected release_aperture < attach_closure, got "
                f"{self.release_aperture} and {self.attach_closure}.")


@dataclass(repr = False)
class EpisodeSpec(Parameters):
    max_steps_factor: float = 2.0
    goal_distance_limit: float = 0.5

    def validate(self):
        if self.max_steps_factor <= 0 or self.goal_distance_limit <= 0:
            raise ConfigurationError("Episode limits must be positive.")


@dataclass(frozen = True)
class TaskLayout(object):
    """Where a task's objects start, and which hands take part."""
    name: str
    sides: Tuple[str, ...]
    initial: Dict[str, tuple]
    assembly: Dict[str, str]


class EnvConfig(object):
    """A parsed environment configuration."""

    def __init__(self, contents, source = None):
        self.source = source
        contents = copy.deepcopy(contents)
        for key in contents:
            if key not in SECTIONS:
                raise ConfigurationError(maybe_you_meant(
                    key, f"Unknown environment config section '{key}'.", SECTIONS))

        self.physics = PhysicsSpec.from_dict(contents.get('physics'))
        self.table = TableSpec.from_dict(
            {k: tuple(v) if isinstance(v, list) else v
             for k, v in (contents.get('table') or {}).items()})

        robot = contents.get('robot') or {}
        self.arm = robot.get('arm', 'arm')
        self.hand = robot.get('hand', 'robot_hand')
        self.mounts = {side: tuple(float(v) for v in mount)
                       for side, mount in (robot.get('mounts') or {}).items()}

        camera = contents.get('camera') or {}
        self.camera_eye = tuple(camera.get('eye', (1.1, 0.0, 0.55)))
        self.camera_target = tuple(camera.get('target', (0.40, 0.0, 0.10)))
        self.intrinsics = CameraIntrinsics.from_dict(camera.get('intrinsics'))

        actuators = dict(contents.get('actuators') or {})
        self.torque_mode = actuators.pop('mode', 'literal')
        if self.torque_mode not in TORQUE_MODES:
            raise ConfigurationError(
                f"Unknown torque mode '{self.torque_mode}', "
                f"expected one of {TORQUE_MODES}.")
        self.arm_actuator = ActuatorTemplate.from_dict(actuators.pop('arm', None))
        self.finger_actuator = ActuatorTemplate.from_dict(actuators.pop('finger', None))
        if actuators:
            raise ConfigurationError(
                f"Unknown actuator classes {sorted(actuators)}, "
                f"expected `arm`, `finger` and `mode`.")

        self.grasp = GraspSpec.from_dict(contents.get('grasp'))
        self.randomization = RandomizationSpec.from_dict(contents.get('randomization'))
        self.objects = {name: ObjectSpec.from_dict(name, spec)
                        for name, spec in (contents.get('objects') or {}).items()}
        self.tasks = {name: self._parse_task(name, spec)
                      for name, spec in (contents.get('tasks') or {}).items()}
        self.episode = EpisodeSpec.from_dict(contents.get('episode'))
        self.reward = RewardSpec.from_dict(contents.get('reward'))
        self.curriculum = CurriculumParams.from_dict(contents.get('curriculum'))

    def __repr__(self):
        return f"<EnvConfig {self.source or '(inline)'}: " \
               f"objects={list(self.objects)}, tasks={list(self.tasks)}>"

    def _parse_task(self, name, spec):
        for obj in spec.get('initial', {}):
            if obj not in self.objects:
                raise ConfigurationError(maybe_you_meant(
                    obj, f"Task '{name}' places an unknown object '{obj}'.",
                    self.objects))
        assembly = dict(spec.get('assembly') or {})
        if assembly and set(assembly) != {'peg', 'base'}:
            raise ConfigurationError(
                f"The assembly of task '{name}' needs a `peg` and a `base`, "
                f"got {sorted(assembly)}.")
        return TaskLayout(name, tuple(spec.get('sides', ('left', 'right'))),
                          {k: tuple(v) for k, v in spec.get('initial', {}).items()},
                          assembly)

    def task(self, name) -> TaskLayout:
        if name not in self.tasks:
            raise ConfigurationError(maybe_you_meant(
                name, f"The environment has no task named '{name}'.", self.tasks))
        return self.tasks[name]

    def object(self, name) -> ObjectSpec:
        if name not in self.objects:
            raise ConfigurationError(maybe_you_meant(
                name, f"The environment has no object named '{name}'.", self.objects))
        return self.objects[name]

    def build_robot(self, sides = ('left', 'right')) -> RobotModel:
        return RobotModel.load(sides, arm = self.arm, hand = self.hand,
                               mounts = self.mounts)

    def camera_pose(self) -> Pose:
        """The camera-to-world pose."""
        return look_at(self.camera_eye, self.camera_target)

    def nominal_poses(self, task):
        """The un-randomized initial object poses of a task, resting upright."""
        layout = self.task(task)
        poses = {}
        for name, placement in layout.initial.items():
            x, y = placement[0], placement[1]
            yaw = placement[2] if len(placement) > 2 else 0.0
            z = self.table.height + self.object(name).rest_height
            poses[name] = Pose(quat_from_axis_angle((0.0, 0.0, 1.0), yaw),
                               np.array([x, y, z]))
        return poses

    def actuator_template(self, robot: RobotModel) -> ActuatorParams:
        """Nominal per-joint actuator parameters in full-body order."""
        mask = robot.finger_mask
        arm = ActuatorParams.nominal(self.arm_actuator, robot.num_joints)
        finger = ActuatorParams.nominal(self.finger_actuator, robot.num_joints)
        params = arm.copy()
        for name in ('kp', 'kd', 'tau_stall', 'omega_max'):
            getattr(params, name)[mask] = getattr(finger, name)[mask]
        return params


def load_env_config(path_or_name = 'desk') -> EnvConfig:
    """Loads an environment config from a file or a bundled name."""
    contents = load_yaml(path_or_name, kind = 'envs')
    if path_or_name != 'desk':
        base = copy.deepcopy(load_yaml('desk', kind = 'envs'))
        for key, value in contents.items():
            if isinstance(value, dict) and key not in ('objects', 'tasks'):
                base.setdefault(key, {}).update(value)
            else:
                base[key] = value
        contents = base
    return EnvConfig(contents, source = path_or_name)
