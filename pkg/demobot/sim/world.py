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
Joint-space dynamics, object kinematics and the attach/detach grasp model.

Every joint is a unit of effective inertia driven by its randomized
actuator, integrated with semi-implicit Euler over a number of physics
substeps per control step; joints stop at their limits. Objects are
either attached to a hand, in which case they follow its base frame
rigidly, or free, in which case they fall under gravity and come to
rest on the table.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from demobot.errors import ContractViolationError
from demobot.kinematics.robot import RobotModel
from demobot.kinematics.transforms import Pose
from demobot.sim.actuator import ActuatorParams, compute_joint_torque
from demobot.sim.config import EnvConfig, GraspSpec
from demobot.sim.objects import ObjectSpec
from demobot.sim.state import WorldState


@dataclass
class StepEvents(object):
    """What happened during a control step."""
    landed: List[str] = field(default_factory = list)
    attached: List[tuple] = field(default_factory = list)
    detached: List[tuple] = field(default_factory = list)
    at_limits: int = 0


class World(object):
    """The static description of the simulated world.

    Parameters
    ----------
    config : EnvConfig
        The environment config (physics, table and grasp model).
    robot : RobotModel
        The robot acting in the world.
    objects : sequence of str
        The names of the objects present.
    actuators : ActuatorParams
        Per-joint actuator parameters; the nominal template if omitted.
    """

    def __init__(self, config: EnvConfig, robot: RobotModel,
                 objects: Sequence[str], actuators: Optional[ActuatorParams] = None):
        self._config = config
        self._robot = robot
        self._objects: Dict[str, ObjectSpec] = {
            name: config.object(name) for name in objects}
        self._template = config.actuator_template(robot)
        self.actuators = actuators if actuators is not None else self._template
        self._fingertips = {
            side: list(robot.side(side).hand.extra.get('fingertips', ()))
            for side in robot.sides}

    def __repr__(self):
        return f"<World {list(self._objects)} with {self._robot}>"

    @property
    def config(self) -> EnvConfig:
        return self._config

    @property
    def robot(self) -> RobotModel:
        return self._robot

    @property
    def objects(self):
        return self._objects

    @property
    def actuator_template(self):
        return self._template

    @property
    def actuators(self) -> ActuatorParams:
        return self._actuators

    @actuators.setter
    def actuators(self, params):
        if len(params) != self._robot.num_joints:
            raise ContractViolationError(
                f"The robot has {self._robot.num_joints} joints, but "
                f"actuator parameters for {len(params)} were given.")
        self._actuators = params

    def initial_state(self, q, objects: Dict[str, Pose]) -> WorldState:
        missing = set(self._objects) - set(objects)
        if missing:
            raise ContractViolationError(
                f"No initial pose was given for the objects {sorted(missing)}.")
        q = np.asarray(q, dtype = np.float64)
        self._robot.split(q)
        return WorldState(q, objects = {k: objects[k] for k in self._objects},
                          initial = {k: objects[k] for k in self._objects})

    def fingertips(self, side, q):
        """World positions of the fingertips of the hand on `side`."""
        return self._robot.hand_frames(side, q, self._fingertips[side])

    def fingertip_distance(self, side, q, name, pose: Pose):
        """Mean distance from the fingertips to the surface of `name`."""
        tips = self.fingertips(side, q)
        return float(np.mean(self._objects[name].surface_distance(pose, tips)))

    def hand_distance(self, side, q, pose: Pose):
        """Distance from the hand's grasp site to an object's center."""
        site = self._robot.grasp_frame(side, q).translation
        return float(np.linalg.norm(site - pose.translation))


def _follow_hands(world: World, state: WorldState):
    for side, (name, relative) in state.attachments.items():
        state.objects[name] = world.robot.hand_base(side, state.q) @ relative
        state.velocities[name] = np.zeros(3)


def step(world: World, state: WorldState, action, dt = None):
    """Advances the world by one control step.

    Parameters
    ----------
    world : World
        The world being simulated.
    state : WorldState
        The current state, which is not modified.
    action : np.ndarray
        Target joint positions (rad) for every joint.
    dt : float
        The control period; the configured `dt` if omitted.

    Returns
    -------
    The new `WorldState` and the `StepEvents` of the step.
    """
    action = np.asarray(action, dtype = np.float64).reshape(-1)
    if action.shape[0] != world.robot.num_joints:
        raise ContractViolationError(
            f"Expected an action for each of the {world.robot.num_joints} "
            f"joints, got {action.shape[0]} values.")
    if not np.all(np.isfinite(action)):
        raise ContractViolationError(
            f"The action contains non-finite values at joints "
            f"{np.flatnonzero(~np.isfinite(action)).tolist()}.")

    physics = world.config.physics
    table = world.config.table
    dt = physics.dt if dt is None else dt
    h = dt / physics.substeps
    lower, upper = world.robot.limits
    mode = world.config.torque_mode

    state = state.copy()
    events = StepEvents()
    q, qd = state.q, state.qd
    free = [n for n in world.objects if state.attached(n) is None]
    for _ in range(physics.substeps):
        tau = compute_joint_torque(world.actuators, action, q, qd, mode = mode)
        qd = qd + h * tau / physics.inertia
        q = q + h * qd
        at_limit = (q < lower) | (q > upper)
        if at_limit.any():
            q = np.clip(q, lower, upper)
            qd = np.where(at_limit, 0.0, qd)
            events.at_limits += int(at_limit.sum())

        for name in free:
            pose, velocity = state.objects[name], state.velocities[name]
            floor = table.height + world.objects[name].support_height(pose)
            if pose.translation[2] <= floor and velocity[2] <= 0.0:
                continue
            velocity = velocity + np.array([0.0, 0.0, -physics.gravity * h])
            position = pose.translation + h * velocity
            if position[2] <= floor:
                position[2] = floor
                velocity = np.zeros(3)
                events.landed.append(name)
            state.objects[name] = Pose(pose.rotation, position)
            state.velocities[name] = velocity

    state.q, state.qd = q, qd
    _follow_hands(world, state)
    state.step += 1
    state.segment_step += 1
    return state, events


def update_grasp_attachments(world: World, state: WorldState,
                             grasp: GraspSpec = None, frozen = None):
    """Attaches objects to closed hands and releases them from open ones.

    A hand attaches the nearest free object once its mean fingertip to
    surface distance falls under `attach_dist` while its closure
    exceeds `attach_closure`, unless its fingers are frozen open. An
    attached object is released when the closure falls under
    `release_aperture` or the fingertips move beyond `release_dist`.
    The relative pose is latched at attach time.

    Returns the new state and the list of `(event, hand, object)` changes.
    """
    grasp = grasp or world.config.grasp
    frozen = frozen or {}
    state = state.copy()
    changes = []
    robot = world.robot
    for side in robot.sides:
        closure = robot.closure(side, state.q)
        if side in state.attachments:
            name, _ = state.attachments[side]
            distance = world.fingertip_distance(side, state.q, name, state.objects[name])
            if closure < grasp.release_aperture or distance > grasp.release_dist:
                del state.attachments[side]
                state.velocities[name] = np.zeros(3)
                changes.append(('detach', side, name))
            continue
        if frozen.get(side, False) or closure <= grasp.attach_closure:
            continue
        candidates = []
        for name in world.objects:
            if state.attached(name) is not None:
                continue
            distance = world.fingertip_distance(side, state.q, name, state.objects[name])
            if distance < grasp.attach_dist:
                candidates.append((distance, name))
        if candidates:
            _, name = min(candidates)
            relative = robot.hand_base(side, state.q).inverse() @ state.objects[name]
            state.attachments[side] = (name, relative)
            state.velocities[name] = np.zeros(3)
            changes.append(('attach', side, name))
    return state, changes
