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

import pytest
import numpy as np

from demobot.errors import ContractViolationError
from demobot.kinematics import Pose
from demobot.sim import EnvConfig, World, load_env_config, step, update_grasp_attachments
from demobot.utils.data import load_yaml


@pytest.fixture(scope = 'module')
def config():
    return load_env_config('desk')


@pytest.fixture
def world(config):
    return World(config, config.build_robot(), ['base', 'peg'])


@pytest.fixture
def resting(world):
    return world.initial_state(world.robot.home(), world.config.nominal_poses('sync_assembly'))


def _closed(robot, q, side, angle = 0.8):
    q = q.copy()
    _, hand = robot.slices(side)
    fingers = np.zeros(robot.num_joints, dtype = bool)
    fingers[hand] = robot.finger_mask[hand]
    q[fingers] = angle
    return q


def test_pd_equilibrium(world, resting):
    state, events = step(world, resting, resting.q)
    assert np.allclose(state.q, resting.q, atol = 1e-9)
    assert np.allclose(state.qd, 0.0, atol = 1e-9)
    assert all(state.objects[n] == resting.objects[n] for n in resting.objects)
    assert state.step == resting.step + 1
    assert events.landed == []


def test_free_fall(world, resting):
    state = resting.copy()
    start = state.objects['peg'].translation[2] + 2.0
    state.objects['peg'] = state.objects['peg'].translated([0.0, 0.0, 2.0])
    steps = 8
    for _ in range(steps):
        state, _ = step(world, state, resting.q)
    t = steps * world.config.physics.dt
    drop = start - state.objects['peg'].translation[2]
    assert drop == pytest.approx(0.5 * 9.81 * t ** 2, rel = 0.05)


def test_objects_rest_on_the_table(world, resting):
    state = resting.copy()
    state.objects['base'] = state.objects['base'].translated([0.0, 0.0, 0.3])
    landed = []
    for _ in range(40):
        state, events = step(world, state, resting.q)
        landed.extend(events.landed)
        floor = world.config.table.height + world.objects['base'].support_height(state.objects['base'])
        assert state.objects['base'].translation[2] >= floor - 1e-9
    assert landed == ['base']
    assert np.allclose(state.velocities['base'], 0.0)


def test_attached_object_follows_the_hand(world, resting):
    state = resting.copy()
    relative = Pose.from_rotvec([0.0, 0.3, 0.0], [0.1, 0.0, -0.05])
    state.attachments['right'] = ('peg', relative)
    rng = np.random.default_rng(0)
    for _ in range(10):
        action = resting.q + rng.normal(0, 0.1, world.robot.num_joints)
        state, _ = step(world, state, action)
        hand = world.robot.hand_base('right', state.q)
        assert (hand.inverse() @ state.objects['peg']).allclose(relative, atol = 1e-12)


def test_invalid_actions(world, resting):
    with pytest.raises(ContractViolationError):
        step(world, resting, resting.q[:-1])
    action = resting.q.copy()
    action[3] = np.nan
    with pytest.raises(ContractViolationError):
        step(world, resting, action)


@pytest.fixture
def big_box_world(config):
    contents = load_yaml('desk', kind = 'envs')
    contents['objects']['base']['half_extents'] = [0.3, 0.3, 0.3]
    config = EnvConfig(contents)
    return World(config, config.build_robot(), ['base', 'peg'])


def _around_fingers(world, q, side):
    state = world.initial_state(q, world.config.nominal_poses('sync_assembly'))
    center = world.fingertips(side, q).mean(axis = 0)
    state.objects['base'] = Pose.from_translation(center)
    return state


def test_closed_hand_attaches(big_box_world):
    world = big_box_world
    q = _closed(world.robot, world.robot.home(), 'left')
    state, changes = update_grasp_attachments(world, _around_fingers(world, q, 'left'))
    assert changes == [('attach', 'left', 'base')]
    assert state.attached('base') == 'left'


def test_open_or_frozen_hand_never_attaches(big_box_world):
    world = big_box_world
    q = world.robot.home()
    _, changes = update_grasp_attachments(world, _around_fingers(world, q, 'left'))
    assert changes == []
    q = _closed(world.robot, q, 'left')
    _, changes = update_grasp_attachments(
        world, _around_fingers(world, q, 'left'), frozen = {'left': True})
    assert changes == []


def test_grasp_holds_without_chatter(big_box_world):
    world = big_box_world
    q = _closed(world.robot, world.robot.home(), 'left')
    state = _around_fingers(world, q, 'left')
    count = 0
    for _ in range(100):
        state, changes = update_grasp_attachments(world, state)
        count += len(changes)
        state, _ = step(world, state, q)
    assert count == 1
    assert state.attached('base') == 'left'


def test_opening_the_hand_releases(big_box_world):
    world = big_box_world
    q = _closed(world.robot, world.robot.home(), 'left')
    state, _ = update_grasp_attachments(world, _around_fingers(world, q, 'left'))
    state.q = _closed(world.robot, state.q, 'left', angle = 0.1)
    state, changes = update_grasp_attachments(world, state)
    assert changes == [('detach', 'left', 'base')]
    assert state.attached('base') is None
