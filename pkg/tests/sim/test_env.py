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

from demobot.errors import ConfigurationError, ContractViolationError
from demobot.prior import Keyframe, Segment
from demobot.sim import DemoBotEnv, EnvOptions, VecEnv, load_env_config
from demobot.training import ResetPolicy, SnapshotStore, choose_reset, record_success

TASK = 'sync_assembly'
PAIRS = {'left': 'base', 'right': 'peg'}


@pytest.fixture(scope = 'module')
def config():
    return load_env_config('desk')


@pytest.fixture(scope = 'module')
def segments(config):
    # A settle stage whose goal is the resting layout, then a reach.
    robot = config.build_robot(config.task(TASK).sides)
    home = robot.home()
    ramp = home + 0.005 * np.arange(20)[:, None]
    goals = config.nominal_poses(TASK)
    return [Segment(0, Keyframe(4, 'goal'), 0, ramp[:5], goals),
            Segment(1, Keyframe(19, 'reach', PAIRS), 5, ramp[5:], goals)]


def _rollout(env, steps):
    observations, rewards, infos = [], [], []
    for _ in range(steps):
        obs, reward, done, info = env.step(env.base_action())
        observations.append(obs)
        rewards.append(reward)
        infos.append(info)
        if done:
            break
    return observations, rewards, infos


def test_observation_size(config, segments):
    env = DemoBotEnv(segments, TASK, config)
    obs = env.reset()
    assert obs.shape == (env.obs_dim, )
    assert env.action_dim == env.robot.num_joints == 42
    hidden = DemoBotEnv(segments, TASK, config, EnvOptions(temporal_segments = False))
    assert hidden.reset().shape == (hidden.obs_dim, )


def test_stage_success_advances_and_snapshots(config, segments):
    env = DemoBotEnv(segments, TASK, config, EnvOptions(randomize_objects = False))
    env.reset()
    _, _, done, info = env.step(env.base_action())
    assert not done
    assert info['subgoals'] == 1
    assert info['snapshot'] is not None and info['snapshot_stage'] == 0
    assert env.state.segment == 1 and env.state.segment_step == 0


def test_episode_times_out(config, segments):
    env = DemoBotEnv(segments, TASK, config, EnvOptions(randomize_objects = False))
    env.reset()
    _, _, infos = _rollout(env, 10 * env.max_steps)
    assert infos[-1]['failure'] == 'timeout'
    assert env.max_steps == int(np.ceil(2.0 * env.demo_length)) == 40
    assert infos[-1]['episode_steps'] == env.max_steps
    assert not infos[-1]['success']
    with pytest.raises(ContractViolationError):
        env.step(env.base_action())


def test_same_seed_same_trajectory(config, segments):
    a = DemoBotEnv(segments, TASK, config, seed = 3, lane = 1)
    b = DemoBotEnv(segments, TASK, config, seed = 3, lane = 1)
    assert np.array_equal(a.reset(), b.reset())
    obs_a, rewards_a, _ = _rollout(a, 15)
    obs_b, rewards_b, _ = _rollout(b, 15)
    assert all(np.array_equal(x, y) for x, y in zip(obs_a, obs_b))
    assert rewards_a == rewards_b


def test_lanes_draw_different_layouts(config, segments):
    vec = VecEnv.make(segments, TASK, 3, config, seed = 0)
    obs = vec.reset()
    assert obs.shape == (3, vec.obs_dim)
    assert not np.array_equal(obs[0], obs[1])
    vec.close()


def test_restored_snapshot_replays_identically(config, segments):
    env = DemoBotEnv(segments, TASK, config, EnvOptions(randomize_objects = False), seed = 5)
    env.reset()
    _, _, _, info = env.step(env.base_action())
    snapshot = info['snapshot']
    original, _, _ = _rollout(env, 10)

    other = DemoBotEnv(segments, TASK, config, EnvOptions(randomize_objects = False), seed = 99)
    other.reset(snapshot)
    assert other.state.segment == 1
    assert np.array_equal(other.world.actuators.alpha_p, env.world.actuators.alpha_p)
    restored, _, _ = _rollout(other, 10)
    assert all(np.array_equal(x, y) for x, y in zip(original, restored))


def test_resample_on_restore(config, segments):
    env = DemoBotEnv(segments, TASK, config, EnvOptions(randomize_objects = False))
    env.reset()
    _, _, _, info = env.step(env.base_action())
    other = DemoBotEnv(segments, TASK, config, EnvOptions(
        randomize_objects = False, resample_on_restore = True), seed = 1)
    other.reset(info['snapshot'])
    assert not np.array_equal(other.world.actuators.alpha_p, env.world.actuators.alpha_p)


def test_fingers_frozen_before_reach(config, segments):
    env = DemoBotEnv(segments, TASK, config, EnvOptions(randomize_objects = False))
    env.reset()
    assert all(env.frozen_hands().values())
    action = env.base_action().copy()
    action[env.robot.finger_mask] = 1.0
    env.step(action)
    for side in env.robot.sides:
        assert env.robot.closure(side, env.state.q) < 0.05


def test_vector_env_checks_actions(config, segments):
    vec = VecEnv.make(segments, TASK, 2, config)
    vec.reset()
    with pytest.raises(ContractViolationError):
        vec.step(np.zeros((3, vec.action_dim)))
    obs, rewards, dones, infos = vec.step(vec.base_actions())
    assert obs.shape == (2, vec.obs_dim) and rewards.shape == (2, )
    assert [info['lane'] for info in infos] == [0, 1]
    vec.close()


def test_segment_width_must_match_robot(config, segments):
    with pytest.raises(ConfigurationError):
        DemoBotEnv(segments, 'single_arm_multi_step', config)
    with pytest.raises(ConfigurationError):
        DemoBotEnv([], TASK, config)


def test_base_action_hidden_from_observation(config, segments):
    shown = DemoBotEnv(segments, TASK, config, EnvOptions(randomize_objects = False), seed = 2)
    hidden = DemoBotEnv(segments, TASK, config, EnvOptions(
        randomize_objects = False, base_in_obs = False), seed = 2)
    n = shown.robot.num_joints
    for _ in range(3):
        a, b = shown.reset(), hidden.reset()
        assert np.array_equal(a[2 * n:3 * n], shown.base_action())
        assert np.any(a[2 * n:3 * n] != 0.0)
        assert np.all(b[2 * n:3 * n] == 0.0)
        assert np.array_equal(np.delete(a, np.s_[2 * n:3 * n]),
                              np.delete(b, np.s_[2 * n:3 * n]))
        a, _, _, _ = shown.step(shown.base_action())
        b, _, _, _ = hidden.step(hidden.base_action())
        assert np.all(b[2 * n:3 * n] == 0.0)


def test_action_mask_excludes_frozen_fingers(config, segments):
    env = DemoBotEnv(segments, TASK, config, EnvOptions(randomize_objects = False))
    env.reset()
    mask = env.action_mask()
    assert np.array_equal(mask, ~env.robot.finger_mask)
    vec = VecEnv.make(segments, TASK, 2, config)
    vec.reset()
    assert vec.action_masks().shape == (2, vec.action_dim)
    vec.close()


def test_failure_on_stage_success_reports_next_stage(config, segments):
    # Every object counts as off the table, so the first step both
    # completes the settle stage and fails.
    env = DemoBotEnv(segments, TASK, config, EnvOptions(
        randomize_objects = False, off_table_margin = -1.0))
    env.reset()
    _, _, done, info = env.step(env.base_action())
    assert done and info['failure'] == 'off_table'
    assert info['subgoals'] == 1 and info['snapshot_stage'] == 0
    assert info['stage'] == 1

    store = SnapshotStore(1)
    record_success(store, 0, info['snapshot_stage'], info['snapshot'])
    snapshot, kind = choose_reset(store, 0, info['stage'], ResetPolicy(p_init = 0.0))
    assert kind == 'snapshot' and snapshot == info['snapshot']
