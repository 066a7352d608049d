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
The segment-driven training environment.

`DemoBotEnv` replays a segmented demonstration: every control step, the
base action of the current segment is available to the policy, which
commands full-body joint targets; the world is stepped, grasps are
updated, and the stage-gated reward is computed. When the current
stage succeeds, the environment captures a snapshot and advances to
the next segment. Episodes end when the last stage succeeds or on a
failure.

Observations are the concatenation of

    q, q̇, the base action (zeros unless
        `base_in_obs`)                             (3 x joints)
    per object: position, orientation, and the
        offset of its keypoints from their goal     (3 + 4 + 3K)
    per hand: grasp site position, closure,
        and whether it holds an object              (3 + 1 + 1)
    the one-hot current segment                     (segments)
    the progress through the current segment       (1)
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from demobot.framework import Parameters
from demobot.backend.config import thread_count
from demobot.errors import ConfigurationError, ContractViolationError
from demobot.prior.segments import Segment, concatenate_segments
from demobot.rewards.curriculum import CurriculumState, fingers_frozen
from demobot.rewards.keypoints import body_keypoints, goal_distance, object_keypoints
from demobot.rewards.reward import Measurements, StageEvents, compute_reward
from demobot.sim.actuator import sample_actuator_params
from demobot.sim.config import EnvConfig, load_env_config
from demobot.sim.randomization import randomize_initial_poses
from demobot.sim.state import WorldState, restore_state, serialize_state
from demobot.sim.world import World, step, update_grasp_attachments
from demobot.utils.logging import log
from demobot.utils.random import lane_rng


@dataclass(repr = False)
class EnvOptions(Parameters):
    """Switches of the environment.

    Parameters
    ----------
    temporal_segments : bool
        Index base actions within the current segment. When off, base
        actions are indexed by episode time over the whole demonstration
        and the segment is hidden from the observation.
    randomize_actuators : bool
        Resample actuator parameters at the start of every episode.
    randomize_objects : bool
        Randomize initial object poses at the start of every episode.
    resample_on_restore : bool
        Resample actuator parameters when an episode starts from a
        snapshot, instead of keeping those stored in the snapshot.
    off_table_margin : float
        How far (m) below the table an object may sink before the
        episode fails.
    base_in_obs : bool
        Observe the demonstration's base action. Off for policies
        trained without the demonstration, which see zeros instead.
    """
    temporal_segments: bool = True
    randomize_actuators: bool = True
    randomize_objects: bool = True
    resample_on_restore: bool = False
    off_table_margin: float = 0.05
    base_in_obs: bool = True


class DemoBotEnv(object):
    """A single environment lane.

    Parameters
    ----------
    segments : list of Segment
        The demonstration's temporal segments.
    task : str
        The task, naming the object layout in the environment config.
    config : EnvConfig or str
        The environment config.
    options : EnvOptions
        Environment switches.
    curriculum : CurriculumState
        The shared curriculum; owned and updated by the trainer.
    seed : int
        The master seed; this lane's stream derives from `(seed, lane)`.
    lane : int
        The index of this lane.
    """

    def __init__(self, segments: Sequence[Segment], task: str,
                 config = 'desk', options: EnvOptions = None,
                 curriculum: CurriculumState = None, seed = 0, lane = 0):
        if not segments:
            raise ConfigurationError("An environment needs at least one segment.")
        self._config = config if isinstance(config, EnvConfig) else load_env_config(config)
        self._options = options or EnvOptions()
        self._curriculum = curriculum or CurriculumState(self._config.curriculum)
        self._segments = list(segments)
        self._layout = self._config.task(task)
        self._task = task
        self._lane = lane
        self._rng = lane_rng(seed, lane)

        robot = self._config.build_robot(self._layout.sides)
        width = self._segments[0].base_actions.shape[1]
        if width != robot.num_joints:
            raise ConfigurationError(
                f"The segments command {width} joints, but the {task} robot "
                f"({list(self._layout.sides)}) has {robot.num_joints}.")
        self._world = World(self._config, robot, list(self._layout.initial))
        self._nominal = self._config.nominal_poses(task)
        self._replay = concatenate_segments(self._segments)
        self._max_steps = int(np.ceil(
            self._config.episode.max_steps_factor * len(self._replay)))

        # Goal keypoints of every object at every segment's keyframe.
        self._goal_keypoints = [
            {name: object_keypoints(self._world.objects[name], pose)
             for name, pose in s.goals.items() if name in self._world.objects}
            for s in self._segments]
        self._num_keypoints = {name: len(body_keypoints(spec))
                               for name, spec in self._world.objects.items()}

        self._state: Optional[WorldState] = None
        self._events = StageEvents()
        self._stage_hands = set()
        self._episode_steps = 0
        self._done = True

    def __repr__(self):
        return f"<DemoBotEnv {self._task} lane={self._lane}: " \
               f"{len(self._segments)} segments>"

    @property
    def world(self) -> World:
        return self._world

    @property
    def robot(self):
        return self._world.robot

    @property
    def segments(self) -> List[Segment]:
        return self._segments

    @property
    def num_segments(self):
        return len(self._segments)

    @property
    def state(self) -> WorldState:
        return self._state

    @property
    def events(self) -> StageEvents:
        return self._events

    @property
    def curriculum(self):
        return self._curriculum

    @curriculum.setter
    def curriculum(self, value):
        self._curriculum = value

    @property
    def rng(self):
        return self._rng

    @property
    def demo_length(self):
        return len(self._replay)

    @property
    def max_steps(self):
        return self._max_steps

    @property
    def action_dim(self):
        return self.robot.num_joints

    @property
    def obs_dim(self):
        n = self.robot.num_joints
        objects = sum(7 + 3 * k for k in self._num_keypoints.values())
        return 3 * n + objects + 5 * len(self.robot.sides) + self.num_segments + 1

    @property
    def limits(self):
        return self.robot.limits

    def snapshot(self) -> bytes:
        return serialize_state(self._state)

    def base_action(self):
        """The demonstration's joint targets for the current step."""
        state = self._state
        if self._options.temporal_segments:
            segment = self._segments[state.segment]
            return segment.base_actions[min(state.segment_step, len(segment) - 1)]
        return self._replay[min(state.step, len(self._replay) - 1)]

    def frozen_hands(self):
        return {side: fingers_frozen(self._curriculum, side in self._state.reached)
                for side in self.robot.sides}

    def action_mask(self):
        """Which action dimensions the next step executes.

        Finger joints of hands held open before their grasp are zeroed
        by `step`, so they are False here.
        """
        mask = np.ones(self.robot.num_joints, dtype = bool)
        for side, is_frozen in self.frozen_hands().items():
            if is_frozen:
                _, hand = self.robot.slices(side)
                mask[hand] &= ~self.robot.finger_mask[hand]
        return mask

    def reset(self, snapshot: bytes = None):
        """Starts an episode, from the initial state or a snapshot.

        Actuator parameters are resampled (when randomized) for episodes
        starting from the initial state; episodes starting from a
        snapshot keep the parameters stored in it unless
        `resample_on_restore` is set.
        """
        template = self._world.actuator_template
        actuators = sample_actuator_params(template, self._rng) \
            if self._options.randomize_actuators else template
        if snapshot is not None:
            state = restore_state(snapshot)
            if not 0 <= state.segment < self.num_segments:
                raise ContractViolationError(
                    f"The snapshot is at segment {state.segment}, but the "
                    f"demonstration has {self.num_segments} segments.")
            state.segment_step = 0
            if state.actuators is not None and not self._options.resample_on_restore:
                actuators = state.actuators
        else:
            poses = randomize_initial_poses(
                self._config.randomization, self._nominal, self._rng) \
                if self._options.randomize_objects else dict(self._nominal)
            state = self._world.initial_state(self._segments[0].base_actions[0], poses)
        self._world.actuators = actuators
        state.actuators = actuators
        self._state = state
        self._events = StageEvents()
        self._stage_hands = set()
        self._episode_steps = 0
        self._done = False
        return self.observation()

    def measure(self, state: WorldState = None):
        """The reward `Measurements` of every hand paired in the current stage."""
        state = state or self._state
        segment = self._segments[state.segment]
        goals = self._goal_keypoints[state.segment]
        out = {}
        for side, name in segment.pairs.items():
            spec, pose = self._world.objects[name], state.objects[name]
            out[side] = Measurements(
                d_h2o = self._world.hand_distance(side, state.q, pose),
                d_f2o = self._world.fingertip_distance(side, state.q, name, pose),
                d_goal = goal_distance(object_keypoints(spec, pose), goals[name]),
                lift = float(pose.translation[2] - state.initial[name].translation[2]))
        return out

    def _stage_succeeded(self, segment: Segment, measurements):
        spec = self._config.reward
        if segment.phase == 'goal':
            if not measurements:
                return all(goal_distance(object_keypoints(
                    self._world.objects[name], self._state.objects[name]), kps)
                    < self._curriculum.delta_goal
                    for name, kps in self._goal_keypoints[segment.index].items())
            return all(m.d_goal < self._curriculum.delta_goal
                       for m in measurements.values())
        for side, m in measurements.items():
            if (segment.phase == 'reach' and m.d_h2o < spec.delta_reach) or \
                    (segment.phase == 'grasp_lift' and m.lift > spec.delta_lift):
                self._stage_hands.add(side)
        return set(measurements) <= self._stage_hands

    def _failure(self, measurements):
        table = self._config.table
        for name, pose in self._state.objects.items():
            if not table.contains(pose.translation) or pose.translation[2] < \
                    table.height - self._options.off_table_margin:
                return 'off_table'
        limit = self._config.episode.goal_distance_limit
        if any(m.d_goal > limit for m in measurements.values()):
            return 'goal_distance'
        if self._episode_steps >= self._max_steps:
            return 'timeout'
        return None

    def step(self, action):
        """Applies full-body joint targets for one control step.

        Returns
        -------
        The observation, the reward, whether the episode ended, and an
        info dictionary with the reward terms, the completed sub-goal
        count, the failure reason (if any) and, when a non-final stage
        succeeded, the snapshot taken after advancing past it.
        """
        if self._done:
            raise ContractViolationError(
                "The episode has ended; call `reset()` before stepping.")
        action = np.array(action, dtype = np.float64).reshape(-1)
        frozen = self.frozen_hands()
        action[~self.action_mask()] = 0.0

        state, _ = step(self._world, self._state, action)
        state, changes = update_grasp_attachments(self._world, state, frozen = frozen)
        self._state = state
        self._episode_steps += 1

        index = state.segment
        segment = self._segments[index]
        measurements = self.measure()
        if segment.phase == 'reach':
            for side, m in measurements.items():
                if m.d_h2o < self._config.reward.delta_reach:
                    state.reached.add(side)
        success = self._stage_succeeded(segment, measurements)
        last = index == self.num_segments - 1
        switch = success and not last and self._segments[index + 1].keyframe.switch

        result = compute_reward(
            measurements, index, segment.phase, self._config.reward,
            self._curriculum, self._events, step = self._episode_steps,
            sync = segment.keyframe.sync, switch_entered = switch)

        info = {'stage': index, 'subgoals': index, 'terms': result.terms,
                'success': False, 'failure': None, 'snapshot': None,
                'grasp_changes': changes, 'lane': self._lane}
        if success:
            info['subgoals'] = index + 1
            if last:
                info['success'] = True
                self._done = True
            else:
                state.segment += 1
                state.segment_step = 0
                # a failure on this step belongs to the next stage
                info['stage'] = state.segment
                self._stage_hands = set()
                info['snapshot'] = serialize_state(state)
                info['snapshot_stage'] = index
        if not self._done:
            failure = self._failure(measurements)
            if failure is not None:
                info['failure'] = failure
                self._done = True
        info['episode_steps'] = self._episode_steps
        return self.observation(), result.reward, self._done, info

    def observation(self):
        state = self._state
        robot = self.robot
        base = self.base_action() if self._options.base_in_obs \
            else np.zeros(robot.num_joints)
        parts = [state.q, state.qd, base]
        goals = self._goal_keypoints[state.segment]
        for name, spec in self._world.objects.items():
            pose = state.objects[name]
            offset = object_keypoints(spec, pose) - goals[name] \
                if name in goals else np.zeros((self._num_keypoints[name], 3))
            parts.extend([pose.translation, pose.rotation, offset.reshape(-1)])
        for side in robot.sides:
            parts.append(robot.grasp_frame(side, state.q).translation)
            parts.append([robot.closure(side, state.q),
                          float(side in state.attachments)])
        one_hot = np.zeros(self.num_segments)
        if self._options.temporal_segments:
            one_hot[state.segment] = 1.0
            segment = self._segments[state.segment]
            progress = min(1.0, state.segment_step / max(1, len(segment) - 1))
        else:
            progress = min(1.0, state.step / max(1, len(self._replay) - 1))
        parts.extend([one_hot, [progress]])
        return np.concatenate([np.asarray(p, dtype = np.float64).reshape(-1)
                               for p in parts])


class VecEnv(object):
    """A vector of environment lanes sharing one curriculum.

    Lanes are stepped on a thread pool whose size is capped by the
    `DEMOBOT_THREADS` environment variable; with one thread, lanes are
    stepped sequentially. Lanes share no mutable state besides the
    (read-only during rollouts) curriculum.
    """

    def __init__(self, envs: Sequence[DemoBotEnv]):
        if not envs:
            raise ConfigurationError("A vector environment needs at least one lane.")
        self._envs = list(envs)
        dims = {(e.obs_dim, e.action_dim) for e in self._envs}
        if len(dims) != 1:
            raise ConfigurationError(
                f"All lanes must share observation and action sizes, got {dims}.")
        self._threads = min(thread_count(), len(self._envs))
        self._pool = ThreadPoolExecutor(self._threads) if self._threads > 1 else None
        if self._pool is not None:
            log(f"Stepping {len(self._envs)} lanes on {self._threads} threads.", 'debug')

    @classmethod
    def make(cls, segments, task, num_lanes, config = 'desk', options = None,
             curriculum = None, seed = 0):
        config = config if isinstance(config, EnvConfig) else load_env_config(config)
        curriculum = curriculum or CurriculumState(config.curriculum)
        return cls([DemoBotEnv(segments, task, config, options, curriculum,
                               seed = seed, lane = lane)
                    for lane in range(num_lanes)])

    def __len__(self):
        return len(self._envs)

    def __getitem__(self, lane) -> DemoBotEnv:
        return self._envs[lane]

    def __iter__(self):
        return iter(self._envs)

    @property
    def obs_dim(self):
        return self._envs[0].obs_dim

    @property
    def action_dim(self):
        return self._envs[0].action_dim

    def _map(self, fn, *args):
        if self._pool is None:
            return [fn(*a) for a in zip(*args)]
        return list(self._pool.map(fn, *args))

    def reset(self, snapshots = None):
        snapshots = snapshots or [None] * len(self)
        return np.stack(self._map(lambda e, s: e.reset(s), self._envs, snapshots))

    def base_actions(self):
        return np.stack([e.base_action() for e in self._envs])

    def action_masks(self):
        return np.stack([e.action_mask() for e in self._envs])

    def step(self, actions):
        actions = np.asarray(actions, dtype = np.float64)
        if actions.shape != (len(self), self.action_dim):
            raise ContractViolationError(
                f"Expected actions of shape {(len(self), self.action_dim)}, "
                f"got {actions.shape}.")
        results = self._map(lambda e, a: e.step(a), self._envs, list(actions))
        obs, rewards, dones, infos = zip(*results)
        return np.stack(obs), np.array(rewards), np.array(dones), list(infos)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None
