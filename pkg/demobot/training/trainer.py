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
The residual reinforcement learning loop.

`Trainer` collects rollouts from a vector of environment lanes, where
every executed action is the demonstration's base action plus the
policy's clipped residual, updates the policy with PPO, anneals the
goal threshold from finished episodes, and restarts failed lanes with
the success-gated reset strategy.
"""

import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from demobot.framework import Parameters
from demobot.backend.random import set_seed
from demobot.errors import ConfigurationError, TrainingAbortedError
from demobot.models.checkpoint import save_checkpoint
from demobot.models.policy import RESIDUAL_CLIP
from demobot.models.ppo import PPOAgent, PpoConfig
from demobot.models.storage import RolloutBuffer
from demobot.prior.formats import read_segments
from demobot.rewards.curriculum import CurriculumState, update_curriculum
from demobot.sim.config import load_env_config
from demobot.sim.env import EnvOptions, VecEnv
from demobot.training.metrics import (
    EpisodeTracker, MetricsWriter, RewardTermWriter,
    summarize_episodes, write_manifest)
from demobot.training.resets import (
    ResetPolicy, SnapshotStore, choose_reset, record_success)
from demobot.utils.data import load_yaml
from demobot.utils.io import create_dir
from demobot.utils.logging import log, tqdm

TRAIN_MODES = ('prior_plus_rl', 'rl_only')
FINAL_CHECKPOINT = 'checkpoint_final.pt'


@dataclass(repr = False)
class RunConfig(Parameters):
    """Configuration of a training run.

    Parameters
    ----------
    segments : str
        The segment file produced by processing a demonstration.
    task : str
        The task layout in the environment config. Read from the
        segment file's metadata when left empty.
    env : str
        The environment config (a bundled name or a path).
    out : str
        The output directory.
    seed : int
        The master seed.
    num_lanes : int
        The number of environment lanes.
    budget_steps : int
        The total number of environment steps (across lanes).
    eval_episodes : int
        Episodes of the final evaluation (0 skips it).
    checkpoint_every : int
        Updates between periodic checkpoints.
    mode : str
        `prior_plus_rl` (residual on the base actions) or `rl_only`
        (zero base actions, unclipped policy output).
    p_init : float
        The probability of restarting a failed lane from the initial state.
    residual_clip : bool
        Clip residuals to ±0.25 rad.
    pre_grasp : bool
        Hold hands open until they reach their objects.
    temporal_segments : bool
        Replay base actions per segment (otherwise by episode time).
    success_resets : bool
        Restart failed lanes from success snapshots (otherwise `p_init = 1`).
    randomize_actuators, randomize_objects, resample_on_restore : bool
        Environment randomization switches.
    verbose_rewards : bool
        Write a per-step reward term breakdown.
    ppo : dict
        Overrides of the `PpoConfig` defaults.
    """
    segments: str = ''
    task: str = ''
    env: str = 'desk'
    out: str = 'demobot_runs'
    seed: int = 0
    num_lanes: int = 16
    budget_steps: int = 200_000
    eval_episodes: int = 50
    checkpoint_every: int = 50
    mode: str = 'prior_plus_rl'
    p_init: float = 0.9
    residual_clip: bool = True
    pre_grasp: bool = True
    temporal_segments: bool = True
    success_resets: bool = True
    randomize_actuators: bool = True
    randomize_objects: bool = True
    resample_on_restore: bool = False
    verbose_rewards: bool = False
    ppo: dict = field(default_factory = dict)

    def validate(self):
        if self.mode not in TRAIN_MODES:
            raise ConfigurationError(
                f"Expected a training mode in {TRAIN_MODES}, got '{self.mode}'.")
        if self.num_lanes < 1 or self.budget_steps < 1:
            raise ConfigurationError("`num_lanes` and `budget_steps` must be positive.")
        if self.checkpoint_every < 1:
            raise ConfigurationError("`checkpoint_every` must be positive.")
        ResetPolicy(p_init = self.p_init)
        PpoConfig.from_dict(self.ppo)

    @property
    def ppo_config(self) -> PpoConfig:
        return PpoConfig.from_dict(self.ppo)

    @property
    def reset_policy(self) -> ResetPolicy:
        return ResetPolicy(p_init = self.p_init if self.success_resets else 1.0)

    @property
    def clip(self):
        if self.mode == 'rl_only' or not self.residual_clip:
            return None
        return RESIDUAL_CLIP

    def env_options(self) -> EnvOptions:
        return EnvOptions(temporal_segments = self.temporal_segments,
                          randomize_actuators = self.randomize_actuators,
                          randomize_objects = self.randomize_objects,
                          resample_on_restore = self.resample_on_restore,
                          base_in_obs = self.mode != 'rl_only')

    def check_paths(self):
        if not os.path.isfile(self.segments):
            raise ConfigurationError(
                f"The segment file '{self.segments}' does not exist.")
        create_dir(self.out)
        if not os.access(self.out, os.W_OK):
            raise ConfigurationError(
                f"The output directory '{self.out}' is not writable.")


def load_run_config(path = None, **overrides) -> RunConfig:
    """Loads a run config from YAML, applying (non-None) overrides."""
    contents = load_yaml(path) if path is not None else {}
    contents.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(contents)


class Trainer(object):
    """Trains a residual policy on a processed demonstration.

    Parameters
    ----------
    config : RunConfig
        The run configuration.
    segments : list of Segment
        The segments; read from `config.segments` when not given.
    task : str
        The task; defaults to `config.task`, then to the segment file's
        recorded task.
    """

    def __init__(self, config: RunConfig, segments = None, task = None):
        self.config = config
        if segments is None:
            config.check_paths()
            segments, meta = read_segments(config.segments)
            task = task or config.task or meta.get('extra', {}).get('task')
        else:
            create_dir(config.out)
        task = task or config.task
        if not task:
            raise ConfigurationError(
                "No task was given, and the segment file does not record one.")
        self.task = task
        self.segments = list(segments)

        env_config = load_env_config(config.env)
        self.curriculum = CurriculumState(
            env_config.curriculum.replace(pre_grasp = config.pre_grasp))
        self.envs = VecEnv.make(
            self.segments, task, config.num_lanes, env_config,
            options = config.env_options(), curriculum = self.curriculum,
            seed = config.seed)
        self.ppo_config = config.ppo_config
        self.agent = PPOAgent(self.envs.obs_dim, self.envs.action_dim,
                              self.ppo_config, residual_clip = config.clip,
                              seed = config.seed)
        self.store = SnapshotStore(config.num_lanes)
        self.reset_policy = config.reset_policy
        self.rng = np.random.default_rng([int(config.seed), 0x5EED])

        self.episodes = np.zeros(config.num_lanes, dtype = int)
        self.env_steps = 0
        self.update_idx = 0
        self.last_checkpoint: Optional[str] = None
        self.metrics = MetricsWriter(config.out, len(self.segments))
        self.reward_terms = RewardTermWriter(config.out) \
            if config.verbose_rewards else None

    def __repr__(self):
        return f"<Trainer {self.task}: {len(self.envs)} lanes, " \
               f"{len(self.segments)} segments>"

    @property
    def num_updates(self):
        per_update = self.config.num_lanes * self.ppo_config.steps_per_env
        return max(1, self.config.budget_steps // per_update)

    def base_actions(self):
        if self.config.mode == 'rl_only':
            return np.zeros((len(self.envs), self.envs.action_dim))
        return self.envs.base_actions()

    def _reset_lane(self, lane, info, counts):
        """Restarts a finished lane; returns its first observation."""
        if info['success']:
            snapshot, kind = None, 's0'
        else:
            snapshot, kind = choose_reset(
                self.store, lane, info['stage'], self.reset_policy, self.rng)
        counts[kind] += 1
        self.episodes[lane] += 1
        return self.envs[lane].reset(snapshot)

    def collect(self, obs, buffer: RolloutBuffer, tracker: EpisodeTracker, counts):
        """Fills the buffer with one rollout; returns the last observations."""
        for t in range(buffer.steps):
            base = self.base_actions()
            masks = self.envs.action_masks()
            act, nobs = self.agent.act(obs, base, update = True, mask = masks)
            next_obs, rewards, dones, infos = self.envs.step(act.action)
            if not np.all(np.isfinite(rewards)):
                raise TrainingAbortedError(
                    "Encountered a non-finite reward.", diagnostics = {
                        'update_idx': self.update_idx,
                        'lanes': np.flatnonzero(~np.isfinite(rewards)).tolist()},
                    checkpoint = self.last_checkpoint)
            for lane, info in enumerate(infos):
                if info['snapshot'] is not None:
                    record_success(self.store, lane, info['snapshot_stage'],
                                   info['snapshot'], episode = int(self.episodes[lane]))
            if self.reward_terms is not None:
                self.reward_terms.add(self.update_idx, t, rewards, infos)
            tracker.step(rewards, dones, infos)
            for lane in np.flatnonzero(dones):
                update_curriculum(self.curriculum, infos[lane]['success'])
                next_obs[lane] = self._reset_lane(lane, infos[lane], counts)
            buffer.add(nobs, act, rewards, dones, base, masks = masks)
            obs = next_obs
            self.env_steps += len(self.envs)
        return obs

    def checkpoint(self, name = None):
        name = name or f'checkpoint_{self.update_idx:06d}.pt'
        path = save_checkpoint(
            os.path.join(self.config.out, name), self.agent,
            curriculum = self.curriculum, resets = self.store.metadata(),
            run = {**self.config.to_dict(), 'task': self.task},
            progress = {'update_idx': self.update_idx, 'env_steps': self.env_steps})
        self.last_checkpoint = path
        return path

    def train(self, show_progress = True):
        """Runs the training loop; returns the path of the final checkpoint."""
        config = self.config
        set_seed(config.seed)
        write_manifest(config.out, {**config.to_dict(), 'task': self.task},
                       config.seed, ppo = self.ppo_config.to_dict())
        log(f"Training on {self.task} for {self.num_updates} updates "
            f"({config.num_lanes} lanes).", 'info')

        obs = self.envs.reset()
        buffer = RolloutBuffer(len(self.envs), self.ppo_config.steps_per_env,
                               self.envs.obs_dim, self.envs.action_dim)
        tracker = EpisodeTracker(len(self.envs))
        updates = range(self.num_updates)
        if show_progress:
            updates = tqdm(updates, desc = 'Training')
        try:
            for update_idx in updates:
                self.update_idx = update_idx
                counts = Counter()
                obs = self.collect(obs, buffer, tracker, counts)
                try:
                    stats = self.agent.update(buffer, obs)
                except TrainingAbortedError as e:
                    e.diagnostics['update_idx'] = self.update_idx
                    e.checkpoint = self.last_checkpoint
                    raise
                row = {'update_idx': self.update_idx, 'env_steps': self.env_steps,
                       'delta_goal': self.curriculum.delta_goal,
                       **summarize_episodes(tracker.drain(), len(self.segments)),
                       **{f'resets_{k}': counts.get(k, 0)
                          for k in ('s0', 'snapshot', 'fallback')},
                       **stats}
                self.metrics.add(row)
                if (self.update_idx + 1) % config.checkpoint_every == 0:
                    self.checkpoint()
        finally:
            self.metrics.flush()
            if self.reward_terms is not None:
                self.reward_terms.flush()
            self.envs.close()
        log(f"Finished training at delta_goal = {self.curriculum.delta_goal:.4g} m.", 'info')
        return self.checkpoint(FINAL_CHECKPOINT)
