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
Evaluation of motion priors and trained policies.

Three modes are evaluated on freshly initialized episodes:

    prior_only      the base actions alone (Δa ≡ 0)
    rl_only         the policy alone, on zero base actions
    prior_plus_rl   base actions plus the policy's residual

Policies act deterministically, with frozen observation statistics.
The report is a histogram of the number of sub-goals reached.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from demobot.errors import ConfigurationError
from demobot.models.checkpoint import load_checkpoint, restore_agent
from demobot.models.ppo import PPOAgent
from demobot.rewards.curriculum import CurriculumState
from demobot.sim.config import load_env_config
from demobot.sim.env import DemoBotEnv, EnvOptions
from demobot.utils.logging import log, tqdm

EVAL_MODES = ('prior_only', 'rl_only', 'prior_plus_rl')


@dataclass
class EvalReport(object):
    """Sub-goals reached over a set of evaluation episodes."""
    mode: str
    num_subgoals: int
    subgoals: List[int] = field(default_factory = list)
    successes: List[bool] = field(default_factory = list)

    @property
    def episodes(self):
        return len(self.subgoals)

    @property
    def histogram(self):
        """Episode counts for 0 through `num_subgoals` sub-goals reached."""
        return np.bincount(self.subgoals, minlength = self.num_subgoals + 1).tolist()

    @property
    def mean_subgoals(self):
        return float(np.mean(self.subgoals)) if self.subgoals else 0.0

    @property
    def success_rate(self):
        return float(np.mean(self.successes)) if self.successes else 0.0

    def summary(self):
        return f"{self.mean_subgoals:.2f}/{self.num_subgoals}"

    def to_dict(self):
        return {'mode': self.mode, 'episodes': self.episodes,
                'num_subgoals': self.num_subgoals, 'histogram': self.histogram,
                'mean_subgoals': self.mean_subgoals,
                'success_rate': self.success_rate,
                'subgoals': list(self.subgoals)}


def run_episode(env: DemoBotEnv, mode, agent: PPOAgent = None):
    """Runs one deterministic episode; returns `(sub-goals, success)`."""
    obs = env.reset()
    while True:
        base = env.base_action() if mode != 'rl_only' else np.zeros(env.action_dim)
        if mode == 'prior_only':
            action = base
        else:
            act, _ = agent.act(obs, base, mode = 'deterministic')
            action = act.action
        obs, _, done, info = env.step(action)
        if done:
            return info['subgoals'], info['success']


def evaluate(segments, task, mode, agent: PPOAgent = None, episodes = 50,
             env = 'desk', options: EnvOptions = None,
             curriculum: CurriculumState = None, seed = 0, show_progress = False):
    """Evaluates a mode over `episodes` episodes.

    Parameters
    ----------
    segments : list of Segment
        The demonstration's segments.
    task : str
        The task layout.
    mode : str
        One of `prior_only`, `rl_only` or `prior_plus_rl`.
    agent : PPOAgent
        The trained agent (not needed for `prior_only`).
    episodes : int
        The number of episodes.
    env : EnvConfig or str
        The environment config.
    options : EnvOptions
        Environment switches; should match those used in training.
    curriculum : CurriculumState
        Supplies the goal threshold; the environment's initial
        threshold is used when not given. Never updated here.
    seed : int
        The evaluation seed.
    """
    if mode not in EVAL_MODES:
        raise ConfigurationError(
            f"Expected an evaluation mode in {EVAL_MODES}, got '{mode}'.")
    if mode != 'prior_only' and agent is None:
        raise ConfigurationError(f"Evaluating `{mode}` requires a trained checkpoint.")
    options = options or EnvOptions()
    if mode == 'rl_only':
        options = options.replace(base_in_obs = False)
    env_config = env if not isinstance(env, str) else load_env_config(env)
    curriculum = curriculum or CurriculumState(env_config.curriculum)
    lane = DemoBotEnv(segments, task, env_config, options, curriculum, seed = seed)
    if agent is not None and agent.policy.obs_dim != lane.obs_dim:
        raise ConfigurationError(
            f"The checkpoint's policy observes {agent.policy.obs_dim} values, "
            f"but the {task} environment produces {lane.obs_dim}.")

    report = EvalReport(mode, len(segments))
    iterator = range(episodes)
    if show_progress:
        iterator = tqdm(iterator, desc = f'Evaluating {mode}')
    for _ in iterator:
        subgoals, success = run_episode(lane, mode, agent)
        report.subgoals.append(int(subgoals))
        report.successes.append(bool(success))
    log(f"Evaluated {mode} over {episodes} episodes: {report.summary()} "
        f"sub-goals, success rate {report.success_rate:.2f}.", 'info')
    return report


def evaluate_checkpoint(path, segments, mode, episodes = 50, seed = 0,
                        task = None, env = None, show_progress = False):
    """Evaluates a mode with the agent and settings stored in a checkpoint.

    Raises a `ConfigurationError` when the mode does not match the
    checkpoint: `rl_only` policies were trained without base actions,
    and residual policies with them.
    """
    contents = load_checkpoint(path)
    run = contents['run']
    trained = run.get('mode', 'prior_plus_rl')
    if mode != 'prior_only' and mode != trained:
        raise ConfigurationError(
            f"The checkpoint at {path} was trained in `{trained}` mode and "
            f"cannot be evaluated in `{mode}` mode.")
    agent = restore_agent(contents) if mode != 'prior_only' else None
    curriculum = CurriculumState.from_state_dict(contents['curriculum']) \
        if contents.get('curriculum') is not None else None
    options = EnvOptions(
        temporal_segments = run.get('temporal_segments', True),
        randomize_actuators = run.get('randomize_actuators', True),
        randomize_objects = run.get('randomize_objects', True))
    return evaluate(segments, task or run['task'], mode, agent = agent,
                    episodes = episodes, env = env or run.get('env', 'desk'),
                    options = options, curriculum = curriculum, seed = seed,
                    show_progress = show_progress)
