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
Training metrics, reward breakdowns and run manifests.
"""

import os
import subprocess

import numpy as np
import pandas as pd

from demobot.utils.io import create_dir, write_json

METRICS_FILE = 'metrics.csv'
REWARD_TERMS_FILE = 'reward_terms.csv'
MANIFEST_FILE = 'manifest.json'

BASE_COLUMNS = ('update_idx', 'env_steps', 'mean_return', 'mean_subgoals_reached')
TAIL_COLUMNS = ('approx_kl', 'lr', 'delta_goal', 'resets_s0', 'resets_snapshot',
                'resets_fallback', 'policy_loss', 'value_loss', 'entropy')


def metric_columns(num_stages):
    """The metrics CSV columns for a demonstration of `num_stages` stages."""
    return list(BASE_COLUMNS) + [f'success_stage_{i}' for i in range(num_stages)] \
        + list(TAIL_COLUMNS)


class EpisodeTracker(object):
    """Accumulates returns and sub-goal counts of running episodes."""

    def __init__(self, num_lanes):
        self._returns = np.zeros(num_lanes)
        self.finished = []

    def step(self, rewards, dones, infos):
        self._returns += np.asarray(rewards, dtype = np.float64)
        for lane, (done, info) in enumerate(zip(dones, infos)):
            if done:
                self.finished.append({'return': float(self._returns[lane]),
                                      'subgoals': int(info['subgoals']),
                                      'success': bool(info['success']),
                                      'failure': info['failure']})
                self._returns[lane] = 0.0

    def drain(self):
        finished, self.finished = self.finished, []
        return finished


def summarize_episodes(episodes, num_stages):
    """Mean return, mean sub-goals and per-stage success of finished episodes.

    Stage `i` counts as succeeded by an episode that reached more than
    `i` sub-goals. With no finished episodes, every value is NaN.
    """
    out = {}
    if not episodes:
        out['mean_return'] = out['mean_subgoals_reached'] = float('nan')
        for i in range(num_stages):
            out[f'success_stage_{i}'] = float('nan')
        return out
    subgoals = np.array([e['subgoals'] for e in episodes])
    out['mean_return'] = float(np.mean([e['return'] for e in episodes]))
    out['mean_subgoals_reached'] = float(subgoals.mean())
    for i in range(num_stages):
        out[f'success_stage_{i}'] = float(np.mean(subgoals > i))
    return out


class MetricsWriter(object):
    """Writes one metrics row per update to `metrics.csv`.

    The file is rewritten from the accumulated rows on every flush, so
    an interrupted run still leaves a complete, readable CSV.
    """

    def __init__(self, out_dir, num_stages, flush_every = 10):
        create_dir(out_dir)
        self.path = os.path.join(out_dir, METRICS_FILE)
        self.columns = metric_columns(num_stages)
        self.rows = []
        self._flush_every = flush_every

    def __len__(self):
        return len(self.rows)

    def add(self, row):
        self.rows.append({c: row.get(c, float('nan')) for c in self.columns})
        if len(self.rows) % self._flush_every == 0:
            self.flush()

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns = self.columns)

    def flush(self):
        self.frame().to_csv(self.path, index = False)
        return self.path


class RewardTermWriter(object):
    """Per-step reward term breakdowns (`--verbose-rewards`)."""

    def __init__(self, out_dir):
        create_dir(out_dir)
        self.path = os.path.join(out_dir, REWARD_TERMS_FILE)
        self.rows = []

    def add(self, update_idx, step, rewards, infos):
        for info, reward in zip(infos, rewards):
            self.rows.append({'update_idx': update_idx, 'step': step,
                              'lane': info['lane'], 'stage': info['stage'],
                              'reward': float(reward), **info['terms']})

    def flush(self):
        pd.DataFrame(self.rows).to_csv(self.path, index = False)
        return self.path


def git_describe():
    """`git describe` of the working directory, or 'unknown'."""
    try:
        out = subprocess.run(
            ['git', 'describe', '--always', '--dirty', '--tags'],
            capture_output = True, text = True, timeout = 5,
            cwd = os.path.dirname(os.path.abspath(__file__)))
    except (OSError, subprocess.SubprocessError):
        return 'unknown'
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else 'unknown'


def write_manifest(out_dir, config, seed, **extra):
    """Writes the run manifest: configuration, revision, seed and version."""
    from demobot import __version__
    contents = {'config': config, 'git': git_describe(), 'seed': seed,
                'version': __version__, **extra}
    path = os.path.join(out_dir, MANIFEST_FILE)
    write_json(path, contents)
    return path
