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

import json
import math

import pandas as pd
import pytest

from demobot.training import (
    EpisodeTracker, MetricsWriter, metric_columns, summarize_episodes,
    write_manifest)


def test_metric_columns():
    columns = metric_columns(3)
    assert columns[:4] == ['update_idx', 'env_steps', 'mean_return',
                           'mean_subgoals_reached']
    assert columns[4:7] == ['success_stage_0', 'success_stage_1', 'success_stage_2']
    for name in ('approx_kl', 'lr', 'delta_goal', 'resets_s0',
                 'resets_snapshot', 'resets_fallback'):
        assert name in columns


def test_episode_tracker():
    tracker = EpisodeTracker(2)
    info = {'subgoals': 1, 'success': False, 'failure': 'timeout'}
    tracker.step([1.0, 2.0], [False, False], [info, info])
    tracker.step([1.0, 2.0], [True, False], [info, info])
    tracker.step([1.0, 2.0], [True, True], [info, {**info, 'subgoals': 2}])
    finished = tracker.drain()
    assert [e['return'] for e in finished] == [2.0, 1.0, 6.0]
    assert finished[-1]['subgoals'] == 2
    assert tracker.drain() == []


def test_episode_summary():
    episodes = [{'return': r, 'subgoals': s} for r, s in
                [(1.0, 0), (3.0, 1), (5.0, 3), (7.0, 3)]]
    out = summarize_episodes(episodes, 3)
    assert out['mean_return'] == 4.0
    assert out['mean_subgoals_reached'] == 1.75
    assert [out[f'success_stage_{i}'] for i in range(3)] == [0.75, 0.5, 0.5]
    assert math.isnan(summarize_episodes([], 2)['success_stage_1'])


def test_metrics_writer(tmp_path):
    writer = MetricsWriter(str(tmp_path), 2, flush_every = 2)
    writer.add({'update_idx': 0, 'lr': 5e-4, 'unknown': 1.0})
    assert not (tmp_path / 'metrics.csv').exists()
    writer.add({'update_idx': 1, 'lr': 3e-4})
    frame = pd.read_csv(tmp_path / 'metrics.csv')
    assert list(frame.columns) == metric_columns(2)
    assert frame['lr'].tolist() == pytest.approx([5e-4, 3e-4])
    assert frame['approx_kl'].isna().all()


def test_manifest(tmp_path):
    path = write_manifest(str(tmp_path), {'task': 'sync_assembly'}, 4, extra = 1)
    with open(path) as f:
        contents = json.load(f)
    assert contents['seed'] == 4 and contents['extra'] == 1
    assert contents['config'] == {'task': 'sync_assembly'}
    assert isinstance(contents['git'], str) and contents['version']
