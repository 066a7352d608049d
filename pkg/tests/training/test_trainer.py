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

import os

import pytest
import numpy as np
import pandas as pd

from demobot.errors import ConfigurationError
from demobot.models import load_checkpoint
from demobot.prior import Keyframe, Segment, write_segments
from demobot.sim import load_env_config
from demobot.training import (
    EvalReport, RunConfig, Trainer, evaluate, evaluate_checkpoint,
    load_run_config, metric_columns)

TASK = 'sync_assembly'


@pytest.fixture(scope = 'module')
def segments():
    config = load_env_config('desk')
    home = config.build_robot(config.task(TASK).sides).home()
    ramp = home + 0.005 * np.arange(12)[:, None]
    goals = config.nominal_poses(TASK)
    return [Segment(0, Keyframe(3, 'goal'), 0, ramp[:4], goals),
            Segment(1, Keyframe(11, 'reach', {'right': 'peg'}), 4, ramp[4:], goals)]


def _config(out, **overrides):
    contents = dict(out = str(out), num_lanes = 2, budget_steps = 32,
                    checkpoint_every = 1, eval_episodes = 0,
                    ppo = {'steps_per_env': 8, 'minibatches': 2, 'epochs': 2,
                           'hidden': [16]})
    contents.update(overrides)
    return RunConfig(**contents)


def test_run_config():
    config = RunConfig()
    assert config.p_init == 0.9 and config.clip == 0.25
    assert RunConfig(mode = 'rl_only').clip is None
    assert RunConfig(residual_clip = False).clip is None
    assert RunConfig(success_resets = False).reset_policy.p_init == 1.0
    assert not RunConfig(temporal_segments = False).env_options().temporal_segments
    assert RunConfig().env_options().base_in_obs
    assert not RunConfig(mode = 'rl_only').env_options().base_in_obs
    for overrides in ({'mode': 'imitation'}, {'num_lanes': 0},
                      {'p_init': 2.0}, {'ppo': {'epochs': 0}}):
        with pytest.raises(ConfigurationError):
            RunConfig(**overrides)
    with pytest.raises(ConfigurationError):
        load_run_config(None, num_lane = 3)
    assert load_run_config(None, seed = 3, task = None).seed == 3


def test_missing_segment_file(tmp_path):
    with pytest.raises(ConfigurationError):
        Trainer(_config(tmp_path, segments = str(tmp_path / 'none.jsonl')))


def test_training_run(segments, tmp_path):
    trainer = Trainer(_config(tmp_path), segments = segments, task = TASK)
    assert trainer.num_updates == 2
    final = trainer.train(show_progress = False)
    assert os.path.basename(final) == 'checkpoint_final.pt'
    assert os.path.exists(tmp_path / 'checkpoint_000001.pt')
    assert os.path.exists(tmp_path / 'manifest.json')

    frame = pd.read_csv(tmp_path / 'metrics.csv')
    assert list(frame.columns) == metric_columns(2)
    assert frame['update_idx'].tolist() == [0, 1]
    assert frame['env_steps'].tolist() == [16, 32]
    assert np.all(np.isfinite(frame['approx_kl']))

    contents = load_checkpoint(final)
    assert contents['run']['task'] == TASK
    assert contents['progress'] == {'update_idx': 1, 'env_steps': 32}
    assert set(contents['resets']) == {'lanes', 'counts'}


def test_training_is_reproducible(segments, tmp_path):
    for name in ('a', 'b'):
        Trainer(_config(tmp_path / name, seed = 7), segments = segments,
                task = TASK).train(show_progress = False)
    assert (tmp_path / 'a' / 'metrics.csv').read_bytes() == \
           (tmp_path / 'b' / 'metrics.csv').read_bytes()


def test_training_from_segment_file(segments, tmp_path):
    path = str(tmp_path / 'demo.segments.jsonl')
    write_segments(path, segments, meta = {'task': TASK})
    trainer = Trainer(_config(tmp_path / 'run', segments = path, verbose_rewards = True,
                              mode = 'rl_only'))
    assert trainer.task == TASK
    assert np.all(trainer.base_actions() == 0.0)
    n = trainer.envs[0].robot.num_joints
    assert np.all(trainer.envs.reset()[:, 2 * n:3 * n] == 0.0)
    trainer.train(show_progress = False)
    terms = pd.read_csv(tmp_path / 'run' / 'reward_terms.csv')
    assert len(terms) == 32
    assert {'lane', 'stage', 'reward'} <= set(terms.columns)


def test_prior_only_evaluation(segments):
    report = evaluate(segments, TASK, 'prior_only', episodes = 3, seed = 1)
    assert isinstance(report, EvalReport)
    assert report.episodes == 3
    assert sum(report.histogram) == 3 and len(report.histogram) == 3
    assert 0 <= report.mean_subgoals <= 2
    with pytest.raises(ConfigurationError):
        evaluate(segments, TASK, 'prior_plus_rl', episodes = 1)
    with pytest.raises(ConfigurationError):
        evaluate(segments, TASK, 'best', episodes = 1)


def test_checkpoint_evaluation(segments, tmp_path):
    final = Trainer(_config(tmp_path), segments = segments,
                    task = TASK).train(show_progress = False)
    report = evaluate_checkpoint(final, segments, 'prior_plus_rl', episodes = 2)
    assert report.episodes == 2
    assert report.to_dict()['mode'] == 'prior_plus_rl'
    again = evaluate_checkpoint(final, segments, 'prior_plus_rl', episodes = 2)
    assert again.subgoals == report.subgoals
    with pytest.raises(ConfigurationError):
        evaluate_checkpoint(final, segments, 'rl_only', episodes = 1)


def test_eval_report():
    report = EvalReport('prior_only', 3, subgoals = [0, 3, 3, 1],
                        successes = [False, True, True, False])
    assert report.histogram == [1, 1, 0, 2]
    assert report.mean_subgoals == 1.75
    assert report.success_rate == 0.5
    assert report.summary() == '1.75/3'
