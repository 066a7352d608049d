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
import pandas as pd

from demobot.errors import ConfigurationError
from demobot.prior import Keyframe, Segment, write_segments
from demobot.sim import load_env_config
from demobot.training import RunConfig, cmd_compare

TASK = 'sync_assembly'


@pytest.fixture
def segment_file(tmp_path):
    config = load_env_config('desk')
    home = config.build_robot(config.task(TASK).sides).home()
    ramp = home + 0.005 * np.arange(8)[:, None]
    goals = config.nominal_poses(TASK)
    path = str(tmp_path / 'segments.jsonl')
    write_segments(path, [Segment(0, Keyframe(2, 'goal'), 0, ramp[:3], goals),
                          Segment(1, Keyframe(7, 'reach', {'left': 'base'}), 3,
                                  ramp[3:], goals)], meta = {'task': TASK})
    return path


def test_compare(segment_file, tmp_path):
    config = RunConfig(segments = segment_file, out = str(tmp_path / 'compare'),
                       num_lanes = 2, budget_steps = 8, eval_episodes = 1,
                       ppo = {'steps_per_env': 4, 'minibatches': 2, 'hidden': [8]})
    frame = cmd_compare(config, seeds = (0, ), ablations = ('no_reset', ))
    assert frame['variant'].tolist() == ['prior_only', 'prior_plus_rl',
                                         'rl_only', 'no_reset']
    saved = pd.read_csv(tmp_path / 'compare' / 'comparison.csv')
    assert len(saved) == 4
    assert (tmp_path / 'compare' / 'learning_curves.png').exists()
    assert (tmp_path / 'compare' / 'seed_0' / 'no_reset' / 'metrics.csv').exists()


def test_unknown_ablation(segment_file, tmp_path):
    config = RunConfig(segments = segment_file, out = str(tmp_path))
    with pytest.raises(ConfigurationError):
        cmd_compare(config, ablations = ('no_curriculum', ))
