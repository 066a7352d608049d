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

import numpy as np
import pandas as pd

from demobot.training import EvalReport
from demobot.viz import plot_learning_curves, plot_subgoal_histogram


def _frame(scale):
    steps = np.arange(1, 11) * 100
    return pd.DataFrame({'env_steps': steps,
                         'mean_subgoals_reached': scale * np.log1p(steps)})


def test_learning_curves(tmp_path):
    path = str(tmp_path / 'figures' / 'curves.png')
    _frame(1.0).to_csv(tmp_path / 'seed_0.csv', index = False)
    fig = plot_learning_curves(
        {'full': [str(tmp_path / 'seed_0.csv'), _frame(0.9)],
         'w/o reset': [_frame(0.5)]}, path, num_subgoals = 5, smoothing = 3)
    assert (tmp_path / 'figures' / 'curves.png').stat().st_size > 0
    ax = fig.axes[0]
    assert ax.get_ylim() == (0, 5)
    assert [line.get_label() for line in ax.get_lines()] == ['full', 'w/o reset']


def test_subgoal_histogram(tmp_path):
    report = EvalReport('prior_only', 2, subgoals = [0, 2, 2], successes = [False, True, True])
    fig = plot_subgoal_histogram(report)
    assert [p.get_height() for p in fig.axes[0].patches] == [1, 0, 2]
    plot_subgoal_histogram(report.to_dict(), str(tmp_path / 'hist.png'))
    assert (tmp_path / 'hist.png').exists()
