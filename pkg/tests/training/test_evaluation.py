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

from demobot.prior import process_demonstration
from demobot.sim import EnvOptions
from demobot.synthetic import NoiseSpec, synth_demo
from demobot.training import evaluate

TASK = 'sync_assembly'


def _segments(noise):
    return process_demonstration(synth_demo(TASK, noise, seed = 0).demo).segments


@pytest.fixture(scope = 'module')
def clean_segments():
    return _segments(NoiseSpec())


@pytest.fixture(scope = 'module')
def biased_segments():
    return _segments(NoiseSpec(obj_bias = 0.02))


def test_clean_prior_reaches_every_subgoal(clean_segments):
    nominal = EnvOptions(randomize_actuators = False, randomize_objects = False)
    report = evaluate(clean_segments, TASK, 'prior_only', episodes = 1,
                      options = nominal, seed = 0)
    assert report.mean_subgoals == len(clean_segments) == 5
    assert report.success_rate == 1.0


def test_biased_prior_reaches_no_subgoal(biased_segments):
    report = evaluate(biased_segments, TASK, 'prior_only', episodes = 3, seed = 0)
    assert report.histogram[0] == 3
    assert report.mean_subgoals == 0.0 and report.success_rate == 0.0
