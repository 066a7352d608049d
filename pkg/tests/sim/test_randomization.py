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

from demobot.kinematics import Pose
from demobot.sim import RandomizationSpec, randomize_initial_poses

NOMINAL = {'base': Pose.from_translation([0.45, 0.22, 0.03]),
           'peg': Pose.from_translation([0.45, -0.22, 0.05])}


def test_zero_ranges_return_nominal():
    spec = RandomizationSpec(trans_range = 0.0, rot_range = 0.0)
    poses = randomize_initial_poses(spec, NOMINAL, np.random.default_rng(0))
    assert all(poses[name] == NOMINAL[name] for name in NOMINAL)


def test_offsets_are_uniform():
    spec = RandomizationSpec(trans_range = 0.10, rot_range = 0.0)
    rng = np.random.default_rng(1)
    offsets = np.array([randomize_initial_poses(spec, NOMINAL, rng)['base'].translation
                        - NOMINAL['base'].translation for _ in range(20000)])
    assert np.all(np.abs(offsets[:, :2]) <= 0.10)
    assert np.all(offsets[:, 2] == 0.0)
    expected = 0.10 / np.sqrt(3)
    assert np.allclose(offsets[:, :2].std(axis = 0), expected, rtol = 0.05)


def test_rotation_is_a_bounded_yaw():
    spec = RandomizationSpec(trans_range = 0.0, rot_range = 0.2)
    rng = np.random.default_rng(2)
    for _ in range(100):
        pose = randomize_initial_poses(spec, NOMINAL, rng)['peg']
        rotvec = pose.rotvec
        assert np.allclose(rotvec[:2], 0.0, atol = 1e-12)
        assert abs(rotvec[2]) <= 0.2 + 1e-12


def test_same_seed_same_poses():
    spec = RandomizationSpec()
    a = randomize_initial_poses(spec, NOMINAL, np.random.default_rng(3))
    b = randomize_initial_poses(spec, NOMINAL, np.random.default_rng(3))
    assert all(a[name] == b[name] for name in NOMINAL)


def test_disabled_object_keeps_others_draws():
    everything = randomize_initial_poses(
        RandomizationSpec(), NOMINAL, np.random.default_rng(4))
    partial = randomize_initial_poses(
        RandomizationSpec(objects = {'base': False}), NOMINAL, np.random.default_rng(4))
    assert partial['base'] == NOMINAL['base']
    assert partial['peg'] == everything['peg']
