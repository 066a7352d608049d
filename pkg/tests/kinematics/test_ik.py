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

from demobot.errors import ConfigurationError
from demobot.kinematics import IKParameters, Pose, load_chain, forward_kinematics, solve_ik


@pytest.fixture
def arm():
    return load_chain('arm')


def test_ik_round_trip_on_reachable_targets(arm):
    rng = np.random.default_rng(0)
    lower, upper = arm.limits
    mid, half = (lower + upper) / 2, (upper - lower) / 2
    successes, trials = 0, 200
    for _ in range(trials):
        q_true = mid + 0.7 * half * rng.uniform(-1, 1, arm.num_joints)
        target = forward_kinematics(arm, q_true)['hand_mount']
        q_init = np.clip(q_true + rng.normal(0, 0.1, arm.num_joints), lower, upper)
        result = solve_ik(arm, target, q_init)
        if result.position_error < 1e-4:
            successes += 1
    assert successes / trials >= 0.99


def test_ik_returns_exact_solution_immediately(arm):
    q = arm.config(np.array([0.1, 0.8, 1.2, 0.0, -0.5, 0.2]))
    target = forward_kinematics(arm, q)['hand_mount']
    result = solve_ik(arm, target, q)
    assert result.converged
    assert result.iterations == 0


def test_ik_error_never_increases_on_unreachable_target(arm):
    target = Pose.from_translation([2.0, 0.0, 0.5])
    result = solve_ik(arm, target, arm.zero_config(),
                      params = IKParameters(max_iters = 50))
    assert not result.converged
    assert all(b <= a + 1e-15 for a, b in zip(result.trace, result.trace[1:]))


def test_ik_with_mounted_base(arm):
    base = Pose.from_translation([0.0, 0.35, 0.0])
    q = np.array([0.3, 0.7, 1.0, 0.1, -0.4, 0.0])
    target = forward_kinematics(arm, q, base = base)['hand_mount']
    result = solve_ik(arm, target, q + 0.05, base = base)
    assert result.position_error < 1e-4


def test_ik_parameters_validated():
    with pytest.raises(ConfigurationError):
        IKParameters(damping = -1.0)
    with pytest.raises(ConfigurationError):
        IKParameters.from_dict({'dampng': 0.1})
