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

from demobot.errors import ConfigurationError, ContractViolationError
from demobot.kinematics import Pose, load_chain
from demobot.kinematics.chain import keypoint_jacobians
from demobot.prior import retarget_hand
from demobot.prior.optim import numeric_jacobian
from demobot.prior.retarget import RetargetObjective


@pytest.fixture
def robot_hand():
    return load_chain('robot_hand')


@pytest.fixture
def target(robot_hand):
    q = np.clip(np.full(robot_hand.num_joints, 0.4), *robot_hand.limits)
    base = Pose.from_rotvec([0.1, -0.2, 0.3], [0.4, 0.1, 0.9])
    positions, _ = keypoint_jacobians(robot_hand, q, base, robot_hand.correspondence)
    return q, base, positions


def test_retarget_recovers_own_keypoints(robot_hand, target):
    q, base, positions = target
    result = retarget_hand(positions, robot_hand, robot_hand.zero_config(),
                           base.translated([0.01, -0.01, 0.005]))
    assert result.residual < 1e-4
    assert np.allclose(result.q.values, q, atol = 1e-2)
    assert np.allclose(result.base.translation, base.translation, atol = 1e-3)


def test_retarget_respects_joint_limits(robot_hand, target):
    _, base, positions = target
    lower, upper = robot_hand.limits
    # Shrinking the targets cannot be matched exactly by a rigid hand.
    squeezed = base.translation + 0.5 * (positions - base.translation)
    result = retarget_hand(squeezed, robot_hand, robot_hand.zero_config(), base)
    assert np.all(result.q.values >= lower) and np.all(result.q.values <= upper)
    assert result.residual > 1e-3


def test_retarget_jacobian_matches_finite_differences(robot_hand, target):
    _, base, positions = target
    objective = RetargetObjective(robot_hand, positions + 0.01)
    x = objective.pack(np.full(robot_hand.num_joints, 0.3), base)
    numeric = numeric_jacobian(objective.residual, x, objective.retract)
    assert np.allclose(objective.jacobian(x), numeric, atol = 1e-6)


def test_retarget_checks_targets(robot_hand):
    with pytest.raises(ContractViolationError):
        retarget_hand(np.zeros((5, 3)), robot_hand, robot_hand.zero_config(),
                      Pose.identity())
    with pytest.raises(ConfigurationError):
        retarget_hand(np.zeros((21, 3)), load_chain('arm'),
                      np.zeros(6), Pose.identity())


def test_retarget_scaled_hand_beats_zero_config(robot_hand, target):
    q, base, positions = target
    exact = retarget_hand(positions, robot_hand, q, base)
    scaled = base.translation + 1.1 * (positions - base.translation)
    result = retarget_hand(scaled, robot_hand, q, base)
    lower, upper = robot_hand.limits
    assert np.all(result.q.values >= lower) and np.all(result.q.values <= upper)
    assert result.residual > exact.residual
    objective = RetargetObjective(robot_hand, scaled)
    baseline = objective.rms(objective.pack(robot_hand.zero_config(), base))
    assert result.residual < baseline


def test_retarget_is_deterministic(robot_hand, target):
    _, base, positions = target
    start = base.translated([0.01, 0.0, -0.01])
    a = retarget_hand(positions + 0.005, robot_hand, robot_hand.zero_config(), start)
    b = retarget_hand(positions + 0.005, robot_hand, robot_hand.zero_config(), start)
    assert np.array_equal(a.q.values, b.q.values)
    assert a.base == b.base and a.residual == b.residual
