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

from demobot.errors import ContractViolationError
from demobot.kinematics.transforms import (
    Pose, look_at, quat_normalize, quat_slerp, quat_to_rotvec,
    rotvec_to_quat, quat_angle)


@pytest.fixture
def random_poses():
    rng = np.random.default_rng(7)
    return [Pose.from_rotvec(rng.uniform(-1.5, 1.5, 3), rng.uniform(-1, 1, 3))
            for _ in range(50)]


def test_pose_array_round_trip_is_exact(random_poses):
    for pose in random_poses:
        assert Pose.from_array(pose.as_array()) == pose


def test_pose_inverse_composes_to_identity(random_poses):
    for pose in random_poses:
        assert (pose @ pose.inverse()).allclose(Pose.identity(), atol = 1e-12)
        assert (pose.inverse() @ pose).allclose(Pose.identity(), atol = 1e-12)


def test_pose_composition_order(random_poses):
    a, b = random_poses[0], random_poses[1]
    point = np.array([0.1, -0.2, 0.3])
    assert np.allclose((a @ b).apply(point), a.apply(b.apply(point)), atol = 1e-12)
    assert np.allclose((a @ b).as_matrix(), a.as_matrix() @ b.as_matrix(), atol = 1e-12)


def test_rotvec_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(100):
        rotvec = rng.uniform(-1, 1, 3)
        rotvec *= rng.uniform(0, 3.0) / np.linalg.norm(rotvec)
        assert np.allclose(quat_to_rotvec(rotvec_to_quat(rotvec)), rotvec, atol = 1e-10)


def test_quat_normalize_rejects_zero():
    with pytest.raises(ContractViolationError):
        quat_normalize([0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ContractViolationError):
        Pose([1.0, 0.0, 0.0, 0.0], [0.0, 0.0])


def test_slerp_endpoints_and_midpoint():
    q1 = rotvec_to_quat([0.0, 0.0, 0.0])
    q2 = rotvec_to_quat([0.0, 0.0, 1.0])
    assert quat_angle(quat_slerp(q1, q2, 0.0), q1) < 1e-12
    assert quat_angle(quat_slerp(q1, q2, 1.0), q2) < 1e-12
    assert abs(quat_angle(quat_slerp(q1, q2, 0.5), q1) - 0.5) < 1e-9


def test_look_at_points_the_optical_axis():
    eye, target = np.array([1.1, 0.0, 0.55]), np.array([0.4, 0.0, 0.1])
    camera = look_at(eye, target)
    forward = camera.apply([0.0, 0.0, 1.0]) - eye
    expected = (target - eye) / np.linalg.norm(target - eye)
    assert np.allclose(forward, expected, atol = 1e-12)
    with pytest.raises(ContractViolationError):
        look_at([0, 0, 1], [0, 0, 0])
