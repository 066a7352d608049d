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

from demobot.errors import (
    ContractViolationError, InsufficientObservationsError, PointBehindCameraError)
from demobot.kinematics import Pose
from demobot.prior import (
    AlignmentOptions, CameraIntrinsics, Detections2D, HandModel,
    HandParameters, align_hand_pose, project_points)


@pytest.fixture
def model():
    return HandModel.load('human_hand')


@pytest.fixture
def truth(model):
    return HandParameters(model.theta_for_aperture(0.4), np.ones(model.num_beta),
                          Pose.from_rotvec([0.2, -0.1, 0.3], [0.02, -0.01, 0.5]))


def test_project_points_pinhole():
    K = CameraIntrinsics()
    uv = project_points(K, [[0.0, 0.0, 1.0], [0.1, -0.2, 2.0]])
    assert np.allclose(uv, [[320.0, 240.0], [350.0, 180.0]])


def test_project_points_behind_camera():
    with pytest.raises(PointBehindCameraError) as exec_info:
        project_points(CameraIntrinsics(), [[0, 0, 1.0], [0, 0, 0.5], [0, 0, -0.1]])
    assert exec_info.value.index == 2


def test_default_parameters(model):
    params = model.default_parameters(Pose.from_translation([0.0, 0.0, 0.4]))
    assert np.all(params.theta == 0.0) and np.all(params.beta == 1.0)
    assert np.allclose(params.pose.translation, [0.0, 0.0, 0.4])
    assert model.default_parameters().pose == Pose.identity()


def test_hand_parameters_vector_round_trip(model, truth):
    vec = truth.to_vector()
    restored = HandParameters.from_vector(vec, model.num_theta, model.num_beta)
    assert np.allclose(restored.to_vector(), vec)
    assert restored.pose.allclose(truth.pose)


def test_shape_factors_scale_fingers(model, truth):
    wide = HandParameters(truth.theta, 1.2 * truth.beta, truth.pose)
    wrist = truth.pose.translation
    base = np.linalg.norm(model.keypoints_3d(truth) - wrist, axis = 1)
    scaled = np.linalg.norm(model.keypoints_3d(wide) - wrist, axis = 1)
    assert np.all(scaled >= base - 1e-12)
    assert np.max(scaled - base) > 0.01


def test_shape_factors_must_be_positive(model, truth):
    with pytest.raises(ContractViolationError):
        model.keypoints_3d(HandParameters(truth.theta, -truth.beta, truth.pose))


def test_alignment_recovers_perturbed_pose(model, truth):
    K = CameraIntrinsics()
    points = model.keypoints_2d(truth, K)
    confidence = np.ones(model.num_keypoints)
    init = HandParameters(
        truth.theta + 0.05, truth.beta,
        Pose.from_rotvec([0.03, 0.02, -0.04]) @ truth.pose.translated([0.01, -0.01, 0.02]))
    result = align_hand_pose(model, K, (points, confidence), init,
                             AlignmentOptions(optimize_shape = False, max_iters = 200))
    assert result.final_cost < 1e-4
    assert result.final_cost < result.cost_trace[0]
    assert np.allclose(result.params.pose.translation, truth.pose.translation, atol = 2e-3)
    assert np.array_equal(result.params.beta, truth.beta)



def _random_offset(rng, angle, distance):
    axis = rng.normal(size = 3)
    direction = rng.normal(size = 3)
    return Pose.from_rotvec(
        axis / np.linalg.norm(axis) * rng.uniform(0.0, angle),
        direction / np.linalg.norm(direction) * rng.uniform(0.0, distance))


@pytest.mark.parametrize('seed', range(10))
def test_alignment_recovers_pose_and_articulation(model, truth, seed):
    rng = np.random.default_rng(seed)
    K = CameraIntrinsics()
    points = model.keypoints_2d(truth, K)
    confidence = np.ones(model.num_keypoints)
    offset = _random_offset(rng, np.radians(5.0), 0.02)
    init = HandParameters(
        truth.theta + rng.uniform(-0.03, 0.03, size = model.num_theta), truth.beta,
        Pose(offset.rotation, truth.pose.translation + offset.translation)
        @ Pose(truth.pose.rotation, np.zeros(3)))
    result = align_hand_pose(model, K, (points, confidence), init,
                             AlignmentOptions(optimize_shape = False, max_iters = 200))
    translation, angle = result.params.pose.distance(truth.pose)
    assert translation < 5e-3
    assert np.degrees(angle) < 2.0
    assert np.degrees(np.max(np.abs(result.params.theta - truth.theta))) < 2.0


def test_alignment_cost_at_pixel_noise_floor(model, truth):
    K = CameraIntrinsics()
    clean = model.keypoints_2d(truth, K)
    confidence = np.ones(model.num_keypoints)
    bound = 3.0 * model.num_keypoints
    for seed in range(100):
        noisy = clean + np.random.default_rng(seed).normal(0.0, 1.0, size = clean.shape)
        result = align_hand_pose(model, K, (noisy, confidence), truth)
        assert result.final_cost <= bound

def test_alignment_accepts_stacked_detections(model, truth):
    K = CameraIntrinsics()
    rows = np.concatenate([model.keypoints_2d(truth, K),
                           np.ones((model.num_keypoints, 1))], axis = 1)
    result = align_hand_pose(model, K, rows, truth)
    assert result.final_cost < 1e-12


def test_alignment_ignores_low_confidence_keypoints(model, truth):
    K = CameraIntrinsics()
    points = model.keypoints_2d(truth, K)
    confidence = np.ones(model.num_keypoints)
    # Outliers below the threshold have no effect.
    points[:3] += 80.0
    confidence[:3] = 0.1
    result = align_hand_pose(model, K, (points, confidence), truth)
    assert result.final_cost < 1e-12


def test_alignment_needs_enough_keypoints(model, truth):
    K = CameraIntrinsics()
    points = model.keypoints_2d(truth, K)
    confidence = np.full(model.num_keypoints, 0.2)
    confidence[:5] = 0.9
    with pytest.raises(InsufficientObservationsError):
        align_hand_pose(model, K, (points, confidence), truth)


def test_detections_validate_shapes():
    with pytest.raises(ContractViolationError):
        Detections2D(np.zeros((4, 21, 2)), np.ones((4, 20)))
    with pytest.raises(ContractViolationError):
        Detections2D(np.zeros((4, 21, 2)), np.full((4, 21), 1.5))
    detections = Detections2D(np.zeros((4, 21, 2)), np.ones((4, 21)))
    assert len(detections) == 4
