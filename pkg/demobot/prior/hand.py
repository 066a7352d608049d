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

"""
The parametric hand model and its alignment to 2D keypoint detections.

The hand is a kinematic stand-in for a blend-skinned hand model with the
same parameterization: local joint angles θ, per-finger shape scales β,
and a global pose (R, t). Evaluating the model gives 3D keypoints, and,
with camera intrinsics, their 2D projections.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from demobot.framework import Parameters
from demobot.errors import (
    ConfigurationError, ContractViolationError,
    InsufficientObservationsError, PointBehindCameraError
)
from demobot.kinematics.chain import KinematicChain, load_chain
from demobot.kinematics.transforms import Pose, rotvec_to_quat, quat_multiply, quat_to_rotvec
from demobot.prior.optim import LMParameters, levenberg_marquardt


@dataclass(repr = False)
class CameraIntrinsics(Parameters):
    """Pinhole camera intrinsics (pixels)."""
    fx: float = 600.0
    fy: float = 600.0
    cx: float = 320.0
    cy: float = 240.0

    def validate(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigurationError(
                f"Focal lengths must be positive, got "
                f"fx = {self.fx}, fy = {self.fy}.")

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def scaled(self, factor):
        """Intrinsics with focal lengths scaled by `factor`."""
        return CameraIntrinsics(self.fx * factor, self.fy * factor, self.cx, self.cy)


def project_points(K: CameraIntrinsics, pts):
    """Projects camera-frame 3D points (meters) into the image (pixels).

    Raises a `PointBehindCameraError` naming the first point whose depth
    is not positive.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype = np.float64))
    bad = np.flatnonzero(pts[:, 2] <= 0)
    if len(bad):
        raise PointBehindCameraError(
            f"Point {int(bad[0])} at {pts[bad[0]].tolist()} is on or "
            f"behind the camera plane.", index = int(bad[0]))
    return _project(K, pts)


def _project(K, pts):
    z = np.maximum(pts[:, 2], 1e-6)
    return np.stack([K.fx * pts[:, 0] / z + K.cx,
                     K.fy * pts[:, 1] / z + K.cy], axis = 1)


@dataclass
class HandParameters(object):
    """Hand model parameters (θ, β, R, t).

    The global `pose` places the hand's wrist frame in whatever frame
    the parameters are expressed in (the camera frame, for alignment).
    """
    theta: np.ndarray
    beta: np.ndarray
    pose: Pose

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype = np.float64).copy()
        self.beta = np.asarray(self.beta, dtype = np.float64).copy()

    def to_vector(self):
        return np.concatenate([self.theta, self.beta,
                               self.pose.rotvec, self.pose.translation])

    @classmethod
    def from_vector(cls, vec, num_theta, num_beta):
        a, b = num_theta, num_theta + num_beta
        return cls(vec[:a], vec[a:b], Pose.from_rotvec(vec[b:b + 3], vec[b + 3:b + 6]))

    def transformed(self, transform: Pose):
        """The same hand with its global pose expressed via `transform`."""
        return HandParameters(self.theta, self.beta, transform @ self.pose)

    def to_dict(self):
        return {'theta': self.theta.tolist(), 'beta': self.beta.tolist(),
                'pose': self.pose.as_array().tolist()}

    @classmethod
    def from_dict(cls, contents):
        return cls(contents['theta'], contents['beta'],
                   Pose.from_array(contents['pose']))


class HandModel(object):
    """A kinematic hand with per-finger shape scales.

    The shape factor `β_f` of a finger scales the offsets of every frame
    in that finger (including its base offset from the wrist), so the
    finger's bones grow with `β_f`.

    Parameters
    ----------
    chain : KinematicChain
        The hand's kinematic chain, whose `extra` holds the `fingers`
        mapping from finger name to the frames it scales.
    """

    def __init__(self, chain: KinematicChain):
        fingers = chain.extra.get('fingers', None)
        if not fingers:
            raise ConfigurationError(
                f"Chain '{chain.name}' does not declare any `fingers`, "
                f"so it cannot be used as a hand model.")
        self._chain = chain
        self._fingers = list(fingers.keys())
        self._scaled = np.full(len(chain.frame_names), -1, dtype = int)
        for f, name in enumerate(self._fingers):
            for frame in fingers[name]:
                self._scaled[chain.frame_index(frame)] = f
        self._keypoint_index = [chain.frame_index(k) for k in chain.keypoints]
        self._grasp_flexion = float(chain.extra.get('grasp_flexion', 0.8))

    @classmethod
    def load(cls, path_or_name = 'human_hand', side = 'right'):
        """Loads the hand model for the `'right'` or `'left'` hand."""
        if side not in ('right', 'left'):
            raise ConfigurationError(
                f"Expected a hand side of 'right' or 'left', got '{side}'.")
        return cls(load_chain(path_or_name, mirror = side == 'left',
                              name = f'human_hand_{side}'))

    @property
    def chain(self):
        return self._chain

    @property
    def num_theta(self):
        return self._chain.num_joints

    @property
    def num_beta(self):
        return len(self._fingers)

    @property
    def num_keypoints(self):
        return len(self._keypoint_index)

    @property
    def limits(self):
        return self._chain.limits

    def default_parameters(self, pose = None):
        """The open hand with unit shape at `pose`."""
        return HandParameters(
            self._chain.zero_config().values, np.ones(self.num_beta),
            Pose.identity() if pose is None else pose)

    def theta_for_aperture(self, aperture):
        """Joint angles of a grasp closed by `aperture` ∈ [0, 1]."""
        lower, upper = self._chain.limits
        return np.clip(np.full(self.num_theta, aperture * self._grasp_flexion),
                       lower, upper)

    def scaled_offsets(self, beta):
        beta = np.asarray(beta, dtype = np.float64)
        if beta.shape != (self.num_beta,):
            raise ContractViolationError(
                f"Expected {self.num_beta} shape factors, got {beta.shape}.")
        if np.any(beta <= 0):
            raise ContractViolationError(
                f"Shape factors must be positive, got {beta.tolist()}.")
        offsets = self._chain.offsets.copy()
        mask = self._scaled >= 0
        offsets[mask, :3, 3] *= beta[self._scaled[mask]][:, None]
        return offsets

    def keypoints_3d(self, params: HandParameters):
        """The `(K, 3)` keypoints, in the frame of `params.pose`."""
        theta = self._chain.as_values(params.theta)
        mats, _, _ = self._chain.frame_matrices(
            theta, params.pose, offsets = self.scaled_offsets(params.beta))
        return mats[self._keypoint_index, :3, 3].copy()

    def keypoints_2d(self, params: HandParameters, K: CameraIntrinsics):
        """The `(K, 2)` projected keypoints of a camera-frame hand."""
        return project_points(K, self.keypoints_3d(params))


@dataclass
class Detections2D(object):
    """Per-frame 2D keypoint detections of one hand.

    `points` has shape `(T, K, 2)` (pixels), and `confidence` has shape
    `(T, K)` with values in [0, 1].
    """
    points: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype = np.float64).reshape(
            len(self.points), -1, 2)
        self.confidence = np.asarray(self.confidence, dtype = np.float64)
        if self.confidence.shape != self.points.shape[:2]:
            raise ContractViolationError(
                f"Detections with points of shape {self.points.shape} need "
                f"confidences of shape {self.points.shape[:2]}, got "
                f"{self.confidence.shape}.")
        if np.any(self.confidence < 0) or np.any(self.confidence > 1):
            raise ContractViolationError("Confidences must lie in [0, 1].")

    def __len__(self):
        return len(self.points)

    def frame(self, t):
        return self.points[t], self.confidence[t]


@dataclass
class AlignmentResult(object):
    params: HandParameters
    final_cost: float
    cost_trace: list
    iterations: int


@dataclass(repr = False)
class AlignmentOptions(Parameters):
    """Options for `align_hand_pose`.

    Parameters
    ----------
    confidence_threshold : float
        Keypoints at or below this confidence are ignored.
    min_keypoints : int
        The minimum number of confident keypoints required.
    optimize_shape : bool
        Whether to solve for β (otherwise β is held at its initial value).
    shape_prior_weight : float
        Weight (pixels² per unit²) pulling β towards its initial value.
    beta_bounds : tuple
        Bounds on the shape factors.
    """
    confidence_threshold: float = 0.5
    min_keypoints: int = 6
    optimize_shape: bool = True
    shape_prior_weight: float = 1.0e4
    beta_bounds: tuple = (0.5, 2.0)
    max_iters: int = 100

    def validate(self):
        if self.min_keypoints < 1:
            raise ConfigurationError("`min_keypoints` must be positive.")
        if not 0 < self.beta_bounds[0] <= self.beta_bounds[1]:
            raise ConfigurationError(
                f"Invalid shape bounds {self.beta_bounds}.")


def align_hand_pose(model: HandModel, K: CameraIntrinsics, detections,
                    init: HandParameters,
                    options: Optional[AlignmentOptions] = None):
    """Aligns the hand model to one frame of 2D keypoint detections.

    Minimizes `Σ_k conf_k ||proj(J³ᵈ_k) - J²ᵈ_k||²` over (θ, β, R, t)
    with Levenberg-Marquardt, starting from `init`. Rotations are updated
    on the manifold, and θ and β are kept within their bounds. When the
    shape is optimized, a prior term keeps β near `init.beta`.

    Parameters
    ----------
    model : HandModel
        The hand model.
    K : CameraIntrinsics
        The calibrated camera intrinsics.
    detections : tuple or array
        Either `(points (K, 2), confidence (K,))` or a `(K, 3)` array
        of `[u, v, confidence]` rows.
    init : HandParameters
        The initial (camera-frame) hand parameters.
    options : AlignmentOptions
        Alignment options.

    Returns
    -------
    An `AlignmentResult` with the aligned parameters and the final
    confidence-weighted reprojection cost (pixels²).
    """
    options = options or AlignmentOptions()
    if isinstance(detections, tuple):
        points, confidence = detections
    else:
        detections = np.asarray(detections, dtype = np.float64)
        points, confidence = detections[:, :2], detections[:, 2]
    points = np.asarray(points, dtype = np.float64)
    confidence = np.asarray(confidence, dtype = np.float64)
    if points.shape != (model.num_keypoints, 2):
        raise ContractViolationError(
            f"Expected {model.num_keypoints} detected keypoints, "
            f"got an array of shape {points.shape}.")
    used = confidence > options.confidence_threshold
    if int(used.sum()) < options.min_keypoints:
        raise InsufficientObservationsError(
            f"Only {int(used.sum())} keypoints have a confidence above "
            f"{options.confidence_threshold}; at least "
            f"{options.min_keypoints} are required.")
    weights = np.sqrt(confidence[used])[:, None]
    observed = points[used]

    n_theta, n_beta = model.num_theta, model.num_beta
    lower, upper = model.limits
    beta_prior = np.asarray(init.beta, dtype = np.float64).copy()
    prior_scale = np.sqrt(options.shape_prior_weight)

    # Held-fixed parameters are simply left out of the solver's vector.
    if options.optimize_shape:
        def _unpack(x):
            return HandParameters.from_vector(x, n_theta, n_beta)
        x0 = init.to_vector()
    else:
        def _unpack(x):
            return HandParameters.from_vector(
                np.concatenate([x[:n_theta], beta_prior, x[n_theta:]]),
                n_theta, n_beta)
        x0 = np.concatenate([init.theta, init.pose.rotvec, init.pose.translation])
    r0 = len(x0) - 6

    def _reprojection(params):
        projected = _project(K, model.keypoints_3d(params))[used]
        return (weights * (projected - observed)).reshape(-1)

    def _residual(x):
        params = _unpack(x)
        residual = _reprojection(params)
        if options.optimize_shape:
            residual = np.concatenate(
                [residual, prior_scale * (params.beta - beta_prior)])
        return residual

    def _retract(x, delta):
        out = x + delta
        quat = quat_multiply(rotvec_to_quat(delta[r0:r0 + 3]),
                             rotvec_to_quat(x[r0:r0 + 3]))
        out[r0:r0 + 3] = quat_to_rotvec(quat)
        return out

    def _project_bounds(x):
        x = x.copy()
        x[:n_theta] = np.clip(x[:n_theta], lower, upper)
        if options.optimize_shape:
            x[n_theta:n_theta + n_beta] = np.clip(
                x[n_theta:n_theta + n_beta], *options.beta_bounds)
        return x

    result = levenberg_marquardt(
        _residual, x0, retract = _retract, project = _project_bounds,
        params = LMParameters(max_iters = options.max_iters))
    if result.accepted_steps == 0:
        params = HandParameters(init.theta, init.beta, init.pose)
    else:
        params = _unpack(result.x)
    reprojection = _reprojection(params)
    return AlignmentResult(params, float(reprojection @ reprojection),
                           result.cost_trace, result.iterations)
