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
Rigid-transform math for DemoBot.

Quaternions are stored as `[w, x, y, z]` arrays throughout. Rotation
vectors (axis times angle) are the log-map coordinates used by the
least-squares solvers and by the orientation error in inverse kinematics.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from demobot.errors import ContractViolationError


# Quaternions with a vector part smaller than this are treated as identity.
_TOL = 1e-12


def quat_normalize(quat):
    """Normalizes a quaternion, raising on a zero-norm input."""
    quat = np.asarray(quat, dtype = np.float64)
    norm = np.linalg.norm(quat)
    if norm < _TOL or not np.isfinite(norm):
        raise ContractViolationError(
            f"Cannot normalize the quaternion {quat.tolist()}.")
    # Unit quaternions pass through untouched, so stored poses round-trip.
    if abs(norm - 1.0) <= 1e-12:
        return quat.copy()
    return quat / norm


def quat_multiply(q1, q2):
    """Hamilton product `q1 * q2` of two `[w, x, y, z]` quaternions."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2])


def quat_conjugate(quat):
    """Conjugate (the inverse, for unit quaternions)."""
    quat = np.asarray(quat, dtype = np.float64)
    return np.array([quat[0], -quat[1], -quat[2], -quat[3]])


def quat_to_matrix(quat):
    """Converts a unit quaternion into a 3x3 rotation matrix."""
    w, x, y, z = quat
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])


def matrix_to_quat(matrix):
    """Converts a rotation matrix into a quaternion with `w >= 0`."""
    x, y, z, w = Rotation.from_matrix(np.asarray(matrix)).as_quat()
    quat = np.array([w, x, y, z])
    return -quat if quat[0] < 0 else quat


def quat_rotate(quat, vec):
    """Rotates a vector (or an `(N, 3)` array of vectors) by a quaternion."""
    return np.asarray(vec, dtype = np.float64) @ quat_to_matrix(quat).T


def rotvec_to_quat(rotvec):
    """Exponential map from a rotation vector to a unit quaternion."""
    rotvec = np.asarray(rotvec, dtype = np.float64)
    angle = np.linalg.norm(rotvec)
    if angle < _TOL:
        return quat_normalize(np.concatenate([[1.0], rotvec / 2.0]))
    axis = rotvec / angle
    return np.concatenate([[np.cos(angle / 2.0)], np.sin(angle / 2.0) * axis])


def quat_to_rotvec(quat):
    """Log map from a unit quaternion to the shortest rotation vector."""
    quat = np.asarray(quat, dtype = np.float64)
    if quat[0] < 0:
        quat = -quat
    vec = quat[1:]
    s = np.linalg.norm(vec)
    if s < _TOL:
        return 2.0 * vec
    angle = 2.0 * np.arctan2(s, quat[0])
    return angle * vec / s


def quat_from_axis_angle(axis, angle):
    """Quaternion rotating by `angle` radians about the unit `axis`."""
    axis = np.asarray(axis, dtype = np.float64)
    half = angle / 2.0
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_angle(q1, q2):
    """Geodesic angle (radians) between two unit quaternions."""
    delta = quat_multiply(quat_conjugate(q1), q2)
    return 2.0 * float(np.arctan2(np.linalg.norm(delta[1:]), abs(delta[0])))


def quat_slerp(q1, q2, fraction):
    """Spherical interpolation between two quaternions at `fraction`."""
    if fraction <= 0.0:
        return np.asarray(q1, dtype = np.float64)
    if fraction >= 1.0:
        return np.asarray(q2, dtype = np.float64)
    key = Rotation.from_quat([[q[1], q[2], q[3], q[0]] for q in (q1, q2)])
    x, y, z, w = Slerp([0.0, 1.0], key)(fraction).as_quat()
    return np.array([w, x, y, z])


def axis_rotation_matrix(axis, angle):
    """Rodrigues' formula for the rotation about a unit `axis`."""
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C]])


def skew(vec):
    """The cross-product matrix `[v]x` of a 3-vector."""
    x, y, z = vec
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_error(current, target):
    """World-frame rotation vector taking rotation `current` onto `target`."""
    return quat_to_rotvec(quat_multiply(target, quat_conjugate(current)))


@dataclass(frozen = True, eq = False)
class Pose(object):
    """A rigid transform: a unit quaternion rotation and a translation.

    Poses compose with `@` (`a @ b` applies `b`, then `a`), so a chain
    of frame offsets reads root-to-leaf. The stored arrays are read-only.

    Parameters
    ----------
    rotation : array-like
        A quaternion `[w, x, y, z]`, normalized on construction.
    translation : array-like
        A 3-vector in meters.
    """
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = quat_normalize(self.rotation)
        translation = np.array(self.translation, dtype = np.float64).reshape(-1)
        if translation.shape != (3,):
            raise ContractViolationError(
                f"Expected a 3-vector translation, instead "
                f"got an array of shape {translation.shape}.")
        rotation.setflags(write = False)
        translation.setflags(write = False)
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    @classmethod
    def identity(cls):
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @classmethod
    def from_translation(cls, translation):
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), translation)

    @classmethod
    def from_rotvec(cls, rotvec, translation = None):
        return cls(rotvec_to_quat(rotvec),
                   np.zeros(3) if translation is None else translation)

    @classmethod
    def from_matrix(cls, matrix):
        """Builds a pose from a 4x4 homogeneous transform."""
        matrix = np.asarray(matrix, dtype = np.float64)
        return cls(matrix_to_quat(matrix[:3, :3]), matrix[:3, 3])

    @classmethod
    def from_array(cls, arr):
        """Builds a pose from `[w, x, y, z, tx, ty, tz]`."""
        arr = np.asarray(arr, dtype = np.float64)
        if arr.shape != (7,):
            raise ContractViolationError(
                f"Expected a 7-vector pose, instead got shape {arr.shape}.")
        return cls(arr[:4], arr[4:])

    def as_array(self):
        """Returns `[w, x, y, z, tx, ty, tz]`."""
        return np.concatenate([self.rotation, self.translation])

    def as_matrix(self):
        """Returns the 4x4 homogeneous transform."""
        matrix = np.eye(4)
        matrix[:3, :3] = quat_to_matrix(self.rotation)
        matrix[:3, 3] = self.translation
        return matrix

    @property
    def rotation_matrix(self):
        return quat_to_matrix(self.rotation)

    @property
    def rotvec(self):
        return quat_to_rotvec(self.rotation)

    def compose(self, other):
        """Returns the transform applying `other`, then `self`."""
        return Pose(quat_multiply(self.rotation, other.rotation),
                    quat_rotate(self.rotation, other.translation) + self.translation)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self):
        inv_rot = quat_conjugate(self.rotation)
        return Pose(inv_rot, -quat_rotate(inv_rot, self.translation))

    def apply(self, points):
        """Transforms a point (or an `(N, 3)` array of points)."""
        return quat_rotate(self.rotation, points) + self.translation

    def translated(self, offset):
        """Returns this pose shifted by a world-frame `offset`."""
        return Pose(self.rotation, self.translation + np.asarray(offset))

    def distance(self, other):
        """Returns `(translation distance m, geodesic angle rad)`."""
        return (float(np.linalg.norm(self.translation - other.translation)),
                quat_angle(self.rotation, other.rotation))

    def allclose(self, other, atol = 1e-9):
        """Whether two poses represent the same transform within `atol`."""
        position, angle = self.distance(other)
        return position <= atol and angle <= atol

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and \
               np.array_equal(self.translation, other.translation)

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __repr__(self):
        return f"Pose(rotation={np.round(self.rotation, 6).tolist()}, " \
               f"translation={np.round(self.translation, 6).tolist()})"


def look_at(eye, target, up = (0.0, 0.0, 1.0)):
    """Camera-to-world pose of a camera at `eye` looking at `target`.

    Uses the pinhole convention: the camera's z axis points along the
    viewing direction, x to the right of the image and y down.
    """
    eye = np.asarray(eye, dtype = np.float64)
    forward = np.asarray(target, dtype = np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype = np.float64))
    if np.linalg.norm(right) < 1e-9:
        raise ContractViolationError(
            "The camera's viewing direction is parallel to `up`.")
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return Pose(matrix_to_quat(np.stack([right, down, forward], axis = 1)), eye)
