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
Rigid task objects: their geometry and distance queries.

Objects are boxes (given by their half extents) or cylinders (given by
their radius and their length along the body z axis). Objects whose
`symmetric` flag is set are symmetric about their body z axis.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from demobot.errors import ConfigurationError
from demobot.kinematics.transforms import Pose

SHAPES = ('box', 'cylinder')


@dataclass(frozen = True)
class ObjectSpec(object):
    """The geometry of a task object.

    Parameters
    ----------
    name : str
        The object's name.
    shape : str
        Either `box` or `cylinder`.
    half_extents : tuple
        The half extents of a box (m).
    radius, length : float
        The radius and length of a cylinder (m).
    symmetric : bool
        Whether the object is symmetric about its body z axis.
    hole : dict
        For objects with a hole, its axis endpoints `entry` (where an
        inserted peg's tip rests) and `exit`, in the body frame.
    """
    name: str
    shape: str
    half_extents: Optional[tuple] = None
    radius: Optional[float] = None
    length: Optional[float] = None
    symmetric: bool = False
    hole: Optional[dict] = None

    @classmethod
    def from_dict(cls, name, contents):
        contents = dict(contents)
        shape = contents.pop('shape', None)
        if shape not in SHAPES:
            raise ConfigurationError(
                f"Object '{name}' has shape '{shape}', expected one of {SHAPES}.")
        known = {'half_extents', 'radius', 'length', 'symmetric', 'hole'}
        for key in contents:
            if key not in known:
                raise ConfigurationError(
                    f"Unknown key '{key}' in the definition of object '{name}'.")
        spec = cls(name, shape,
                   half_extents = tuple(float(v) for v in contents['half_extents'])
                   if 'half_extents' in contents else None,
                   radius = float(contents['radius']) if 'radius' in contents else None,
                   length = float(contents['length']) if 'length' in contents else None,
                   symmetric = bool(contents.get('symmetric', False)),
                   hole = contents.get('hole', None))
        spec.check_geometry()
        return spec

    def check_geometry(self):
        """Raises a `ConfigurationError` if the geometry is incomplete."""
        if self.shape == 'box':
            if self.half_extents is None or len(self.half_extents) != 3 \
                    or min(self.half_extents) <= 0:
                raise ConfigurationError(
                    f"Box object '{self.name}' needs three positive "
                    f"`half_extents`, got {self.half_extents}.")
        elif self.shape == 'cylinder':
            if self.radius is None or self.length is None \
                    or self.radius <= 0 or self.length <= 0:
                raise ConfigurationError(
                    f"Cylinder object '{self.name}' needs a positive "
                    f"`radius` and `length`, got radius = {self.radius}, "
                    f"length = {self.length}.")
        else:
            raise ConfigurationError(
                f"Object '{self.name}' has shape '{self.shape}', "
                f"expected one of {SHAPES}.")

    @property
    def box_extents(self):
        """Half extents of the object's oriented bounding box."""
        self.check_geometry()
        if self.shape == 'box':
            return np.array(self.half_extents, dtype = np.float64)
        return np.array([self.radius, self.radius, self.length / 2.0])

    @property
    def rest_height(self):
        """Height of the center above the table when resting upright."""
        return float(self.box_extents[2])

    @property
    def axis_endpoints(self):
        """The `(tip, tail)` of the body z axis, bottom first."""
        half = self.box_extents[2]
        return np.array([0.0, 0.0, -half]), np.array([0.0, 0.0, half])

    def hole_axis(self):
        """The `(entry, exit)` of the object's hole, in the body frame."""
        if not self.hole:
            raise ConfigurationError(f"Object '{self.name}' has no hole.")
        return (np.asarray(self.hole['entry'], dtype = np.float64),
                np.asarray(self.hole['exit'], dtype = np.float64))

    def support_height(self, pose: Pose):
        """Distance from the center down to the object's lowest point."""
        rot = pose.rotation_matrix
        if self.shape == 'box':
            return float(np.abs(rot[2]) @ self.box_extents)
        c = abs(rot[2, 2])
        return float(self.length / 2.0 * c + self.radius * np.sqrt(max(0.0, 1.0 - c * c)))

    def surface_distance(self, pose: Pose, points):
        """Distances from world `points` to the surface (zero inside)."""
        local = pose.inverse().apply(np.atleast_2d(points))
        if self.shape == 'box':
            outside = np.maximum(np.abs(local) - self.box_extents, 0.0)
            return np.linalg.norm(outside, axis = 1)
        radial = np.maximum(np.linalg.norm(local[:, :2], axis = 1) - self.radius, 0.0)
        axial = np.maximum(np.abs(local[:, 2]) - self.length / 2.0, 0.0)
        return np.sqrt(radial ** 2 + axial ** 2)
