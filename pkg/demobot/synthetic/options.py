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

from enum import Enum
from dataclasses import dataclass

from demobot.framework import Parameters
from demobot.errors import ConfigurationError
from demobot.utils.data import maybe_you_meant


class TaskKind(Enum):
    """The scripted tasks demonstrations can be generated for."""
    sync_assembly: str = "sync_assembly"
    async_assembly: str = "async_assembly"
    single_arm_multi_step: str = "single_arm_multi_step"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ConfigurationError(maybe_you_meant(
                str(value), f"Unknown task '{value}'.", [t.value for t in cls]))


# The number of sub-goals (keyframes) of each task.
SUBGOAL_COUNTS = {TaskKind.sync_assembly: 5,
                  TaskKind.async_assembly: 11,
                  TaskKind.single_arm_multi_step: 8}


@dataclass(repr = False)
class NoiseSpec(Parameters):
    """Corruptions applied to a demonstration's observations.

    Parameters
    ----------
    det2d_sigma : float
        Standard deviation of the Gaussian noise on 2D keypoints (px).
    obj_trans_sigma : float
        Standard deviation of per-frame object translation noise (m).
    obj_rot_sigma : float
        Standard deviation of per-frame object rotation noise (rad).
    obj_bias : float
        Magnitude of a constant horizontal offset of each object's
        track (m); its direction is drawn once per object.
    dropout_prob : float
        Probability that a 2D keypoint is dropped (zero confidence).
    estimator_focal_error : float
        Relative focal length error of the hand estimator's intrinsics.
    estimator_theta_sigma : float
        Standard deviation of the hand estimator's joint angle noise (rad).
    """
    det2d_sigma: float = 0.0
    obj_trans_sigma: float = 0.0
    obj_rot_sigma: float = 0.0
    obj_bias: float = 0.0
    dropout_prob: float = 0.0
    estimator_focal_error: float = 0.0
    estimator_theta_sigma: float = 0.0

    def validate(self):
        for name in ('det2d_sigma', 'obj_trans_sigma', 'obj_rot_sigma',
                     'obj_bias', 'dropout_prob', 'estimator_theta_sigma'):
            if getattr(self, name) < 0:
                raise ConfigurationError(
                    f"Noise parameter `{name}` must be non-negative, "
                    f"got {getattr(self, name)}.")
        if self.dropout_prob > 1:
            raise ConfigurationError(
                f"The dropout probability must lie in [0, 1], "
                f"got {self.dropout_prob}.")
        if self.estimator_focal_error <= -1:
            raise ConfigurationError(
                f"The estimator's focal error must exceed -1, "
                f"got {self.estimator_focal_error}.")

    @property
    def is_zero(self):
        return all(getattr(self, name) == 0 for name in self.__dataclass_fields__)
