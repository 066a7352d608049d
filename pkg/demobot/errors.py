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
Exceptions raised throughout DemoBot.

The command-line interface maps these onto exit codes: configuration
errors exit with 2, processing failures with 3, and aborted training
runs with 4.
"""


class DemoBotError(Exception):
    """Base class for all DemoBot errors."""


class ConfigurationError(DemoBotError, ValueError):
    """Raised when a chain, environment, or run configuration is invalid."""


class ScriptError(ConfigurationError):
    """Raised when a task script cannot be executed by the hand model."""

    def __init__(self, msg, waypoint = None):
        super().__init__(msg)
        self.waypoint = waypoint


class FormatError(ConfigurationError):
    """Raised when a demonstration or segment file cannot be parsed."""


class ContractViolationError(DemoBotError, ValueError):
    """Raised when an operation receives inputs violating its contract."""


class ProcessingError(DemoBotError, RuntimeError):
    """Raised when a stage of demonstration processing fails.

    The `stage` attribute names the failing stage (`align`, `refine`,
    `retarget`, or `segment`), and is reported by the command line.
    """

    def __init__(self, msg, stage = None):
        super().__init__(msg)
        self.stage = stage


class InsufficientObservationsError(ProcessingError):
    """Raised when too few confident 2D keypoints are available."""

    def __init__(self, msg, stage = 'align'):
        super().__init__(msg, stage = stage)


class PointBehindCameraError(ProcessingError):
    """Raised when a point to project lies on or behind the camera plane."""

    def __init__(self, msg, index = None):
        super().__init__(msg, stage = 'align')
        self.index = index


class SnapshotError(DemoBotError, ValueError):
    """Raised when a serialized world state is invalid."""


class SnapshotVersionError(SnapshotError):
    pass


class SnapshotDecodeError(SnapshotError):
    pass


class TrainingAbortedError(DemoBotError, RuntimeError):
    """Raised when training encounters a non-finite quantity.

    Carries a dictionary of `diagnostics` and, when available, the
    path of the last checkpoint written before the failure.
    """

    def __init__(self, msg, diagnostics = None, checkpoint = None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}
        self.checkpoint = checkpoint
