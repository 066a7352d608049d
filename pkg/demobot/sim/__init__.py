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
The desk-scale simulator: randomized actuation, object kinematics
under gravity, an attach/detach grasp model, and exact snapshots.
"""

from .actuator import (
    ActuatorTemplate, ActuatorParams, RANDOMIZATION_RANGES, TORQUE_MODES,
    compute_joint_torque, sample_actuator_params, torque_envelope
)
from .randomization import RandomizationSpec, randomize_initial_poses
from .objects import ObjectSpec
from .config import (
    EnvConfig, PhysicsSpec, TableSpec, GraspSpec, EpisodeSpec, TaskLayout,
    load_env_config
)
from .state import (
    WorldState, serialize_state, restore_state, SNAPSHOT_VERSION
)
from .world import World, StepEvents, step, update_grasp_attachments
from .env import DemoBotEnv, EnvOptions, VecEnv
