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
Scripted, synthetic demonstrations with known ground truth.
"""

from .options import TaskKind, NoiseSpec, SUBGOAL_COUNTS
from .scripts import (
    TaskScript, Waypoint, Carry, load_script, minimum_jerk, wrist_for,
    GRASP_OFFSET
)
from .generator import (
    SyntheticDemonstration, DemonstrationGenerator, synth_demo,
    estimate_initial_hand, true_hand_track,
    DEMONSTRATION_FILE, GROUND_TRUTH_FILE
)
