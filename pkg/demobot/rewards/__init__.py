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
Stage-gated rewards, goal distances, and the training curricula.
"""

from .keypoints import (
    body_keypoints, object_keypoints, goal_distance, check_stage_success
)
from .reward import (
    RewardSpec, Measurements, StageEvents, RewardResult,
    compute_reward, max_episode_bonus, DENSE_GATES, BONUS_GATES
)
from .curriculum import (
    CurriculumParams, CurriculumState, update_curriculum, fingers_frozen
)
