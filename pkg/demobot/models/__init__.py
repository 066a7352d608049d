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

from .normalization import (
    EmpiricalNormalizer, ValueNormalizer, normalize_obs, normalize_values)
from .policy import PolicyNet, ResidualAction, RESIDUAL_CLIP, act_residual, masked_sum
from .storage import RolloutBuffer, compute_gae, normalize_advantages
from .ppo import (
    PpoConfig, PPOAgent, adapt_learning_rate, gaussian_kl, ppo_loss, ppo_update)
from .checkpoint import (
    CHECKPOINT_VERSION, save_checkpoint, load_checkpoint, restore_agent)
