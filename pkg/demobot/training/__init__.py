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

from .resets import (
    RESET_KINDS, ResetPolicy, SnapshotStore, record_success, choose_reset)
from .metrics import (
    EpisodeTracker, MetricsWriter, RewardTermWriter, metric_columns,
    summarize_episodes, write_manifest, git_describe)
from .trainer import RunConfig, Trainer, load_run_config, TRAIN_MODES
from .evaluation import (
    EVAL_MODES, EvalReport, evaluate, evaluate_checkpoint, run_episode)
from .compare import ABLATIONS, cmd_compare
