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
Versioned training checkpoints.

A checkpoint holds the network parameters, the optimizer and normalizer
state, the curriculum state, the reset store's metadata and the
configurations used, so an evaluation can rebuild the agent and a run
can be inspected after the fact.
"""

import os

import torch

from demobot.errors import FormatError
from demobot.models.ppo import PPOAgent, PpoConfig
from demobot.utils.io import create_dir
from demobot.utils.logging import log

CHECKPOINT_VERSION = 1
CHECKPOINT_KIND = 'demobot-checkpoint'


def _plain(value):
    # Checkpoints are loaded with `weights_only`, which accepts
    # containers of primitives and tensors only.
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def save_checkpoint(path, agent: PPOAgent, curriculum = None, resets = None,
                    run = None, progress = None):
    """Writes a checkpoint.

    Parameters
    ----------
    path : str
        The output file.
    agent : PPOAgent
        The agent whose state is saved.
    curriculum : CurriculumState
        The curriculum state, if any.
    resets : dict
        Metadata of the reset store (which lanes hold which stages).
    run : dict
        The run configuration.
    progress : dict
        Counters such as the update index and environment steps.
    """
    if os.path.dirname(path):
        create_dir(os.path.dirname(path))
    contents = {
        'kind': CHECKPOINT_KIND,
        'version': CHECKPOINT_VERSION,
        'agent': agent.state_dict(),
        'ppo_config': _plain(agent.config.to_dict()),
        'curriculum': None if curriculum is None else _plain(curriculum.state_dict()),
        'resets': _plain(resets or {}),
        'run': _plain(run or {}),
        'progress': _plain(progress or {})}
    contents['agent']['architecture'] = _plain(contents['agent']['architecture'])
    torch.save(contents, path)
    log(f"Saved checkpoint to {path}.", 'debug')
    return path


def load_checkpoint(path):
    """Reads a checkpoint, checking its kind and version."""
    if not os.path.exists(path):
        raise FormatError(f"No checkpoint exists at {path}.")
    try:
        contents = torch.load(path, map_location = 'cpu', weights_only = True)
    except Exception as e:
        raise FormatError(f"Could not read the checkpoint at {path}: {e}")
    if not isinstance(contents, dict) or contents.get('kind') != CHECKPOINT_KIND:
        raise FormatError(f"The file at {path} is not a DemoBot checkpoint.")
    if contents.get('version') != CHECKPOINT_VERSION:
        raise FormatError(
            f"Unsupported checkpoint version {contents.get('version')} at "
            f"{path} (this version of DemoBot reads version {CHECKPOINT_VERSION}).")
    return contents


def restore_agent(contents) -> PPOAgent:
    """Rebuilds the agent stored in a loaded checkpoint."""
    architecture = contents['agent']['architecture']
    config = PpoConfig.from_dict(contents['ppo_config'])
    agent = PPOAgent(architecture['obs_dim'], architecture['action_dim'],
                     config = config,
                     residual_clip = contents['agent']['residual_clip'])
    agent.load_state_dict(contents['agent'])
    return agent
