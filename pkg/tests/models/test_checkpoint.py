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

import pytest
import numpy as np
import torch

from demobot.errors import FormatError
from demobot.models import (
    CHECKPOINT_VERSION, PpoConfig, PPOAgent, load_checkpoint,
    restore_agent, save_checkpoint)
from demobot.rewards import CurriculumParams, CurriculumState


@pytest.fixture
def agent():
    agent = PPOAgent(7, 3, PpoConfig(hidden = (16, 8), lr = 3e-4), seed = 11)
    agent.obs_normalizer.update(np.random.default_rng(0).normal(size = (50, 7)))
    agent.value_normalizer.update(np.arange(10.0))
    agent.lr = 2e-4
    return agent


def test_checkpoint_round_trip(agent, tmp_path):
    curriculum = CurriculumState(CurriculumParams())
    path = save_checkpoint(str(tmp_path / 'run' / 'last.pt'), agent,
                           curriculum = curriculum, resets = {'stored': [[0, 1]]},
                           run = {'task': 'sync_assembly'}, progress = {'update': 3})
    contents = load_checkpoint(path)
    assert contents['version'] == CHECKPOINT_VERSION
    assert contents['run'] == {'task': 'sync_assembly'}
    assert contents['progress'] == {'update': 3}
    assert contents['curriculum'] == curriculum.state_dict()

    restored = restore_agent(contents)
    assert restored.config == agent.config
    assert restored.lr == 2e-4
    for a, b in zip(agent.policy.parameters(), restored.policy.parameters()):
        assert torch.equal(a, b)
    assert np.array_equal(restored.obs_normalizer.mean, agent.obs_normalizer.mean)
    assert float(restored.value_normalizer.std) == pytest.approx(float(agent.value_normalizer.std))

    obs = np.random.default_rng(1).normal(size = (4, 7))
    a, _ = agent.act(obs, np.zeros((4, 3)), mode = 'deterministic')
    b, _ = restored.act(obs, np.zeros((4, 3)), mode = 'deterministic')
    assert np.array_equal(a.action, b.action)
    assert np.array_equal(a.value, b.value)


def test_checkpoint_version_is_checked(agent, tmp_path):
    path = save_checkpoint(str(tmp_path / 'last.pt'), agent)
    contents = torch.load(path, weights_only = True)
    contents['version'] = CHECKPOINT_VERSION + 1
    torch.save(contents, path)
    with pytest.raises(FormatError) as exec_info:
        load_checkpoint(path)
    assert 'version' in str(exec_info.value)


def test_invalid_checkpoints(tmp_path):
    with pytest.raises(FormatError):
        load_checkpoint(str(tmp_path / 'missing.pt'))
    path = tmp_path / 'garbage.pt'
    path.write_bytes(b'not a checkpoint')
    with pytest.raises(FormatError):
        load_checkpoint(str(path))
    torch.save({'weights': torch.zeros(2)}, str(tmp_path / 'other.pt'))
    with pytest.raises(FormatError):
        load_checkpoint(str(tmp_path / 'other.pt'))
