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

from demobot.errors import ConfigurationError
from demobot.models import (
    PolicyNet, PpoConfig, PPOAgent, RolloutBuffer, adapt_learning_rate,
    gaussian_kl, ppo_loss, ppo_update)


def test_default_configuration():
    config = PpoConfig()
    assert (config.steps_per_env, config.epochs, config.minibatches) == (24, 4, 32)
    assert config.clip == 0.2 and config.desired_kl == 0.008
    assert config.hidden == (256, 128, 64)
    assert PpoConfig(hidden = [8, 8]).hidden == (8, 8)


@pytest.mark.parametrize('overrides', [
    {'schedule': 'cosine'}, {'epochs': 0}, {'lr': 0.5}, {'gamma': 1.5}])
def test_invalid_configuration(overrides):
    with pytest.raises(ConfigurationError):
        PpoConfig(**overrides)


def test_adaptive_learning_rate():
    config = PpoConfig()
    assert adapt_learning_rate(5e-4, 0.02, config) == pytest.approx(3.3333e-4, rel = 1e-4)
    assert adapt_learning_rate(5e-4, 0.001, config) == pytest.approx(7.5e-4)
    assert adapt_learning_rate(5e-4, 0.008, config) == 5e-4
    assert adapt_learning_rate(9e-3, 0.0, config) == config.max_lr
    assert adapt_learning_rate(5e-4, 1.0, PpoConfig(schedule = 'fixed')) == 5e-4


def test_gaussian_kl():
    mean, std = torch.zeros(4, 3), torch.ones(4, 3)
    assert float(gaussian_kl(mean, std, mean, std)) == pytest.approx(0.0)
    # KL(N(0, 1) || N(1, 1)) is 1/2 per dimension.
    assert float(gaussian_kl(mean, std, mean + 1, std)) == pytest.approx(1.5)


def _batch(policy, n = 16, seed = 0):
    g = torch.Generator().manual_seed(seed)
    obs = torch.randn(n, policy.obs_dim, generator = g, dtype = torch.float64)
    with torch.no_grad():
        dist = policy.distribution(obs)
        actions = dist.mean + dist.stddev * torch.randn(
            dist.mean.shape, generator = g, dtype = torch.float64)
        logprobs = dist.log_prob(actions).sum(-1) \
            + 0.1 * torch.randn(n, generator = g, dtype = torch.float64)
        values = policy.value(obs)
    return {'obs': obs, 'actions': actions, 'logprobs': logprobs,
            'advantages': torch.randn(n, generator = g, dtype = torch.float64),
            'returns': values + torch.randn(n, generator = g, dtype = torch.float64),
            'values': values}


def test_loss_gradient_matches_finite_differences():
    torch.manual_seed(0)
    policy = PolicyNet(3, 2, hidden = ()).double()
    with torch.no_grad():
        for p in policy.parameters():
            p.normal_(0.0, 0.3)
    config = PpoConfig()
    batch = _batch(policy)

    loss, _ = ppo_loss(policy, batch, config)
    loss.backward()
    eps = 1e-6
    for param in (policy.actor[0].weight, policy.log_std, policy.critic[0].bias):
        analytic = param.grad.clone()
        numeric = torch.zeros_like(param)
        flat = param.data.view(-1)
        for i in range(flat.numel()):
            original = float(flat[i])
            with torch.no_grad():
                flat[i] = original + eps
                up = float(ppo_loss(policy, batch, config)[0])
                flat[i] = original - eps
                down = float(ppo_loss(policy, batch, config)[0])
                flat[i] = original
            numeric.view(-1)[i] = (up - down) / (2 * eps)
        assert torch.allclose(analytic, numeric, atol = 1e-6)


def _filled_buffer(agent, num_lanes = 4, steps = 8, seed = 0):
    rng = np.random.default_rng(seed)
    buffer = RolloutBuffer(num_lanes, steps, agent.policy.obs_dim,
                           agent.policy.action_dim)
    for _ in range(steps):
        obs = rng.normal(size = (num_lanes, agent.policy.obs_dim))
        act, nobs = agent.act(obs, np.zeros((num_lanes, agent.policy.action_dim)))
        buffer.add(nobs, act, rng.normal(size = num_lanes),
                   rng.uniform(size = num_lanes) < 0.1,
                   np.zeros((num_lanes, agent.policy.action_dim)))
    return buffer


def test_zero_advantages_leave_the_actor_unchanged():
    agent = PPOAgent(6, 3, PpoConfig(hidden = (16, ), minibatches = 4,
                                     value_normalization = False), seed = 1)
    with torch.no_grad():
        agent.policy.actor[-1].weight.normal_(0.0, 0.1)
    buffer = _filled_buffer(agent)
    buffer.advantages = np.zeros_like(buffer.rewards)
    buffer.returns = buffer.values + 1.0
    actor = [p.detach().clone() for p in agent.policy.actor.parameters()]
    critic = [p.detach().clone() for p in agent.policy.critic.parameters()]
    ppo_update(agent.policy, agent.optimizer, buffer, agent.config)
    for before, after in zip(actor, agent.policy.actor.parameters()):
        assert torch.equal(before, after)
    assert any(not torch.equal(b, a) for b, a in
               zip(critic, agent.policy.critic.parameters()))


def test_update_requires_returns():
    agent = PPOAgent(6, 3, PpoConfig(hidden = (16, )))
    with pytest.raises(ConfigurationError):
        ppo_update(agent.policy, agent.optimizer, _filled_buffer(agent), agent.config)


def test_agent_update():
    agent = PPOAgent(6, 3, PpoConfig(hidden = (16, ), minibatches = 4), seed = 2)
    buffer = _filled_buffer(agent)
    stats = agent.update(buffer, np.zeros((4, 6)))
    assert set(stats) == {'policy_loss', 'value_loss', 'entropy', 'approx_kl', 'lr'}
    assert all(np.isfinite(v) for v in stats.values())
    assert agent.lr == stats['lr']
    assert len(buffer) == 0
    assert agent.value_normalizer.count == 32
    assert agent.obs_normalizer.count == 0


def test_same_seed_same_agent():
    a = PPOAgent(6, 3, PpoConfig(hidden = (16, )), seed = 5)
    b = PPOAgent(6, 3, PpoConfig(hidden = (16, )), seed = 5)
    for pa, pb in zip(a.policy.parameters(), b.policy.parameters()):
        assert torch.equal(pa, pb)
    obs = np.ones((2, 6))
    act_a, _ = a.act(obs, np.zeros((2, 3)))
    act_b, _ = b.act(obs, np.zeros((2, 3)))
    assert np.array_equal(act_a.raw, act_b.raw)


def test_masked_dimensions_leave_the_loss_unchanged():
    torch.manual_seed(0)
    policy = PolicyNet(3, 2, hidden = (8, )).double()
    config = PpoConfig()
    batch = _batch(policy)
    batch['masks'] = torch.tensor([[1.0, 0.0]] * 16, dtype = torch.float64)
    perturbed = dict(batch, actions = batch['actions'].clone())
    perturbed['actions'][:, 1] += 3.0
    loss, _ = ppo_loss(policy, batch, config)
    other, _ = ppo_loss(policy, perturbed, config)
    assert float(loss) == pytest.approx(float(other), abs = 1e-12)

    mean, std = torch.zeros(4, 3), torch.ones(4, 3)
    mask = torch.tensor([1.0, 1.0, 0.0])
    assert float(gaussian_kl(mean, std, mean + 1, std, mask)) == pytest.approx(1.0)
