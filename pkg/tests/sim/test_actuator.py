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

from demobot.errors import ConfigurationError
from demobot.sim import (
    ActuatorParams, ActuatorTemplate, RANDOMIZATION_RANGES,
    compute_joint_torque, sample_actuator_params, torque_envelope)


def _nominal(n = 1, **kwargs):
    return ActuatorParams.nominal(ActuatorTemplate(**kwargs), n)


def test_pd_torque_inside_envelope():
    params = _nominal(kp = 10.0, kd = 0.0, tau_stall = 10.0)
    tau = compute_joint_torque(params, [0.1], [0.0], [0.0])
    assert tau[0] == pytest.approx(1.0)


def test_no_load_speed_blocks_positive_torque():
    params = _nominal(omega_max = 6.0)
    tau = compute_joint_torque(params, [1.0], [0.0], [6.0])
    assert tau[0] == 0.0


def test_envelope_at_rest():
    params = _nominal(tau_stall = 1.0)
    low, high = torque_envelope(params, np.zeros(1))
    assert low[0] == pytest.approx(-2.0) and high[0] == pytest.approx(2.0)


def test_bias_offsets_the_measurement():
    params = _nominal(kp = 10.0, kd = 0.0)
    params.bias[:] = 0.05
    tau = compute_joint_torque(params, [0.1], [0.0], [0.0])
    assert tau[0] == pytest.approx(0.5)


@pytest.mark.parametrize('mode', ['literal', 'stall_clamp'])
def test_applied_torque_respects_envelope(mode):
    rng = np.random.default_rng(0)
    template = _nominal(1000)
    for _ in range(100):
        params = sample_actuator_params(template, rng)
        q_des, q = rng.uniform(-3, 3, (2, 1000))
        qd, qd_des = rng.uniform(-12, 12, (2, 1000))
        tau = compute_joint_torque(params, q_des, q, qd, qd_des, mode = mode)
        low, high = torque_envelope(params, qd)
        scaled = tau / params.gamma
        assert np.all(scaled >= low - 1e-9) and np.all(scaled <= high + 1e-9)
        bound = params.gamma * params.tau_stall / (1 - params.nu) * \
                (1 + np.abs(qd) / params.omega_max)
        assert np.all(np.abs(tau) <= bound + 1e-9)
        if mode == 'stall_clamp':
            stalled = np.abs(qd) < params.nu * params.omega_max
            assert np.all(np.abs(scaled[stalled]) <= params.tau_stall[stalled] + 1e-9)


def test_sampled_parameters_stay_in_range():
    params = sample_actuator_params(_nominal(100000), np.random.default_rng(1))
    for name, (lo, hi) in RANDOMIZATION_RANGES.items():
        values = getattr(params, name)
        assert values.min() >= lo and values.max() <= hi
    assert 0.995 <= params.alpha_p.mean() <= 1.005


def test_joint_streams_are_independent():
    rng = np.random.default_rng(2)
    template = _nominal(2)
    draws = np.array([sample_actuator_params(template, rng).alpha_p
                      for _ in range(20000)])
    assert abs(np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]) < 0.03


def test_sampling_is_deterministic():
    template = _nominal(21)
    a = sample_actuator_params(template, np.random.default_rng(9))
    b = sample_actuator_params(template, np.random.default_rng(9))
    assert a == b
    assert np.array_equal(a.kp, template.kp)


def test_parameter_validation():
    with pytest.raises(ConfigurationError):
        ActuatorTemplate(tau_stall = 0.0)
    with pytest.raises(ConfigurationError):
        params = _nominal(3)
        ActuatorParams(params.kp, params.kd, params.alpha_p, params.alpha_d,
                       params.bias, np.full(3, 0.9), params.gamma,
                       params.tau_stall, params.omega_max)
    with pytest.raises(ConfigurationError):
        compute_joint_torque(_nominal(), [0.0], [0.0], [0.0], mode = 'soft')
