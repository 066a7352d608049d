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
from demobot.prior import LMParameters, levenberg_marquardt, numeric_jacobian


def _rosenbrock(x):
    return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])


def _rosenbrock_jacobian(x):
    return np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])


def test_numeric_jacobian_matches_analytic():
    for x in ([-1.2, 1.0], [0.3, -0.7], [2.0, 2.0]):
        x = np.array(x)
        assert np.allclose(numeric_jacobian(_rosenbrock, x),
                           _rosenbrock_jacobian(x), atol = 1e-6)


@pytest.mark.parametrize('analytic', [True, False])
def test_lm_solves_rosenbrock(analytic):
    result = levenberg_marquardt(
        _rosenbrock, [-1.2, 1.0],
        jacobian_fn = _rosenbrock_jacobian if analytic else None,
        params = LMParameters(max_iters = 500))
    assert np.allclose(result.x, [1.0, 1.0], atol = 1e-6)
    assert result.cost < 1e-12
    assert result.initial_cost == pytest.approx(24.2)


def test_lm_cost_trace_is_strictly_decreasing():
    result = levenberg_marquardt(_rosenbrock, [-1.2, 1.0],
                                 params = LMParameters(max_iters = 500))
    trace = result.cost_trace
    assert len(trace) == result.accepted_steps + 1
    assert all(b < a for a, b in zip(trace, trace[1:]))


def test_lm_linear_least_squares():
    rng = np.random.default_rng(3)
    a = rng.normal(size = (20, 4))
    b = rng.normal(size = 20)
    result = levenberg_marquardt(lambda x: a @ x - b, np.zeros(4))
    expected, *_ = np.linalg.lstsq(a, b, rcond = None)
    assert np.allclose(result.x, expected, atol = 1e-6)


def test_lm_stops_immediately_at_zero_cost():
    result = levenberg_marquardt(_rosenbrock, [1.0, 1.0])
    assert result.iterations == 0
    assert result.status == 'cost'
    assert result.accepted_steps == 0


def test_lm_projection_keeps_iterates_feasible():
    # The unconstrained minimum (1, 1) lies outside the box.
    result = levenberg_marquardt(
        _rosenbrock, [0.0, 0.0],
        project = lambda x: np.clip(x, -0.5, 0.5),
        params = LMParameters(max_iters = 200))
    assert np.all(np.abs(result.x) <= 0.5)
    assert result.cost < result.initial_cost


def test_lm_parameters_validated():
    with pytest.raises(ConfigurationError):
        LMParameters(initial_damping = 0.0)
    with pytest.raises(ConfigurationError):
        LMParameters(max_iters = -1)
