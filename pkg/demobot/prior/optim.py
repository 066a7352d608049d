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
A Levenberg-Marquardt solver shared by the motion-prior optimizations.

Hand alignment, object-pose refinement, and retargeting are all small
nonlinear least-squares problems over a parameter vector, some of which
include rotations. The solver therefore accepts an optional `retract`
(how a step is applied to the parameters, for on-manifold updates) and
an optional `project` (bounds or trust regions applied to every trial
point). A trial point is accepted only if it strictly decreases the
cost, so the recorded cost trace is strictly decreasing.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from demobot.framework import Parameters
from demobot.errors import ConfigurationError


@dataclass(repr = False)
class LMParameters(Parameters):
    """Parameters for `levenberg_marquardt`.

    Parameters
    ----------
    max_iters : int
        The maximum number of (accepted or rejected) iterations.
    initial_damping : float
        The initial damping, relative to the largest diagonal
        entry of the Gauss-Newton matrix.
    cost_tol : float
        Absolute cost below which the solver stops.
    rel_cost_tol : float
        Relative cost decrease below which the solver stops.
    step_tol : float
        Step size (relative to the parameter norm) below which it stops.
    grad_tol : float
        Infinity norm of the gradient below which the solver stops.
    fd_step : float
        Step for central-difference Jacobians.
    """
    max_iters: int = 100
    initial_damping: float = 1e-3
    cost_tol: float = 1e-20
    rel_cost_tol: float = 1e-12
    step_tol: float = 1e-12
    grad_tol: float = 1e-12
    fd_step: float = 1e-6

    def validate(self):
        if self.max_iters < 0:
            raise ConfigurationError("`max_iters` must be non-negative.")
        if self.initial_damping <= 0 or self.fd_step <= 0:
            raise ConfigurationError(
                "`initial_damping` and `fd_step` must be positive.")


@dataclass
class LMResult(object):
    """The result of a Levenberg-Marquardt solve.

    `cost_trace` starts with the initial cost and holds the cost after
    every accepted step; `status` names the stopping criterion.
    """
    x: np.ndarray
    cost: float
    cost_trace: List[float] = field(default_factory = list)
    iterations: int = 0
    status: str = ''

    @property
    def initial_cost(self):
        return self.cost_trace[0]

    @property
    def accepted_steps(self):
        return len(self.cost_trace) - 1


def _additive(x, delta):
    return x + delta


def numeric_jacobian(residual_fn, x, retract = None, step = 1e-6):
    """Central-difference Jacobian of `residual_fn` at `x`.

    Perturbations are applied through `retract`, so the columns are
    derivatives with respect to the local step coordinates.
    """
    retract = retract or _additive
    columns = []
    for i in range(len(x)):
        delta = np.zeros(len(x))
        delta[i] = step
        forward = residual_fn(retract(x, delta))
        backward = residual_fn(retract(x, -delta))
        columns.append((forward - backward) / (2.0 * step))
    return np.stack(columns, axis = 1)


def levenberg_marquardt(residual_fn: Callable, x0,
                        jacobian_fn: Optional[Callable] = None,
                        retract: Optional[Callable] = None,
                        project: Optional[Callable] = None,
                        params: Optional[LMParameters] = None):
    """Minimizes `||residual_fn(x)||²` with Levenberg-Marquardt.

    Parameters
    ----------
    residual_fn : callable
        Maps a parameter vector to a residual vector.
    x0 : array-like
        The initial parameters.
    jacobian_fn : callable
        Maps a parameter vector to the residual Jacobian with respect
        to the local step coordinates; central differences if `None`.
    retract : callable
        `retract(x, delta)` applies a step; additive if `None`.
    project : callable
        Applied to every trial point (bounds, trust regions).
    params : LMParameters
        Solver parameters.

    Returns
    -------
    An `LMResult`.
    """
    params = params or LMParameters()
    retract = retract or _additive
    project = project or (lambda v: v)

    x = np.array(x0, dtype = np.float64)
    residual = residual_fn(x)
    cost = float(residual @ residual)
    trace = [cost]

    def _jac(v):
        if jacobian_fn is not None:
            return jacobian_fn(v)
        return numeric_jacobian(residual_fn, v, retract, params.fd_step)

    if cost <= params.cost_tol:
        return LMResult(x, cost, trace, 0, 'cost')

    jac = _jac(x)
    hessian = jac.T @ jac
    gradient = jac.T @ residual
    mu = params.initial_damping * max(float(np.max(np.diag(hessian))), 1e-12)
    nu = 2.0
    eye = np.eye(len(x))
    status, iterations = 'max_iters', 0

    while iterations < params.max_iters:
        iterations += 1
        if np.max(np.abs(gradient)) <= params.grad_tol:
            status = 'gradient'
            break
        try:
            delta = np.linalg.solve(hessian + mu * eye, -gradient)
        except np.linalg.LinAlgError:
            status = 'singular'
            break
        if np.linalg.norm(delta) <= params.step_tol * (np.linalg.norm(x) + params.step_tol):
            status = 'step'
            break

        candidate = project(retract(x, delta))
        c_residual = residual_fn(candidate)
        c_cost = float(c_residual @ c_residual)
        predicted = float(delta @ (mu * delta - gradient))
        if np.isfinite(c_cost) and c_cost < cost:
            rho = (cost - c_cost) / predicted if predicted > 0 else 1.0
            improvement = (cost - c_cost) / cost
            x, residual, cost = candidate, c_residual, c_cost
            trace.append(cost)
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * min(rho, 1.0) - 1.0) ** 3)
            nu = 2.0
            if cost <= params.cost_tol:
                status = 'cost'
                break
            if improvement <= params.rel_cost_tol:
                status = 'rel_cost'
                break
            jac = _jac(x)
            hessian = jac.T @ jac
            gradient = jac.T @ residual
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e20:
                status = 'damping'
                break

    return LMResult(x, cost, trace, iterations, status)
