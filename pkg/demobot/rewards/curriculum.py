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
Training curricula.

Two curricula shape training: the goal threshold `δ_goal` is annealed
geometrically whenever the rolling episode success rate is high
enough, and the pre-grasp curriculum keeps each hand frozen open until
that hand has reached its object.
"""

from collections import deque
from dataclasses import dataclass

from demobot.framework import Parameters, DemoBotSerializable
from demobot.errors import ConfigurationError
from demobot.utils.logging import log


@dataclass(repr = False)
class CurriculumParams(Parameters):
    """Parameters of the curricula.

    Parameters
    ----------
    delta_init : float
        The initial goal threshold (m).
    delta_final : float
        The floor of the goal threshold (m).
    window : int
        The number of recent episodes in the rolling success rate.
    threshold : float
        The success rate above which the threshold is annealed.
    decay : float
        The factor applied to the threshold at every anneal.
    pre_grasp : bool
        Whether hands are frozen open until they reach their object.
    """
    delta_init: float = 0.05
    delta_final: float = 0.005
    window: int = 200
    threshold: float = 0.8
    decay: float = 0.8
    pre_grasp: bool = True

    def validate(self):
        if not 0 < self.delta_final <= self.delta_init:
            raise ConfigurationError(
                f"Expected 0 < delta_final <= delta_init, got "
                f"delta_final = {self.delta_final}, delta_init = {self.delta_init}.")
        if self.window < 1:
            raise ConfigurationError("The success-rate window must be positive.")
        if not 0 < self.decay < 1:
            raise ConfigurationError(
                f"The annealing decay must lie in (0, 1), got {self.decay}.")
        if not 0 <= self.threshold <= 1:
            raise ConfigurationError(
                f"The success-rate threshold must lie in [0, 1], got {self.threshold}.")


class CurriculumState(DemoBotSerializable):
    """The current state of the curricula.

    Owned by the trainer, and updated between episodes only.
    """
    serializable = frozenset(('params', 'delta_goal', 'outcomes', 'trace', 'anneals'))
    state_override = serializable

    def __init__(self, params: CurriculumParams = None):
        self.params = params or CurriculumParams()
        self.delta_goal = self.params.delta_init
        self.outcomes = deque(maxlen = self.params.window)
        self.trace = [self.delta_goal]
        self.anneals = 0

    def __repr__(self):
        return f"<CurriculumState delta_goal={self.delta_goal:.4g} " \
               f"success_rate={self.success_rate:.3f}>"

    @property
    def success_rate(self):
        if not self.outcomes:
            return 0.0
        return sum(self.outcomes) / len(self.outcomes)

    @property
    def pre_grasp(self):
        return self.params.pre_grasp

    def state_dict(self):
        return {'delta_goal': self.delta_goal, 'outcomes': list(self.outcomes),
                'trace': list(self.trace), 'anneals': self.anneals,
                'params': self.params.to_dict()}

    @classmethod
    def from_state_dict(cls, contents):
        state = cls(CurriculumParams.from_dict(contents['params']))
        state.delta_goal = contents['delta_goal']
        state.outcomes.extend(contents['outcomes'])
        state.trace = list(contents['trace'])
        state.anneals = contents['anneals']
        return state


def update_curriculum(curriculum: CurriculumState, success: bool):
    """Records an episode outcome and anneals `δ_goal` when warranted.

    Once the window holds `window` outcomes and the success rate
    exceeds `threshold`, `δ_goal ← max(δ_final, decay · δ_goal)` and the
    window is cleared, so the next anneal needs a fresh window of
    outcomes at the tighter threshold.
    """
    params = curriculum.params
    curriculum.outcomes.append(bool(success))
    if len(curriculum.outcomes) == params.window and \
            curriculum.success_rate > params.threshold:
        previous = curriculum.delta_goal
        curriculum.delta_goal = max(params.delta_final, params.decay * previous)
        curriculum.outcomes.clear()
        if curriculum.delta_goal < previous:
            curriculum.anneals += 1
            log(f"Annealed the goal threshold from {previous:.4g} m "
                f"to {curriculum.delta_goal:.4g} m.", 'info')
    curriculum.trace.append(curriculum.delta_goal)
    return curriculum


def fingers_frozen(curriculum: CurriculumState, reached: bool):
    """Whether a hand's fingers are held open by the pre-grasp curriculum."""
    return curriculum.pre_grasp and not reached
