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
The stage-gated reward.

Every segment of a demonstration belongs to one of three phases,
`reach`, `grasp_lift` and `goal`, and the phase decides which of the
dense terms and sparse bonuses are active:

    term        reach   grasp_lift   goal
    r_reach       x         x         x
    r_grasp                 x         x
    r_goal                            x
    B_reach       x
    B_lift                  x
    B_goal                            x
    B_sync                            x
    B_switch                          x

Dense terms have the form `scale * (1 - tanh(d / length))`. Sparse
bonuses are latched by default, so each fires at most once per stage
and hand in an episode; in `indicator` mode they pay every step their
condition holds.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Union

from demobot.framework import Parameters, DemoBotSerializable
from demobot.errors import ConfigurationError, ContractViolationError
from demobot.prior.segments import PHASES

BONUS_MODES = ('latch', 'indicator')

# Which terms each phase activates.
DENSE_GATES = {'reach': ('reach', ),
               'grasp_lift': ('reach', 'grasp'),
               'goal': ('reach', 'grasp', 'goal')}
BONUS_GATES = {'reach': ('reach', ),
               'grasp_lift': ('lift', ),
               'goal': ('goal', 'sync', 'switch')}


@dataclass(repr = False)
class RewardSpec(Parameters):
    """Scales, length scales and thresholds of the reward terms.

    Parameters
    ----------
    reach_scale, grasp_scale, goal_scale : float
        Scales of the dense terms.
    reach_length, grasp_length, goal_length : float
        Length scales (m) of the dense terms.
    reach_bonus, lift_bonus, goal_bonus, sync_bonus, switch_bonus : float
        Values of the sparse bonuses.
    delta_reach : float
        Hand-to-object distance (m) under which an object is reached.
    delta_lift : float
        Height (m) above its initial height at which an object is lifted.
    sync_window : int
        Control steps within which both hands must reach their goals
        for the synchronization bonus.
    bonus_mode : str
        Either `latch` or `indicator`.
    """
    reach_scale: float = 1.0
    grasp_scale: float = 2.0
    goal_scale: float = 15.0
    reach_length: float = 0.3
    grasp_length: float = 0.05
    goal_length: float = 0.1
    reach_bonus: float = 50.0
    lift_bonus: float = 100.0
    goal_bonus: float = 1000.0
    sync_bonus: float = 2000.0
    switch_bonus: float = 2000.0
    delta_reach: float = 0.03
    delta_lift: float = 0.05
    sync_window: int = 10
    bonus_mode: str = 'latch'

    def validate(self):
        for name in ('reach_scale', 'grasp_scale', 'goal_scale',
                     'reach_length', 'grasp_length', 'goal_length',
                     'delta_reach', 'delta_lift'):
            if not getattr(self, name) > 0:
                raise ConfigurationError(
                    f"Reward parameter `{name}` must be positive, "
                    f"got {getattr(self, name)}.")
        for name in ('reach_bonus', 'lift_bonus', 'goal_bonus',
                     'sync_bonus', 'switch_bonus'):
            if getattr(self, name) < 0:
                raise ConfigurationError(
                    f"Reward bonus `{name}` cannot be negative, "
                    f"got {getattr(self, name)}.")
        if self.sync_window < 1:
            raise ConfigurationError("The sync window must be at least one step.")
        if self.bonus_mode not in BONUS_MODES:
            raise ConfigurationError(
                f"Unknown bonus mode '{self.bonus_mode}', "
                f"expected one of {BONUS_MODES}.")

    def dense(self, term, distance):
        """One dense term, `scale * (1 - tanh(distance / length))`."""
        scale = getattr(self, f'{term}_scale')
        length = getattr(self, f'{term}_length')
        return scale * (1.0 - math.tanh(distance / length))

    def bonus(self, name):
        return getattr(self, f'{name}_bonus')


@dataclass(frozen = True)
class Measurements(object):
    """The quantities one hand's reward terms are computed from.

    Parameters
    ----------
    d_h2o : float
        Distance from the hand's grasp site to the object's center (m).
    d_f2o : float
        Mean distance from the fingertips to the object's surface (m).
    d_goal : float
        Mean keypoint distance from the object to its goal (m).
    lift : float
        Height of the object above its initial height (m).
    """
    d_h2o: float
    d_f2o: float
    d_goal: float
    lift: float = 0.0

    def __post_init__(self):
        for name in ('d_h2o', 'd_f2o', 'd_goal'):
            value = getattr(self, name)
            if not value >= 0:
                raise ContractViolationError(
                    f"Distance `{name}` must be non-negative, got {value}.")


class StageEvents(DemoBotSerializable):
    """Per-step reward events, and the latches of one episode.

    `reached`, `lifted` and `goal_reached` map each hand to whether its
    condition held on the last step, and `switch_entered` to whether
    that step entered the switch segment. `latches` holds the
    `(stage, bonus, hand)` keys of every bonus paid this episode, and
    `goal_steps` the first step each hand reached each stage's goal.
    """
    serializable = frozenset(('reached', 'lifted', 'goal_reached',
                              'switch_entered', 'latches', 'goal_steps'))
    state_override = serializable

    def __init__(self):
        self.reached = {}
        self.lifted = {}
        self.goal_reached = {}
        self.switch_entered = False
        self.latches = set()
        self.goal_steps = {}

    def __repr__(self):
        return f"<StageEvents latches={sorted(self.latches)}>"

    def __eq__(self, other):
        return isinstance(other, StageEvents) and \
               self.__getstate__() == other.__getstate__()

    def latched(self, stage, bonus, hand = None):
        return (stage, bonus, hand) in self.latches

    def reach_latched(self, hand):
        """Whether `hand` reached its object in any stage this episode."""
        return any(key[1] == 'reach' and key[2] == hand for key in self.latches)

    def clear_step(self):
        self.reached, self.lifted, self.goal_reached = {}, {}, {}
        self.switch_entered = False


@dataclass
class RewardResult(object):
    reward: float
    terms: Dict[str, float] = field(default_factory = dict)
    events: StageEvents = None


def _pay(spec, latches, terms, stage, bonus, hand = None):
    key = (stage, bonus, hand)
    if spec.bonus_mode == 'latch':
        if key in latches.latches:
            return
        latches.latches.add(key)
    terms[f'B_{bonus}'] += spec.bonus(bonus)


def compute_reward(measurements: Union[Mapping[str, Measurements], Measurements],
                   stage: int, phase: str, spec: RewardSpec,
                   curriculum, latches: StageEvents,
                   step: int = 0, sync: bool = False,
                   switch_entered: bool = False) -> RewardResult:
    """Computes one step's reward for the hands active in a stage.

    Parameters
    ----------
    measurements : dict or Measurements
        The `Measurements` of each hand paired with an object in this
        stage, keyed by hand; a single `Measurements` is one hand.
    stage : int
        The index of the current segment.
    phase : str
        The phase of the current segment.
    spec : RewardSpec
        The reward parameters.
    curriculum : CurriculumState
        Supplies the current goal threshold.
    latches : StageEvents
        The episode's events, updated in place.
    step : int
        The episode step, used for the synchronization window.
    sync : bool
        Whether both hands must reach their goals together.
    switch_entered : bool
        Whether this step entered the designated switch segment.

    Returns
    -------
    A `RewardResult` with the reward, the per-term breakdown, and the
    updated events.
    """
    if phase not in PHASES:
        raise ConfigurationError(
            f"Unknown phase '{phase}' for stage {stage}, expected one of {PHASES}.")
    if isinstance(measurements, Measurements):
        measurements = {None: measurements}
    delta_goal = curriculum.delta_goal if curriculum is not None else 0.0
    dense_gates, bonus_gates = DENSE_GATES[phase], BONUS_GATES[phase]

    terms = {'r_reach': 0.0, 'r_grasp': 0.0, 'r_goal': 0.0,
             'B_reach': 0.0, 'B_lift': 0.0, 'B_goal': 0.0,
             'B_sync': 0.0, 'B_switch': 0.0}
    latches.clear_step()
    for hand, m in measurements.items():
        if 'reach' in dense_gates:
            terms['r_reach'] += spec.dense('reach', m.d_h2o)
        if 'grasp' in dense_gates:
            terms['r_grasp'] += spec.dense('grasp', m.d_f2o)
        if 'goal' in dense_gates:
            terms['r_goal'] += spec.dense('goal', m.d_goal)

        reached = m.d_h2o < spec.delta_reach
        lifted = m.lift > spec.delta_lift
        at_goal = m.d_goal < delta_goal
        latches.reached[hand] = reached
        latches.lifted[hand] = lifted
        latches.goal_reached[hand] = at_goal

        if reached and 'reach' in bonus_gates:
            _pay(spec, latches, terms, stage, 'reach', hand)
        if lifted and 'lift' in bonus_gates:
            _pay(spec, latches, terms, stage, 'lift', hand)
        if at_goal and 'goal' in bonus_gates:
            latches.goal_steps.setdefault((stage, hand), step)
            _pay(spec, latches, terms, stage, 'goal', hand)

    if sync and 'sync' in bonus_gates and len(measurements) >= 2:
        times = [latches.goal_steps.get((stage, hand)) for hand in measurements]
        if all(t is not None for t in times):
            if max(times) - min(times) < spec.sync_window:
                _pay(spec, latches, terms, stage, 'sync')

    if switch_entered:
        latches.switch_entered = True
        _pay(spec, latches, terms, stage, 'switch')

    return RewardResult(reward = float(sum(terms.values())),
                        terms = terms, events = latches)


def max_episode_bonus(spec: RewardSpec, stages):
    """The largest total bonus an episode can collect in latch mode.

    `stages` is a sequence of `(phase, num_hands, sync, switch)`.
    """
    total = 0.0
    for phase, hands, sync, switch in stages:
        if phase == 'reach':
            total += hands * spec.reach_bonus
        elif phase == 'grasp_lift':
            total += hands * spec.lift_bonus
        else:
            total += hands * spec.goal_bonus
            total += spec.sync_bonus if sync and hands >= 2 else 0.0
        total += spec.switch_bonus if switch else 0.0
    return total
