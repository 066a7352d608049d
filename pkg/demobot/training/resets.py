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
Success-gated resets.

Every lane keeps the latest snapshot taken when it completed each
stage. When an episode fails at stage `i`, the lane restarts from the
global initial state with probability `p_init`, and otherwise from its
own snapshot of stage `i - 1`, so later stages get practiced without
replaying the whole demonstration.
"""

from collections import Counter
from dataclasses import dataclass

from demobot.framework import Parameters
from demobot.errors import ConfigurationError, SnapshotError
from demobot.sim.state import restore_state
from demobot.utils.logging import log
from demobot.utils.random import make_rng

RESET_KINDS = ('s0', 'snapshot', 'fallback')


@dataclass(repr = False)
class ResetPolicy(Parameters):
    """The probability `p_init` of restarting from the initial state."""
    p_init: float = 0.9

    def validate(self):
        if not 0.0 <= self.p_init <= 1.0:
            raise ConfigurationError(
                f"`p_init` must lie in [0, 1], got {self.p_init}.")


class SnapshotStore(object):
    """Per-lane, per-stage success snapshots (latest wins)."""

    def __init__(self, num_lanes):
        self._entries = [dict() for _ in range(int(num_lanes))]
        self._counts = Counter()

    def __repr__(self):
        return f"<SnapshotStore lanes={len(self._entries)} entries={len(self)}>"

    def __len__(self):
        return sum(len(e) for e in self._entries)

    @property
    def num_lanes(self):
        return len(self._entries)

    @property
    def counts(self):
        """How many resets of each kind have been chosen."""
        return dict(self._counts)

    def get(self, lane, stage):
        """Returns `(snapshot, episode)` for a lane's stage, or None."""
        return self._entries[lane].get(stage)

    def stages(self, lane):
        return sorted(self._entries[lane])

    def _count(self, kind):
        self._counts[kind] += 1

    def metadata(self):
        return {'lanes': [{str(stage): episode for stage, (_, episode)
                           in sorted(entries.items())}
                          for entries in self._entries],
                'counts': dict(self._counts)}


def record_success(store: SnapshotStore, lane, stage, snapshot: bytes, episode = 0):
    """Stores a lane's success snapshot of a stage, replacing older ones.

    The snapshot is decoded first; an invalid one raises a
    `SnapshotError` and leaves the store untouched.
    """
    if not 0 <= lane < store.num_lanes:
        raise ConfigurationError(
            f"Lane {lane} is out of range for a store of {store.num_lanes} lanes.")
    state = restore_state(snapshot)
    if state.segment != stage + 1:
        raise SnapshotError(
            f"A success snapshot of stage {stage} must start segment "
            f"{stage + 1}, but this one starts segment {state.segment}.")
    store._entries[lane][stage] = (bytes(snapshot), int(episode))
    return store


def choose_reset(store: SnapshotStore, lane, failed_stage,
                 policy: ResetPolicy = None, rng = None):
    """Chooses where a failed lane restarts.

    Returns
    -------
    The snapshot to restart from (None for the initial state) and the
    kind of reset: `s0`, `snapshot`, or `fallback` when a snapshot was
    drawn but the lane has none for the previous stage.
    """
    policy = policy or ResetPolicy()
    rng = make_rng(rng)
    if failed_stage <= 0:
        store._count('s0')
        return None, 's0'
    if rng.uniform() < policy.p_init:
        store._count('s0')
        return None, 's0'
    entry = store.get(lane, failed_stage - 1)
    if entry is None:
        log(f"Lane {lane} has no snapshot of stage {failed_stage - 1}; "
            f"resetting to the initial state.", 'debug')
        store._count('fallback')
        return None, 'fallback'
    store._count('snapshot')
    return entry[0], 'snapshot'
