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
World states and their binary snapshots.

A snapshot is a small header followed by a pickled payload of plain
NumPy arrays and Python scalars:

    magic (6 bytes) | version (uint16) | payload length (uint32) |
    CRC-32 of payload (uint32) | payload

so a restored state is bit-identical to the serialized one, and a
truncated or corrupted snapshot is rejected before anything is built.
"""

import pickle
import struct
import zlib
from dataclasses import fields
from typing import Dict, Tuple

import numpy as np

from demobot.framework import DemoBotSerializable
from demobot.errors import SnapshotDecodeError, SnapshotVersionError
from demobot.kinematics.transforms import Pose
from demobot.sim.actuator import ActuatorParams

SNAPSHOT_MAGIC = b'DBSNAP'
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct('<6sHII')


class WorldState(DemoBotSerializable):
    """The full dynamic state of the world.

    Parameters
    ----------
    q, qd : np.ndarray
        Full-body joint positions (rad) and velocities (rad/s).
    objects : dict
        The pose of every object.
    velocities : dict
        The linear velocity of every object (m/s).
    attachments : dict
        For every hand holding an object, the object's name and its
        pose relative to the hand's base frame.
    initial : dict
        Object poses at the start of the task (the lift reference).
    segment : int
        The index of the current segment.
    segment_step : int
        Control steps since the current segment started.
    step : int
        Control steps since the start of the task.
    reached : set
        Hands which have reached their object, unfreezing their fingers.
    actuators : ActuatorParams
        The actuator parameters sampled for the episode the state
        belongs to.
    """
    serializable = frozenset(('q', 'qd', 'objects', 'velocities', 'attachments',
                              'initial', 'segment', 'segment_step', 'step', 'reached',
                              'actuators'))
    state_override = serializable

    def __init__(self, q, qd = None, objects = None, velocities = None,
                 attachments = None, initial = None, segment = 0,
                 segment_step = 0, step = 0, reached = (), actuators = None):
        self.q = np.array(q, dtype = np.float64)
        self.qd = np.zeros_like(self.q) if qd is None else np.array(qd, dtype = np.float64)
        self.objects: Dict[str, Pose] = dict(objects or {})
        self.velocities = {name: np.zeros(3) for name in self.objects}
        self.velocities.update({k: np.array(v, dtype = np.float64)
                                for k, v in (velocities or {}).items()})
        self.attachments: Dict[str, Tuple[str, Pose]] = dict(attachments or {})
        self.initial: Dict[str, Pose] = dict(initial or self.objects)
        self.segment = int(segment)
        self.segment_step = int(segment_step)
        self.step = int(step)
        self.reached = set(reached)
        self.actuators: ActuatorParams = actuators

    def __repr__(self):
        return f"<WorldState step={self.step} segment={self.segment} " \
               f"attachments={ {k: v[0] for k, v in self.attachments.items()} }>"

    def copy(self):
        return WorldState(self.q.copy(), self.qd.copy(), self.objects,
                          {k: v.copy() for k, v in self.velocities.items()},
                          self.attachments, self.initial, self.segment,
                          self.segment_step, self.step, self.reached, self.actuators)

    def attached(self, name):
        """The hand holding object `name`, or `None`."""
        for side, (obj, _) in self.attachments.items():
            if obj == name:
                return side
        return None

    def to_payload(self):
        return {
            'q': self.q, 'qd': self.qd,
            'objects': {k: p.as_array() for k, p in self.objects.items()},
            'velocities': dict(self.velocities),
            'attachments': {k: (obj, p.as_array())
                            for k, (obj, p) in self.attachments.items()},
            'initial': {k: p.as_array() for k, p in self.initial.items()},
            'segment': self.segment, 'segment_step': self.segment_step,
            'step': self.step, 'reached': sorted(self.reached),
            'actuators': None if self.actuators is None else
            {f.name: getattr(self.actuators, f.name) for f in fields(ActuatorParams)}}

    @classmethod
    def from_payload(cls, payload):
        return cls(payload['q'], payload['qd'],
                   {k: Pose.from_array(v) for k, v in payload['objects'].items()},
                   payload['velocities'],
                   {k: (obj, Pose.from_array(p))
                    for k, (obj, p) in payload['attachments'].items()},
                   {k: Pose.from_array(v) for k, v in payload['initial'].items()},
                   payload['segment'], payload['segment_step'],
                   payload['step'], payload['reached'],
                   None if payload['actuators'] is None else
                   ActuatorParams(**payload['actuators']))

    def __eq__(self, other):
        if not isinstance(other, WorldState):
            return NotImplemented
        a, b = self.to_payload(), other.to_payload()
        if a.keys() != b.keys():
            return False
        return all(_equal(a[k], b[k]) for k in a)


def _equal(a, b):
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and \
               all(_equal(a[k], b[k]) for k in a)
    if isinstance(a, (tuple, list)):
        return isinstance(b, (tuple, list)) and len(a) == len(b) and \
               all(_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def serialize_state(state: WorldState) -> bytes:
    """Serializes a world state into a versioned snapshot."""
    payload = pickle.dumps(state.to_payload(), protocol = 4)
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
                          len(payload), zlib.crc32(payload))
    return header + payload


def restore_state(snapshot: bytes) -> WorldState:
    """Restores a world state from `serialize_state` output.

    Raises a `SnapshotVersionError` for snapshots written by another
    snapshot version, and a `SnapshotDecodeError` for anything which is
    truncated, corrupted, or not a snapshot at all.
    """
    if not isinstance(snapshot, (bytes, bytearray)) or len(snapshot) < _HEADER.size:
        raise SnapshotDecodeError(
            f"A snapshot needs at least {_HEADER.size} bytes, got "
            f"{len(snapshot) if isinstance(snapshot, (bytes, bytearray)) else type(snapshot)}.")
    magic, version, length, checksum = _HEADER.unpack_from(snapshot)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotDecodeError("The given bytes are not a DemoBot snapshot.")
    if version != SNAPSHOT_VERSION:
        raise SnapshotVersionError(
            f"Snapshot version {version} cannot be restored by this version "
            f"of DemoBot, which writes version {SNAPSHOT_VERSION}.")
    payload = bytes(snapshot[_HEADER.size:])
    if len(payload) != length:
        raise SnapshotDecodeError(
            f"The snapshot is truncated: expected {length} payload bytes, "
            f"got {len(payload)}.")
    if zlib.crc32(payload) != checksum:
        raise SnapshotDecodeError("The snapshot's checksum does not match.")
    try:
        return WorldState.from_payload(pickle.loads(payload))
    except (pickle.UnpicklingError, KeyError, TypeError, ValueError, EOFError) as e:
        raise SnapshotDecodeError(f"Could not decode the snapshot: {e!r}.")
