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
Demonstration and segment files.

Both are versioned line-per-record JSON text files (see
`demobot.utils.io`). A demonstration file has a metadata line followed
by one line per frame:

    {"t": 0, "left_det2d": [[u, v, c], ...], "right_det2d": [...],
     "obj_pose": {"peg": [w, x, y, z, tx, ty, tz], ...},
     "keyframe": false, "contact": false,
     "left_estimate": {"theta": [...], "beta": [...], "pose": [...]}, ...}

Ground-truth files use the same schema and additionally carry the true
camera-frame hand parameters of every frame (`left_hand`, `right_hand`).
Segment files have a metadata line followed by one line per segment.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from demobot.errors import FormatError
from demobot.kinematics.transforms import Pose
from demobot.prior.hand import CameraIntrinsics, Detections2D, HandParameters
from demobot.prior.segments import Keyframe, ObjectTrack, Segment
from demobot.utils.io import read_versioned_lines, write_versioned_lines

DEMONSTRATION_VERSION = 1
SEGMENTS_VERSION = 1


@dataclass
class Demonstration(object):
    """A (synthetic) demonstration: what the capture pipeline observed.

    Parameters
    ----------
    task : str
        The task the demonstration shows.
    intrinsics : CameraIntrinsics
        The calibrated camera intrinsics.
    camera : Pose
        The camera-to-world pose.
    keyframes : list of Keyframe
        The annotated keyframes, with their stage metadata.
    detections : dict
        The `Detections2D` of each demonstrating hand.
    objects : dict
        The `ObjectTrack` of each object.
    estimates : dict
        Per hand, the hand estimator's camera-frame `HandParameters`
        for every frame.
    hands : dict
        In ground-truth files only, the true camera-frame parameters.
    meta : dict
        Free-form metadata (seed, noise settings, script name, and the
        `assembly` record naming the peg and base objects).
    contact_flags : np.ndarray
        Per-frame assembly-contact flags; by default the frames of the
        keyframes marked as contact.
    """
    task: str
    intrinsics: CameraIntrinsics
    camera: Pose
    keyframes: List[Keyframe]
    detections: Dict[str, Detections2D]
    objects: Dict[str, ObjectTrack]
    estimates: Dict[str, List[HandParameters]] = field(default_factory = dict)
    hands: Optional[Dict[str, List[HandParameters]]] = None
    meta: dict = field(default_factory = dict)
    contact_flags: Optional[np.ndarray] = None

    @property
    def sides(self):
        return tuple(s for s in ('left', 'right') if s in self.detections)

    @property
    def num_frames(self):
        return len(next(iter(self.objects.values())))

    @property
    def is_ground_truth(self):
        return self.hands is not None

    @property
    def keyframe_indices(self):
        return [k.frame for k in self.keyframes]

    @property
    def contact(self):
        """Per-frame assembly-contact flags."""
        if self.contact_flags is not None:
            return np.asarray(self.contact_flags, dtype = bool)
        flags = np.zeros(self.num_frames, dtype = bool)
        flags[[k.frame for k in self.keyframes if k.contact]] = True
        return flags

    @property
    def contact_frames(self):
        return np.flatnonzero(self.contact).tolist()


def _detections_record(detections: Detections2D, t):
    points, confidence = detections.frame(t)
    return np.concatenate([points, confidence[:, None]], axis = 1).tolist()


def write_demonstration(path, demo: Demonstration):
    """Writes a demonstration (or ground-truth) file."""
    meta = {
        'task': demo.task,
        'kind': 'ground_truth' if demo.is_ground_truth else 'demonstration',
        'sides': list(demo.sides),
        'objects': list(demo.objects),
        'num_frames': demo.num_frames,
        'intrinsics': demo.intrinsics.to_dict(),
        'camera': demo.camera.as_array().tolist(),
        'keyframes': [k.to_dict() for k in demo.keyframes],
        'extra': demo.meta}
    keyframes = set(demo.keyframe_indices)
    contact = demo.contact

    def _records():
        yield {'meta': meta}
        for t in range(demo.num_frames):
            record = {'t': t, 'keyframe': t in keyframes,
                      'contact': bool(contact[t]),
                      'obj_pose': {name: track[t].as_array().tolist()
                                   for name, track in demo.objects.items()}}
            for side in demo.sides:
                record[f'{side}_det2d'] = _detections_record(demo.detections[side], t)
                if side in demo.estimates:
                    record[f'{side}_estimate'] = demo.estimates[side][t].to_dict()
                if demo.hands is not None:
                    record[f'{side}_hand'] = demo.hands[side][t].to_dict()
            yield record

    write_versioned_lines(path, 'demonstration', DEMONSTRATION_VERSION, _records())


def read_demonstration(path) -> Demonstration:
    """Reads a file written by `write_demonstration`."""
    records = read_versioned_lines(path, 'demonstration', DEMONSTRATION_VERSION)
    if not records or 'meta' not in records[0]:
        raise FormatError(f"The demonstration at {path} has no metadata line.")
    meta, frames = records[0]['meta'], records[1:]
    try:
        if len(frames) != meta['num_frames']:
            raise FormatError(
                f"The demonstration at {path} declares {meta['num_frames']} "
                f"frames but contains {len(frames)}.")
        if [f['t'] for f in frames] != list(range(len(frames))):
            raise FormatError(
                f"The frames of the demonstration at {path} are not "
                f"numbered consecutively from 0.")
        sides = meta['sides']
        keyframes = [Keyframe.from_dict(k) for k in meta['keyframes']]
        flagged = [f['t'] for f in frames if f['keyframe']]
        if flagged != [k.frame for k in keyframes]:
            raise FormatError(
                f"The keyframe flags {flagged} of the demonstration at "
                f"{path} do not match its keyframes.")

        detections, estimates, hands = {}, {}, {}
        for side in sides:
            rows = np.array([f[f'{side}_det2d'] for f in frames], dtype = np.float64)
            detections[side] = Detections2D(rows[..., :2], rows[..., 2])
            if f'{side}_estimate' in frames[0]:
                estimates[side] = [HandParameters.from_dict(f[f'{side}_estimate'])
                                   for f in frames]
            if meta['kind'] == 'ground_truth':
                hands[side] = [HandParameters.from_dict(f[f'{side}_hand'])
                               for f in frames]
        objects = {name: ObjectTrack(
            name, [Pose.from_array(f['obj_pose'][name]) for f in frames])
            for name in meta['objects']}
        return Demonstration(
            task = meta['task'],
            intrinsics = CameraIntrinsics.from_dict(meta['intrinsics']),
            camera = Pose.from_array(meta['camera']),
            keyframes = keyframes, detections = detections,
            objects = objects, estimates = estimates,
            hands = hands if meta['kind'] == 'ground_truth' else None,
            meta = meta.get('extra', {}),
            contact_flags = np.array([bool(f['contact']) for f in frames]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"Malformed demonstration file at {path}: {e!r}.")


def write_segments(path, segments, joint_names = None, meta = None):
    """Writes segments, one line each, after a metadata line."""
    def _records():
        yield {'meta': {'num_segments': len(segments),
                        'joint_names': list(joint_names or []),
                        'extra': dict(meta or {})}}
        for segment in segments:
            yield {'segment_index': segment.index,
                   'keyframe': segment.keyframe.to_dict(),
                   'start': segment.start,
                   'goal': segment.goal.as_array().tolist(),
                   'goals': {name: pose.as_array().tolist()
                             for name, pose in segment.goals.items()},
                   'base_actions': segment.base_actions.tolist()}

    write_versioned_lines(path, 'segments', SEGMENTS_VERSION, _records())


def read_segments(path):
    """Reads a segment file; returns `(segments, metadata)`."""
    records = read_versioned_lines(path, 'segments', SEGMENTS_VERSION)
    if not records or 'meta' not in records[0]:
        raise FormatError(f"The segment file at {path} has no metadata line.")
    meta, rows = records[0]['meta'], records[1:]
    try:
        if len(rows) != meta['num_segments']:
            raise FormatError(
                f"The segment file at {path} declares {meta['num_segments']} "
                f"segments but contains {len(rows)}.")
        segments = []
        for i, row in enumerate(rows):
            if row['segment_index'] != i:
                raise FormatError(
                    f"Segment {row['segment_index']} of {path} is out of order.")
            segments.append(Segment(
                i, Keyframe.from_dict(row['keyframe']), row['start'],
                np.array(row['base_actions'], dtype = np.float64),
                {name: Pose.from_array(p) for name, p in row['goals'].items()}))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"Malformed segment file at {path}: {e!r}.")
    return segments, meta
