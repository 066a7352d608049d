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
The demonstration processing pipeline.

A demonstration is turned into temporal segments in four stages, run
for each hand independently and then replayed on the robot:

    align (2D keypoints -> camera-frame hand) -> camera-to-world
    -> refine (object poses at assembly-contact frames)
    -> retarget (human keypoints -> robot hand) -> build_segments (IK)

Every per-frame optimization is warm-started from the previous frame.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from demobot.framework import Parameters
from demobot.errors import ConfigurationError, ProcessingError, InsufficientObservationsError
from demobot.kinematics.ik import IKParameters
from demobot.kinematics.robot import RobotModel
from demobot.prior.formats import Demonstration
from demobot.prior.hand import (
    HandModel, HandParameters, AlignmentOptions, align_hand_pose
)
from demobot.prior.objects import PegHoleObjective, refine_object_pose
from demobot.prior.retarget import retarget_hand
from demobot.prior.segments import HandTrajectory, build_segments, SegmentList
from demobot.utils.logging import log, tqdm


@dataclass(repr = False)
class ProcessingConfig(Parameters):
    """Configuration of `process_demonstration`.

    Parameters
    ----------
    human_hand : str
        The hand-model chain (a bundled name or a path).
    arm, robot_hand : str
        The robot's arm and hand chains.
    confidence_threshold : float
        Detections at or below this confidence are ignored.
    min_keypoints : int
        The minimum number of confident detections per frame.
    reoptimize_shape : bool
        Whether to re-solve the hand shape β on every frame, rather than
        solving it on the first frame and freezing it.
    refine_objects : bool
        Whether to refine object poses at assembly-contact frames.
    w_axis, w_endpoint : float
        Weights of the peg-in-hole refinement objective.
    trust_translation, trust_rotation : float
        The refinement trust region (meters, radians).
    max_ik_residual : float
        The IK position error (m) that fails segmentation.
    """
    human_hand: str = 'human_hand'
    arm: str = 'arm'
    robot_hand: str = 'robot_hand'
    confidence_threshold: float = 0.5
    min_keypoints: int = 6
    reoptimize_shape: bool = False
    refine_objects: bool = True
    w_axis: float = 1.0
    w_endpoint: float = 100.0
    trust_translation: float = 0.03
    trust_rotation: float = 0.2
    max_ik_residual: float = 0.01
    show_progress: bool = False

    def validate(self):
        if self.trust_translation <= 0 or self.trust_rotation <= 0:
            raise ConfigurationError("The refinement trust region must be positive.")
        if self.max_ik_residual <= 0:
            raise ConfigurationError("`max_ik_residual` must be positive.")


@dataclass
class ProcessingResult(object):
    """The output of `process_demonstration`.

    `hands` holds the aligned world-frame hand parameters of every
    frame, `objects` the (refined) object tracks, and `report` the
    per-stage diagnostics.
    """
    segments: SegmentList
    report: dict
    hands: Dict[str, List[HandParameters]] = field(default_factory = dict)
    objects: dict = field(default_factory = dict)
    robot: Optional[RobotModel] = None


def align_hand_track(model: HandModel, demo: Demonstration, side,
                     config: ProcessingConfig):
    """Aligns the hand model to every frame of one hand's detections.

    Returns the camera-frame parameters and reprojection costs.
    """
    if side not in demo.estimates:
        raise ProcessingError(
            f"The demonstration has no initial hand estimates for the "
            f"{side} hand.", stage = 'align')
    detections = demo.detections[side]
    first = AlignmentOptions(
        confidence_threshold = config.confidence_threshold,
        min_keypoints = config.min_keypoints, optimize_shape = True)
    later = first.replace(optimize_shape = config.reoptimize_shape)

    params, costs = [], []
    previous = demo.estimates[side][0]
    frames = range(demo.num_frames)
    if config.show_progress:
        frames = tqdm(frames, desc = f"Aligning the {side} hand")
    for t in frames:
        try:
            result = align_hand_pose(model, demo.intrinsics, detections.frame(t),
                                     previous, first if t == 0 else later)
        except InsufficientObservationsError as e:
            raise InsufficientObservationsError(
                f"Frame {t} of the {side} hand: {e}")
        params.append(result.params)
        costs.append(result.final_cost)
        previous = result.params
    return params, np.array(costs)


def refine_tracks(demo: Demonstration, objects, config: ProcessingConfig):
    """Refines the peg track against the base track at contact frames.

    The peg and base are named by the demonstration's `assembly`
    metadata. Returns the refined tracks and one report row per frame.
    """
    assembly = demo.meta.get('assembly', None)
    contact = demo.contact_frames
    if not config.refine_objects or not contact:
        return objects, []
    if assembly is None:
        raise ConfigurationError(
            "The demonstration has assembly-contact frames but no "
            "`assembly` metadata naming its peg and base objects.")
    peg, base = assembly['peg'], assembly['base']
    for name in (peg, base):
        if name not in objects:
            raise ConfigurationError(
                f"The assembly object '{name}' is not tracked in the "
                f"demonstration (tracked: {list(objects)}).")
    objective = PegHoleObjective(
        peg_tip = tuple(assembly['peg_tip']), peg_tail = tuple(assembly['peg_tail']),
        hole_entry = tuple(assembly['hole_entry']), hole_exit = tuple(assembly['hole_exit']),
        w_axis = config.w_axis, w_endpoint = config.w_endpoint)

    objects = dict(objects)
    rows = []
    for t in contact:
        result = refine_object_pose(
            objects[peg][t], objective, objects[base][t],
            max_translation = config.trust_translation,
            max_rotation = config.trust_rotation)
        objects[peg] = objects[peg].replaced(t, result.pose)
        ratio = result.cost_after / result.cost_before if result.cost_before > 0 else 0.0
        rows.append({'frame': t, 'cost_before': result.cost_before,
                     'cost_after': result.cost_after, 'cost_ratio': ratio,
                     'at_trust_boundary': result.at_trust_boundary})
        if result.at_trust_boundary:
            log(f"The refined pose of '{peg}' at frame {t} lies on the "
                f"trust-region boundary (cost {result.cost_before:.3e} -> "
                f"{result.cost_after:.3e}).")
    return objects, rows


def retarget_hand_track(robot: RobotModel, side, keypoints, wrists):
    """Retargets one hand's world-frame keypoints, frame by frame."""
    hand = robot.side(side).hand
    q, base = hand.zero_config().values, wrists[0]
    joints, bases, residuals = [], [], []
    for t, points in enumerate(keypoints):
        result = retarget_hand(points, hand, q, base)
        q, base = result.q.values, result.base
        joints.append(q)
        bases.append(base)
        residuals.append(result.residual)
    return HandTrajectory(np.stack(joints), bases), np.array(residuals)


def process_demonstration(demo: Demonstration,
                          config: Optional[ProcessingConfig] = None):
    """Processes a demonstration into temporal segments.

    Parameters
    ----------
    demo : Demonstration
        The demonstration to process.
    config : ProcessingConfig
        Processing options.

    Returns
    -------
    A `ProcessingResult`. Its report lists the per-frame residuals of
    every stage, the IK convergence rate, the refinement cost ratios,
    and the length and goal of every segment.
    """
    config = config or ProcessingConfig()
    robot = RobotModel.load(sides = demo.sides, arm = config.arm,
                            hand = config.robot_hand)

    report = {'task': demo.task, 'num_frames': demo.num_frames,
              'align_cost': {}, 'retarget_residual': {}}
    hands, trajectories = {}, {}
    for side in demo.sides:
        model = HandModel.load(config.human_hand, side = side)
        camera_params, costs = align_hand_track(model, demo, side, config)
        world = [p.transformed(demo.camera) for p in camera_params]
        keypoints = [model.keypoints_3d(p) for p in world]
        try:
            trajectories[side], residuals = retarget_hand_track(
                robot, side, keypoints, [p.pose for p in world])
        except ConfigurationError:
            # a ValueError too; keeps its own exit code
            raise
        except (ValueError, np.linalg.LinAlgError) as e:
            raise ProcessingError(
                f"Retargeting the {side} hand failed: {e}", stage = 'retarget')
        hands[side] = world
        report['align_cost'][side] = costs.tolist()
        report['retarget_residual'][side] = residuals.tolist()

    objects, refinement = refine_tracks(demo, demo.objects, config)
    report['refinement'] = refinement

    segments = build_segments(
        robot, trajectories, objects, demo.keyframes,
        ik_params = IKParameters(), max_residual = config.max_ik_residual)
    report['ik_position_error'] = {
        side: segments.ik_position_errors[:, j].tolist()
        for j, side in enumerate(robot.sides)}
    report['ik_convergence_rate'] = segments.ik_convergence_rate
    report['segments'] = [
        {'index': s.index, 'start': s.start, 'end': s.end, 'length': len(s),
         'phase': s.phase, 'goal_object': s.goal_object,
         'goal': s.goal.as_array().tolist()} for s in segments]
    log(f"Processed a {demo.task} demonstration of {demo.num_frames} frames "
        f"into {len(segments)} segments (IK convergence rate "
        f"{segments.ik_convergence_rate:.3f}).", 'info')
    return ProcessingResult(segments, report, hands, objects, robot)
