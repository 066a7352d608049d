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
Generation of synthetic demonstrations from task scripts.

A generated demonstration has two halves: the ground truth, which holds
the noiseless hand and object tracks and the true keyframes, and the
demonstration proper, which holds what a capture pipeline would have
observed: noisy (and partially dropped) 2D hand keypoints, drifting
and jittering object poses, and a coarse initial hand estimate.
"""

import os
from dataclasses import dataclass
from typing import Union

import numpy as np

from demobot.kinematics.transforms import Pose, quat_multiply, rotvec_to_quat
from demobot.prior.formats import Demonstration, write_demonstration
from demobot.prior.hand import Detections2D, HandModel, HandParameters
from demobot.prior.segments import ObjectTrack
from demobot.sim.config import EnvConfig, load_env_config
from demobot.synthetic.options import NoiseSpec, TaskKind
from demobot.synthetic.scripts import TaskScript, load_script
from demobot.utils.io import create_dir
from demobot.utils.logging import log
from demobot.utils.random import make_rng

# Per-finger shape of the demonstrating hand.
DEMONSTRATOR_SHAPE = 1.1

DEMONSTRATION_FILE = 'demo.jsonl'
GROUND_TRUTH_FILE = 'ground_truth.jsonl'


@dataclass
class SyntheticDemonstration(object):
    """A generated demonstration and its ground truth."""
    demo: Demonstration
    ground_truth: Demonstration
    script: TaskScript

    def write(self, out_dir):
        """Writes both files into `out_dir`; returns their paths."""
        create_dir(out_dir)
        demo_path = os.path.join(out_dir, DEMONSTRATION_FILE)
        truth_path = os.path.join(out_dir, GROUND_TRUTH_FILE)
        write_demonstration(demo_path, self.demo)
        write_demonstration(truth_path, self.ground_truth)
        return demo_path, truth_path


def true_hand_track(script: TaskScript, model: HandModel, side):
    """World-frame hand parameters of one demonstrating hand."""
    beta = np.full(model.num_beta, DEMONSTRATOR_SHAPE)
    wrists = script.wrist_track(side)
    apertures = script.aperture_track(side)
    return [HandParameters(model.theta_for_aperture(a), beta, w)
            for a, w in zip(apertures, wrists)]


def estimate_initial_hand(model: HandModel, hands, noise: NoiseSpec, rng):
    """A stand-in for a learned single-image hand estimator.

    The estimate keeps the true shape and orientation, perturbs the
    joint angles by `estimator_theta_sigma`, and reports a translation
    recovered under intrinsics whose focal length is off by the relative
    `estimator_focal_error`. Such an estimator mis-judges depth, so its
    camera-frame translation is scaled along the viewing ray.

    Parameters
    ----------
    model : HandModel
        The hand model the estimate is expressed in.
    hands : list of HandParameters
        The true camera-frame hand parameters of every frame.
    noise : NoiseSpec
        The estimator's error settings.
    rng : np.random.Generator
        The random stream.

    Returns
    -------
    A list of estimated camera-frame `HandParameters`.
    """
    lower, upper = model.limits
    scale = 1.0 + noise.estimator_focal_error
    estimates = []
    for params in hands:
        theta = params.theta
        if noise.estimator_theta_sigma > 0:
            theta = np.clip(theta + rng.normal(
                0.0, noise.estimator_theta_sigma, size = theta.shape), lower, upper)
        pose = params.pose if scale == 1.0 else \
            Pose(params.pose.rotation, params.pose.translation * scale)
        estimates.append(HandParameters(theta, params.beta, pose))
    return estimates


def _corrupt_detections(points, noise: NoiseSpec, rng):
    confidence = np.ones(points.shape[:2])
    if noise.det2d_sigma > 0:
        points = points + rng.normal(0.0, noise.det2d_sigma, size = points.shape)
    if noise.dropout_prob > 0:
        confidence[rng.uniform(size = confidence.shape) < noise.dropout_prob] = 0.0
    return Detections2D(points, confidence)


def _corrupt_track(name, poses, noise: NoiseSpec, rng):
    """Adds a constant horizontal bias and per-frame jitter to a track."""
    bias = np.zeros(3)
    if noise.obj_bias > 0:
        heading = rng.uniform(0.0, 2.0 * np.pi)
        bias = noise.obj_bias * np.array([np.cos(heading), np.sin(heading), 0.0])
    n = len(poses)
    shifts = rng.normal(0.0, noise.obj_trans_sigma, size = (n, 3)) \
        if noise.obj_trans_sigma > 0 else np.zeros((n, 3))
    turns = rng.normal(0.0, noise.obj_rot_sigma, size = (n, 3)) \
        if noise.obj_rot_sigma > 0 else None
    if turns is None and not np.any(bias) and noise.obj_trans_sigma == 0:
        return ObjectTrack(name, poses)
    corrupted = []
    for t, pose in enumerate(poses):
        rotation = pose.rotation if turns is None else \
            quat_multiply(rotvec_to_quat(turns[t]), pose.rotation)
        corrupted.append(Pose(rotation, pose.translation + bias + shifts[t]))
    return ObjectTrack(name, corrupted)


def synth_demo(script: Union[TaskScript, str, TaskKind],
               noise: NoiseSpec = None, seed = 0,
               env: Union[EnvConfig, str] = 'desk',
               human_hand = 'human_hand') -> SyntheticDemonstration:
    """Generates a demonstration of a scripted task.

    The result is a deterministic function of `(script, noise, seed)`.
    With all-zero noise, the demonstration's observations equal the
    ground truth exactly.

    Parameters
    ----------
    script : TaskScript or str
        The script, or the name of a built-in task.
    noise : NoiseSpec
        The corruption applied to the observations.
    seed : int
        The seed of the random stream.
    env : EnvConfig or str
        The environment, which supplies the camera and the robot whose
        reach the script is checked against.
    human_hand : str
        The hand model of the demonstrator.

    Returns
    -------
    A `SyntheticDemonstration`.
    """
    env = env if isinstance(env, EnvConfig) else load_env_config(env)
    if not isinstance(script, TaskScript):
        script = load_script(script, env)
    noise = noise or NoiseSpec()
    rng = make_rng(seed)

    # Waypoints the arms cannot reach are rejected up front.
    script.check_reachable(env.build_robot(script.sides))

    camera = env.camera_pose()
    world_to_camera = camera.inverse()
    intrinsics = env.intrinsics

    true_hands, true_detections, detections, estimates, clean_estimates = {}, {}, {}, {}, {}
    for side in script.sides:
        model = HandModel.load(human_hand, side = side)
        in_camera = [p.transformed(world_to_camera)
                     for p in true_hand_track(script, model, side)]
        points = np.stack([model.keypoints_2d(p, intrinsics) for p in in_camera])
        true_hands[side] = in_camera
        true_detections[side] = Detections2D(points, np.ones(points.shape[:2]))
        detections[side] = _corrupt_detections(points, noise, rng)
        clean_estimates[side] = estimate_initial_hand(model, in_camera, NoiseSpec(), rng)
        estimates[side] = estimate_initial_hand(model, in_camera, noise, rng)

    tracks = script.object_poses()
    true_objects = {name: ObjectTrack(name, poses) for name, poses in tracks.items()}
    objects = {name: _corrupt_track(name, poses, noise, rng)
               for name, poses in tracks.items()}

    peg, base = script.assembly['peg'], script.assembly['base']
    peg_tip, peg_tail = env.object(peg).axis_endpoints
    hole_entry, hole_exit = env.object(base).hole_axis()
    meta = {'seed': int(seed), 'script': script.kind.value,
            'noise': noise.to_dict(), 'subgoals': script.subgoal_count,
            'assembly': {'peg': peg, 'base': base,
                         'peg_tip': peg_tip.tolist(), 'peg_tail': peg_tail.tolist(),
                         'hole_entry': hole_entry.tolist(),
                         'hole_exit': hole_exit.tolist()}}

    common = dict(task = script.kind.value, intrinsics = intrinsics, camera = camera,
                  keyframes = list(script.keyframes), meta = meta,
                  contact_flags = script.contact_flags)
    demo = Demonstration(detections = detections, objects = objects,
                         estimates = estimates, **common)
    truth = Demonstration(detections = true_detections, objects = true_objects,
                          estimates = clean_estimates, hands = true_hands, **common)
    log(f"Generated a {script.kind.value} demonstration of {script.num_frames} "
        f"frames with {script.subgoal_count} sub-goals (seed {seed}).", 'info')
    return SyntheticDemonstration(demo, truth, script)


class DemonstrationGenerator(object):
    """Generates batches of demonstrations of one task.

    Parameters
    ----------
    task : str or TaskKind
        The task to demonstrate.
    noise : NoiseSpec
        The corruption applied to the observations.
    env : str
        The environment config, by path or bundled name.
    """

    def __init__(self, task, noise: NoiseSpec = None, env = 'desk'):
        self._env = env if isinstance(env, EnvConfig) else load_env_config(env)
        self._script = load_script(task, self._env)
        self._noise = noise or NoiseSpec()

    def __repr__(self):
        return f"<DemonstrationGenerator {self._script.kind.value}: {self._noise}>"

    @property
    def script(self):
        return self._script

    def generate(self, seed = 0, out_dir = None):
        """Generates one demonstration, writing it if `out_dir` is given."""
        result = synth_demo(self._script, self._noise, seed, self._env)
        if out_dir is not None:
            result.write(out_dir)
        return result

    def generate_many(self, seeds, out_dir):
        """Writes one demonstration per seed into `out_dir/seed_<seed>`."""
        paths = []
        for seed in seeds:
            path = os.path.join(out_dir, f'seed_{seed}')
            self.generate(seed, path)
            paths.append(path)
        return paths
