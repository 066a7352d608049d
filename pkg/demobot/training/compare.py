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
Comparisons of motion priors, RL from scratch and residual RL.

For every seed, a residual policy and a from-scratch policy are trained
with the same step budget, and the prior alone, the from-scratch
policy and the residual policy are evaluated on the same episodes.
Ablations retrain the residual policy with one mechanism switched off.
"""

import os

import pandas as pd

from demobot.errors import ConfigurationError
from demobot.training.evaluation import evaluate, evaluate_checkpoint
from demobot.training.metrics import METRICS_FILE
from demobot.training.trainer import RunConfig, Trainer
from demobot.prior.formats import read_segments
from demobot.utils.io import create_dir, write_json
from demobot.utils.logging import log
from demobot.viz.curves import plot_learning_curves

COMPARISON_FILE = 'comparison.csv'
CURVES_FILE = 'learning_curves.png'

ABLATIONS = {
    'no_reset': {'success_resets': False},
    'no_temporal_segments': {'temporal_segments': False},
    'no_pre_grasp': {'pre_grasp': False},
    'no_residual_clip': {'residual_clip': False},
}


def _train(config: RunConfig, segments, task, out, **overrides):
    run = config.replace(out = out, **overrides)
    trainer = Trainer(run, segments = segments, task = task)
    return trainer.train(show_progress = False)


def cmd_compare(config: RunConfig, seeds = (0, 1, 2), ablations = (), episodes = None):
    """Runs the comparison; returns the per-seed results as a DataFrame.

    Writes `comparison.csv`, a JSON summary and a learning-curve figure
    to the run's output directory.
    """
    unknown = [a for a in ablations if a not in ABLATIONS]
    if unknown:
        raise ConfigurationError(
            f"Unknown ablations {unknown}, expected some of {list(ABLATIONS)}.")
    config.check_paths()
    segments, meta = read_segments(config.segments)
    task = config.task or meta.get('extra', {}).get('task')
    if not task:
        raise ConfigurationError("No task was given, and the segment file does not record one.")
    episodes = config.eval_episodes if episodes is None else episodes

    rows, curves = [], {}
    for seed in seeds:
        seeded = config.replace(seed = int(seed))
        root = os.path.join(config.out, f'seed_{seed}')
        prior = evaluate(segments, task, 'prior_only', episodes = episodes,
                         env = config.env, options = seeded.env_options(), seed = seed)
        rows.append({'seed': seed, 'variant': 'prior_only', **_row(prior)})

        variants = {'prior_plus_rl': {}, 'rl_only': {'mode': 'rl_only'}}
        variants.update({name: ABLATIONS[name] for name in ablations})
        for name, overrides in variants.items():
            out = os.path.join(root, name)
            checkpoint = _train(seeded, segments, task, out, **overrides)
            mode = 'rl_only' if name == 'rl_only' else 'prior_plus_rl'
            report = evaluate_checkpoint(checkpoint, segments, mode,
                                         episodes = episodes, seed = seed, task = task)
            rows.append({'seed': seed, 'variant': name, **_row(report)})
            curves.setdefault(name, []).append(os.path.join(out, METRICS_FILE))
        log(f"Finished comparison seed {seed}.", 'info')

    frame = pd.DataFrame(rows)
    create_dir(config.out)
    frame.to_csv(os.path.join(config.out, COMPARISON_FILE), index = False)
    summary = frame.groupby('variant')[['mean_subgoals', 'success_rate']].mean()
    write_json(os.path.join(config.out, 'comparison.json'), {
        'task': task, 'seeds': [int(s) for s in seeds],
        'num_subgoals': len(segments),
        'variants': {k: v for k, v in summary.to_dict(orient = 'index').items()}})
    plot_learning_curves(curves, os.path.join(config.out, CURVES_FILE),
                         num_subgoals = len(segments))
    return frame


def _row(report):
    return {'mean_subgoals': report.mean_subgoals,
            'success_rate': report.success_rate,
            'summary': report.summary(),
            'histogram': ' '.join(str(c) for c in report.histogram)}
