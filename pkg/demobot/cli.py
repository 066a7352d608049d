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
The `demobot` command line.

    demobot synth    --task sync_assembly --seed 0 --out DIR [--obj-bias 0.02]
    demobot process  DEMO --out DIR [--config PROCESSING.yaml]
    demobot train    --config RUN.yaml --segments SEGMENTS --out DIR
    demobot eval     CHECKPOINT --mode prior_plus_rl --episodes 50
    demobot compare  --config RUN.yaml --seeds 0 1 2 [--ablations no_reset]

Exit codes: 0 on success, 2 for configuration errors, 3 for processing
failures, and 4 when training is aborted.
"""

import os
import sys
import argparse
from dataclasses import fields

from demobot import __version__
from demobot.backend.config import output_save_path
from demobot.errors import (
    ConfigurationError, ContractViolationError, ProcessingError,
    SnapshotError, TrainingAbortedError)
from demobot.prior.formats import read_demonstration, read_segments, write_segments
from demobot.prior.pipeline import ProcessingConfig, process_demonstration
from demobot.synthetic.generator import synth_demo
from demobot.synthetic.options import NoiseSpec, TaskKind
from demobot.training.compare import ABLATIONS, cmd_compare
from demobot.training.evaluation import EVAL_MODES, evaluate, evaluate_checkpoint
from demobot.training.trainer import TRAIN_MODES, Trainer, load_run_config
from demobot.utils.data import load_yaml
from demobot.utils.io import create_dir, write_json
from demobot.utils.logging import log, set_verbosity
from demobot.viz.curves import plot_subgoal_histogram

SEGMENTS_FILE = 'segments.jsonl'
REPORT_FILE = 'report.json'
EVAL_REPORT_FILE = 'eval_report.json'


def _default_out(name):
    return os.path.join(output_save_path(), name)


def cmd_synth_demo(task, noise: NoiseSpec = None, seed = 0, out = None, env = 'desk'):
    """Generates a demonstration and its ground truth; returns their paths."""
    task = TaskKind.parse(task)
    result = synth_demo(task, noise, seed = seed, env = env)
    return result.write(out or _default_out(f'{task.value}_seed_{seed}'))


def cmd_process_demo(demo_path, out = None, config = None):
    """Processes a demonstration file into a segment file and a report."""
    demo = read_demonstration(demo_path)
    if isinstance(config, str):
        config = ProcessingConfig.from_dict(load_yaml(config))
    result = process_demonstration(demo, config)
    out = out or os.path.dirname(os.path.abspath(demo_path))
    create_dir(out)
    segments_path = os.path.join(out, SEGMENTS_FILE)
    write_segments(segments_path, result.segments,
                   joint_names = result.robot.joint_names,
                   meta = {'task': demo.task, 'demo': os.path.abspath(demo_path)})
    report_path = os.path.join(out, REPORT_FILE)
    write_json(report_path, result.report)
    return segments_path, report_path


def cmd_train(config, show_progress = True):
    """Trains a policy, then evaluates its final checkpoint."""
    trainer = Trainer(config)
    checkpoint = trainer.train(show_progress = show_progress)
    outputs = {'checkpoint': checkpoint, 'metrics': trainer.metrics.path}
    if config.eval_episodes > 0:
        report = evaluate_checkpoint(
            checkpoint, trainer.segments, config.mode,
            episodes = config.eval_episodes, seed = config.seed,
            task = trainer.task, show_progress = show_progress)
        outputs['eval'] = os.path.join(config.out, EVAL_REPORT_FILE)
        write_json(outputs['eval'], report.to_dict())
    return outputs


def cmd_eval(checkpoint, mode, episodes = 50, seed = 0, segments = None,
             out = None, env = None, task = None, show_progress = True):
    """Evaluates a mode, writing the report (and its histogram) to `out`."""
    if checkpoint is None:
        if mode != 'prior_only' or segments is None:
            raise ConfigurationError(
                f"Evaluating `{mode}` requires a checkpoint; `prior_only` "
                f"without one requires a segment file.")
        segs, meta = read_segments(segments)
        task = task or meta.get('extra', {}).get('task')
        report = evaluate(segs, task, mode, episodes = episodes, seed = seed,
                          env = env or 'desk', show_progress = show_progress)
    else:
        from demobot.models.checkpoint import load_checkpoint
        run = load_checkpoint(checkpoint)['run']
        segs, _ = read_segments(segments or run['segments'])
        report = evaluate_checkpoint(checkpoint, segs, mode, episodes = episodes,
                                     seed = seed, task = task, env = env,
                                     show_progress = show_progress)
    if out is not None:
        create_dir(out)
        write_json(os.path.join(out, EVAL_REPORT_FILE), report.to_dict())
        plot_subgoal_histogram(report, os.path.join(out, f'histogram_{mode}.png'))
    return report


def _add_noise_arguments(parser):
    group = parser.add_argument_group('noise')
    for f in fields(NoiseSpec):
        group.add_argument(f"--{f.name.replace('_', '-')}", type = float,
                           default = None, dest = f'noise_{f.name}')


def _add_ablation_arguments(parser):
    group = parser.add_argument_group('ablations')
    group.add_argument('--no-resets', action = 'store_true',
                       help = 'Always restart failed lanes from the initial state.')
    group.add_argument('--no-temporal-segments', action = 'store_true',
                       help = 'Replay base actions by episode time.')
    group.add_argument('--no-pre-grasp', action = 'store_true',
                       help = 'Do not hold hands open before reaching.')
    group.add_argument('--no-residual-clip', action = 'store_true',
                       help = 'Do not clip residual actions.')


def build_parser():
    parser = argparse.ArgumentParser(
        prog = 'demobot', description = 'Demonstration-guided residual RL for '
                                        'bimanual assembly.')
    parser.add_argument('--version', action = 'version', version = __version__)
    parser.add_argument('-v', '--verbose', action = 'store_true',
                        help = 'Log progress information.')
    sub = parser.add_subparsers(dest = 'command', required = True)

    synth = sub.add_parser('synth', help = 'Generate a synthetic demonstration.')
    synth.add_argument('--task', required = True,
                       choices = [k.value for k in TaskKind])
    synth.add_argument('--seed', type = int, default = 0)
    synth.add_argument('--out', default = None)
    synth.add_argument('--config', default = 'desk', help = 'The environment config.')
    _add_noise_arguments(synth)

    process = sub.add_parser('process', help = 'Process a demonstration into segments.')
    process.add_argument('demo')
    process.add_argument('--out', default = None)
    process.add_argument('--config', default = None, help = 'A processing config YAML.')

    train = sub.add_parser('train', help = 'Train a residual policy.')
    train.add_argument('--config', default = None, help = 'A run config YAML.')
    train.add_argument('--segments', default = None)
    train.add_argument('--task', default = None)
    train.add_argument('--env', default = None)
    train.add_argument('--seed', type = int, default = None)
    train.add_argument('--out', default = None)
    train.add_argument('--mode', choices = TRAIN_MODES, default = None)
    train.add_argument('--lanes', type = int, default = None, dest = 'num_lanes')
    train.add_argument('--budget-steps', type = int, default = None)
    train.add_argument('--episodes', type = int, default = None, dest = 'eval_episodes')
    train.add_argument('--verbose-rewards', action = 'store_true', default = None)
    _add_ablation_arguments(train)

    ev = sub.add_parser('eval', help = 'Evaluate a checkpoint or the motion prior.')
    ev.add_argument('checkpoint', nargs = '?', default = None)
    ev.add_argument('--mode', choices = EVAL_MODES, default = 'prior_plus_rl')
    ev.add_argument('--episodes', type = int, default = 50)
    ev.add_argument('--seed', type = int, default = 0)
    ev.add_argument('--segments', default = None)
    ev.add_argument('--task', default = None)
    ev.add_argument('--config', default = None, help = 'The environment config.')
    ev.add_argument('--out', default = None)

    compare = sub.add_parser('compare', help = 'Compare prior, RL and residual RL.')
    compare.add_argument('--config', default = None, help = 'A run config YAML.')
    compare.add_argument('--segments', default = None)
    compare.add_argument('--task', default = None)
    compare.add_argument('--seeds', type = int, nargs = '+', default = [0, 1, 2])
    compare.add_argument('--ablations', nargs = '*', default = [],
                         choices = list(ABLATIONS))
    compare.add_argument('--episodes', type = int, default = None)
    compare.add_argument('--budget-steps', type = int, default = None)
    compare.add_argument('--out', default = None)
    return parser


def _run_config(args, name):
    overrides = {k: getattr(args, k, None) for k in (
        'segments', 'task', 'env', 'seed', 'out', 'mode', 'num_lanes',
        'budget_steps', 'eval_episodes', 'verbose_rewards')}
    if getattr(args, 'no_resets', False):
        overrides['success_resets'] = False
    if getattr(args, 'no_temporal_segments', False):
        overrides['temporal_segments'] = False
    if getattr(args, 'no_pre_grasp', False):
        overrides['pre_grasp'] = False
    if getattr(args, 'no_residual_clip', False):
        overrides['residual_clip'] = False
    config = load_run_config(args.config, **overrides)
    if args.out is None and (args.config is None or
                             'out' not in load_yaml(args.config)):
        config = config.replace(out = _default_out(name))
    return config


def _dispatch(args):
    if args.command == 'synth':
        noise = NoiseSpec(**{f.name: getattr(args, f'noise_{f.name}')
                             for f in fields(NoiseSpec)
                             if getattr(args, f'noise_{f.name}') is not None})
        demo, truth = cmd_synth_demo(args.task, noise, args.seed, args.out, args.config)
        print(demo)
        print(truth)
    elif args.command == 'process':
        segments, report = cmd_process_demo(args.demo, args.out, args.config)
        print(segments)
        print(report)
    elif args.command == 'train':
        outputs = cmd_train(_run_config(args, 'train'))
        for path in outputs.values():
            print(path)
    elif args.command == 'eval':
        report = cmd_eval(args.checkpoint, args.mode, args.episodes, args.seed,
                          segments = args.segments, out = args.out,
                          env = args.config, task = args.task)
        print(f"{report.mode}: {report.summary()} sub-goals, "
              f"success rate {report.success_rate:.2f}, "
              f"histogram {report.histogram}")
    elif args.command == 'compare':
        config = _run_config(args, 'compare')
        frame = cmd_compare(config, seeds = args.seeds, ablations = args.ablations,
                            episodes = args.episodes)
        print(frame.to_string(index = False))


def main(argv = None):
    """Runs the command line; returns the exit code."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_verbosity('info')
    try:
        _dispatch(args)
    except TrainingAbortedError as e:
        log(f"Training aborted: {e} (diagnostics: {e.diagnostics}, "
            f"last checkpoint: {e.checkpoint}).", 'error')
        return 4
    except ProcessingError as e:
        log(f"Processing failed in stage '{e.stage}': {e}", 'error')
        return 3
    except (ContractViolationError, SnapshotError) as e:
        log(f"Processing failed: {e}", 'error')
        return 3
    except ConfigurationError as e:
        log(f"Configuration error: {e}", 'error')
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
