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

import pytest
import numpy as np

from demobot.errors import ConfigurationError
from demobot.prior import ProcessingConfig, concatenate_segments, process_demonstration
from demobot.synthetic import NoiseSpec, SUBGOAL_COUNTS, TaskKind, synth_demo


@pytest.fixture(scope = 'module')
def clean():
    generated = synth_demo('sync_assembly', NoiseSpec(), seed = 0)
    return generated, process_demonstration(generated.demo)


def test_processing_yields_one_segment_per_subgoal(clean):
    generated, result = clean
    assert len(result.segments) == SUBGOAL_COUNTS[TaskKind.sync_assembly]
    frames = concatenate_segments(result.segments)
    assert len(frames) == generated.demo.num_frames
    assert [s.end for s in result.segments] == generated.demo.keyframe_indices


def test_processing_report(clean):
    generated, result = clean
    report = result.report
    for side in generated.demo.sides:
        assert len(report['align_cost'][side]) == generated.demo.num_frames
        assert max(report['retarget_residual'][side]) < 0.02
    assert report['ik_convergence_rate'] > 0.9
    assert len(report['segments']) == len(result.segments)


def test_clean_alignment_matches_truth(clean):
    generated, result = clean
    for side in generated.demo.sides:
        truth = [p.transformed(generated.demo.camera) for p in generated.ground_truth.hands[side]]
        errors = [np.linalg.norm(a.pose.translation - b.pose.translation)
                  for a, b in zip(result.hands[side], truth)]
        assert np.median(errors) < 5e-3


def test_clean_refinement_keeps_true_poses(clean):
    generated, result = clean
    for row in result.report['refinement']:
        assert row['cost_after'] <= row['cost_before'] + 1e-12


def test_refinement_reduces_biased_contact_cost():
    generated = synth_demo('sync_assembly', NoiseSpec(obj_bias = 0.01), seed = 2)
    result = process_demonstration(generated.demo, ProcessingConfig(refine_objects = True))
    rows = result.report['refinement']
    assert rows
    assert np.mean([r['cost_ratio'] for r in rows]) < 1.0


def test_processing_config_validated():
    with pytest.raises(ConfigurationError):
        ProcessingConfig(trust_translation = 0.0)
    with pytest.raises(ConfigurationError):
        ProcessingConfig.from_dict({'trust_translaton': 0.1})


@pytest.mark.parametrize('task', [k.value for k in TaskKind])
def test_every_clean_task_processes(task):
    generated = synth_demo(task, NoiseSpec(), seed = 0)
    result = process_demonstration(generated.demo)
    assert len(result.segments) == SUBGOAL_COUNTS[TaskKind(task)]
    assert max(max(e) for e in result.report['ik_position_error'].values()) < 0.01
