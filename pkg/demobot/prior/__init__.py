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

from .optim import LMParameters, LMResult, levenberg_marquardt, numeric_jacobian
from .hand import (
    CameraIntrinsics, HandModel, HandParameters, Detections2D,
    AlignmentOptions, AlignmentResult, project_points, align_hand_pose
)
from .objects import PegHoleObjective, RefinementResult, refine_object_pose
from .retarget import RetargetObjective, RetargetResult, retarget_hand
from .segments import (
    Keyframe, ObjectTrack, HandTrajectory, Segment, SegmentList,
    build_segments, concatenate_segments
)
from .formats import (
    Demonstration, read_demonstration, write_demonstration,
    read_segments, write_segments
)
from .pipeline import ProcessingConfig, ProcessingResult, process_demonstration
