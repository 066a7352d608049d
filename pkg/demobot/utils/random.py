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

import numpy as np


def make_rng(seed = None):
    """Returns a `np.random.Generator`, passing existing generators through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def lane_rng(master_seed, lane):
    """Returns the random stream of one environment lane.

    Streams are derived from `(master_seed, lane)`, so lane `k` always
    sees the same stream for a given master seed, regardless of how
    many other lanes exist.
    """
    return np.random.default_rng([int(master_seed), int(lane)])
