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

import os

import numpy as np
import pandas as pd
import matplotlib.pyplot as plt

from demobot.utils.io import create_dir


def _align(frames, column, num_points = 100):
    # Interpolates every seed's curve onto a shared grid of env steps.
    end = min(float(f['env_steps'].max()) for f in frames)
    grid = np.linspace(0, end, num_points)
    curves = []
    for f in frames:
        f = f.dropna(subset = [column])
        if f.empty:
            curves.append(np.full(num_points, np.nan))
            continue
        curves.append(np.interp(grid, f['env_steps'].to_numpy(dtype = float),
                                f[column].to_numpy(dtype = float)))
    return grid, np.stack(curves)


def plot_learning_curves(curves, path = None, column = 'mean_subgoals_reached',
                         num_subgoals = None, smoothing = 1):
    """Plots learning curves, as mean and spread over seeds.

    Parameters
    ----------
    curves : dict
        Maps a label (such as `full` or `w/o reset`) to a list of
        metrics frames (or CSV paths), one per seed.
    path : str
        Where to save the figure; it is only returned when not given.
    column : str
        The metric on the vertical axis.
    num_subgoals : int
        If given, the vertical axis spans [0, num_subgoals].
    smoothing : int
        The width of a rolling mean applied to each seed's curve.

    Returns
    -------
    The matplotlib figure.
    """
    fig, ax = plt.subplots(figsize = (8, 5))
    for label, frames in curves.items():
        frames = [pd.read_csv(f) if isinstance(f, str) else f for f in frames]
        if smoothing > 1:
            frames = [f.assign(**{column: f[column].rolling(
                smoothing, min_periods = 1).mean()}) for f in frames]
        grid, values = _align(frames, column)
        mean = np.nanmean(values, axis = 0)
        std = np.nanstd(values, axis = 0)
        ax.plot(grid, mean, label = label)
        ax.fill_between(grid, mean - std, mean + std, alpha = 0.2)
    ax.set_xlabel('Environment steps')
    ax.set_ylabel(column.replace('_', ' ').capitalize())
    if num_subgoals is not None:
        ax.set_ylim(0, num_subgoals)
    ax.grid(alpha = 0.3)
    ax.legend(loc = 'lower right')
    fig.tight_layout()
    if path is not None:
        if os.path.dirname(path):
            create_dir(os.path.dirname(path))
        fig.savefig(path, dpi = 150)
        plt.close(fig)
    return fig


def plot_subgoal_histogram(report, path = None):
    """Plots an evaluation report's histogram of sub-goals reached."""
    histogram = report['histogram'] if isinstance(report, dict) else report.histogram
    mode = report['mode'] if isinstance(report, dict) else report.mode
    fig, ax = plt.subplots(figsize = (6, 4))
    ax.bar(np.arange(len(histogram)), histogram, color = 'tab:blue')
    ax.set_xticks(np.arange(len(histogram)))
    ax.set_xlabel('Sub-goals reached')
    ax.set_ylabel('Episodes')
    ax.set_title(mode)
    fig.tight_layout()
    if path is not None:
        if os.path.dirname(path):
            create_dir(os.path.dirname(path))
        fig.savefig(path, dpi = 150)
        plt.close(fig)
    return fig
