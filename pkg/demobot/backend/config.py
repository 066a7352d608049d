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
import json

from demobot.utils.logging import log


# The super base directory for DemoBot. This holds the per-user config
# file, which in turn stores the default output directory for runs.
SUPER_BASE_DIR = os.path.join(os.path.expanduser('~'), '.demobot')


# Environment variable capping the number of environment lanes which
# are stepped in parallel.
THREADS_ENV_VAR = 'DEMOBOT_THREADS'


def _config_path():
    return os.path.join(SUPER_BASE_DIR, 'config.json')


def _default_config():
    return {'output_path': os.path.join(SUPER_BASE_DIR, 'runs')}


# Loads the configuration info. We don't cache this since it may
# change if the user decides to change the path. The file is created
# the first time it is requested.
def _get_config(key = None):
    try:
        with open(_config_path(), 'r') as f:
            contents = json.load(f)
    except (OSError, json.JSONDecodeError):
        contents = _default_config()
        try:
            os.makedirs(SUPER_BASE_DIR, exist_ok = True)
            with open(_config_path(), 'w') as f:
                json.dump(contents, f)
        except OSError:
            log(f"Could not write the DemoBot config file to "
                f"{_config_path()}, using the default values.")
    if key is None:
        return contents
    return contents.get(key, _default_config().get(key))


def _update_config(key, value):
    contents = _get_config()
    contents[key] = value
    os.makedirs(SUPER_BASE_DIR, exist_ok = True)
    with open(_config_path(), 'w') as f:
        json.dump(contents, f)


def output_save_path():
    """Returns the default output directory for DemoBot runs."""
    return _get_config('output_path')


def set_output_save_path(location = None):
    """Sets the default output directory for DemoBot runs.

    Changing the path using this method permanently changes it for
    all future sessions, until it is changed or switched back.

    Parameters
    ----------
    location : str
        The location to save run outputs to, or `None`/'reset' to
        restore the default location.

    Returns
    -------
    The fully expanded location.
    """
    if location is None or location == 'reset':
        location = _default_config()['output_path']
    location = os.path.realpath(os.path.abspath(os.path.expanduser(location)))
    _update_config('output_path', location)
    return location


def thread_count(default = 1):
    """Returns the lane-parallelism cap from `DEMOBOT_THREADS`."""
    value = os.environ.get(THREADS_ENV_VAR, None)
    if value is None or value.strip() == '':
        return default
    try:
        count = int(value)
    except ValueError:
        from demobot.errors import ConfigurationError
        raise ConfigurationError(
            f"Expected `{THREADS_ENV_VAR}` to be a positive "
            f"integer, instead got '{value}'.")
    return max(1, count)
