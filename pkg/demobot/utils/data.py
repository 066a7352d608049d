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
import copy
import difflib
import functools

import yaml

from demobot.errors import ConfigurationError


ASSET_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), '_assets')


def _asset_names(kind):
    return sorted(os.path.splitext(f)[0] for f in
                  os.listdir(os.path.join(ASSET_DIR, kind))
                  if f.endswith('.yaml'))


@functools.lru_cache(maxsize = None)
def _load_yaml_asset(kind, name) -> dict:
    path = os.path.join(ASSET_DIR, kind, f'{name}.yaml')
    with open(path, 'r') as f:
        return yaml.safe_load(f)


def load_yaml(path_or_name, kind = None) -> dict:
    """Loads a YAML file, or a bundled asset of the given `kind` by name.

    Bundled assets live under `demobot/_assets/<kind>/<name>.yaml`; if
    `path_or_name` is not an existing file it is looked up there.
    """
    if os.path.exists(path_or_name):
        with open(path_or_name, 'r') as f:
            contents = yaml.safe_load(f)
    elif kind is not None and path_or_name in _asset_names(kind):
        contents = copy.deepcopy(_load_yaml_asset(kind, path_or_name))
    else:
        msg = f"Could not find a file or bundled {kind or 'asset'} " \
              f"named '{path_or_name}'."
        if kind is not None:
            msg = maybe_you_meant(path_or_name, msg, _asset_names(kind))
        raise ConfigurationError(msg)
    if not isinstance(contents, dict):
        raise ConfigurationError(
            f"Expected the contents of '{path_or_name}' to be a mapping, "
            f"instead got ({type(contents).__name__}).")
    return contents


def maybe_you_meant(name, msg, source = None) -> str:
    """Suggests potential correct spellings for an invalid name."""
    suggestion = difflib.get_close_matches(name, list(source or []))
    if len(suggestion) == 0:
        return msg
    return msg + f" Maybe you meant: '{suggestion[0]}'?"
