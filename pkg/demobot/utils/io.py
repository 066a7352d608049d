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

import numpy as np

from demobot.errors import FormatError


def create_dir(dir_):
    """Creates a directory (or does nothing if it exists)."""
    os.makedirs(dir_, exist_ok = True)


def format_header(kind, version):
    """Returns the header line for a versioned DemoBot text file."""
    return f"#demobot-{kind} {version}"


def write_versioned_lines(path, kind, version, records):
    """Writes a versioned line-per-record JSON text file.

    The first line is the header `#demobot-<kind> <version>`, and every
    following line is a single JSON object. Keys are written in sorted
    order and floats with their shortest round-trip representation,
    so writing the same records twice yields byte-identical files.
    """
    if os.path.dirname(path):
        create_dir(os.path.dirname(path))
    with open(path, 'w') as f:
        f.write(format_header(kind, version) + '\n')
        for record in records:
            f.write(json.dumps(record, sort_keys = True,
                               separators = (',', ':'),
                               allow_nan = False) + '\n')


def read_versioned_lines(path, kind, version):
    """Reads a file written by `write_versioned_lines`.

    Raises a `FormatError` if the header does not name the expected
    file kind, or if the file's version is not the supported one.
    """
    if not os.path.exists(path):
        raise FormatError(f"The file at {path} does not exist.")
    with open(path, 'r') as f:
        header = f.readline().strip()
        expected = f"#demobot-{kind} "
        if not header.startswith(expected):
            raise FormatError(
                f"Expected a '{kind}' file at {path}, instead the "
                f"header line was '{header}'.")
        try:
            found = int(header[len(expected):])
        except ValueError:
            raise FormatError(f"Malformed header line '{header}' in {path}.")
        if found != version:
            raise FormatError(
                f"Unsupported {kind} file version {found} at {path} "
                f"(this version of DemoBot reads version {version}).")
        records = []
        for lineno, line in enumerate(f, start = 2):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise FormatError(
                    f"Could not decode line {lineno} of {path}: {e}.")
    return records


def _to_builtin(value):
    # NumPy scalars and arrays appear in processing reports.
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Cannot write a value of type {type(value).__name__} to JSON.")


def write_json(path, contents):
    """Writes a (pretty-printed) JSON file, creating parent directories."""
    if os.path.dirname(path):
        create_dir(os.path.dirname(path))
    with open(path, 'w') as f:
        json.dump(contents, f, indent = 4, sort_keys = True, default = _to_builtin)
