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

import copy
from dataclasses import dataclass, fields, asdict


class DemoBotSerializable(object):
    """Base class for all DemoBot serializable objects.

    Subclasses of this will have an automatically defined `__getstate__`
    and `__setstate__` method which consists of a dictionary with the
    necessary class attributes, as well as `__copy__` and `__deepcopy__`
    methods with the same behavior (the class is always deep copied).

    Subclasses only need to define a `serializable` property with a
    frozen set of strings containing the attributes that are to be
    serialized. The expectation is that the strings in the set will
    all be the name of attributes minus a leading underscore. If
    there are parameters which are just the name of the attribute,
    no leading underscore, also add them to `state_override`.

    This is what the simulator uses to snapshot world states and what
    the trainer uses to copy environment lanes, so every attribute which
    affects the dynamics of an object must be listed.
    """
    serializable: "frozenset"
    state_override: "frozenset"

    def __init_subclass__(cls, **kwargs):
        if not hasattr(cls, 'state_override'):
            cls.state_override = frozenset(())

    def __getstate__(self):
        state = {}
        for param in sorted(self.serializable):
            try:
                state[param] = getattr(self, f'_{param}')
            except AttributeError:
                if param in self.state_override:
                    state[param] = getattr(self, param)
                else:
                    raise AttributeError(
                        f"Encountered error while attempting to serialize "
                        f"a {self.__class__}: the attribute '_{param}' "
                        f"(or '{param}') does not exist.")
        return state

    def __setstate__(self, state):
        for field in state.keys():
            if field in self.state_override:
                setattr(self, field, state[field])
            else:
                setattr(self, f'_{field}', state[field])

    def __deepcopy__(self, memo = None):
        params = self.__getstate__()
        cls = super(DemoBotSerializable, self).__new__(self.__class__)
        cls.__setstate__(copy.deepcopy(params))
        return cls

    def __copy__(self):
        return self.__deepcopy__()


@dataclass(repr = False)
class Parameters:
    """Base class for parameter containers, enabling runtime checks.

    Subclasses are regular dataclasses; after `__post_init__` runs, new
    attributes cannot be assigned, and assigning a value of the wrong
    type to an existing field raises a `TypeError`. Subclasses which
    need validation should override `validate()`, which is called at
    the end of initialization and can be re-run after mutation.
    """

    def __post_init__(self):
        self.validate()
        object.__setattr__(self, '_block_new_attributes', True)

    def validate(self):
        pass

    def __repr__(self):
        # This is custom-defined to exclude values left at their defaults.
        defined_values = []
        for f in fields(self):
            value = getattr(self, f.name)
            try:
                if value == f.default:
                    continue
            except ValueError:
                pass
            defined_values.append((f.name, value))
        value_repr = ", ".join(f"{name}={value}" for name, value in defined_values)
        return f"{self.__class__.__qualname__}({value_repr})"

    def __setattr__(self, key, value):
        # Don't allow the assignment of new attributes.
        if key not in self.__dict__.keys():
            if not hasattr(self, '_block_new_attributes'):
                super().__setattr__(key, value)
                return
            raise AttributeError(f"Cannot assign new attributes '{key}' "
                                 f"to class {self.__class__.__name__}.")

        # Check if the type of the value matches that of the key.
        annotation = self.__dataclass_fields__[key].type
        if annotation in (float, int, bool, str) and value is not None:
            if annotation is float and isinstance(value, int) \
                    and not isinstance(value, bool):
                value = float(value)
            if not isinstance(value, annotation):
                raise TypeError(
                    f"Expected a value of type ({annotation.__name__}) for "
                    f"attribute '{key}', instead got ({value}) of "
                    f"type ({type(value).__name__}).")
        super().__setattr__(key, value)

    def to_dict(self):
        """Returns the parameters as a (deep-copied) dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, contents):
        """Builds the parameters from a dictionary, rejecting unknown keys."""
        from demobot.errors import ConfigurationError
        from demobot.utils.data import maybe_you_meant
        contents = dict(contents or {})
        valid = {f.name for f in fields(cls)}
        for key in contents:
            if key not in valid:
                raise ConfigurationError(maybe_you_meant(
                    key, f"Unknown parameter '{key}' for "
                         f"{cls.__name__}.", valid))
        return cls(**contents)

    def replace(self, **kwargs):
        """Returns a copy of these parameters with the given changes."""
        contents = self.to_dict()
        contents.update(kwargs)
        return self.__class__(**contents)
