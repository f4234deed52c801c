# coding=utf-8
#
# config.py
# SAP Anchor Core - Config
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the configuration system for experiment runs.

A run configuration is a TOML file with three sections:

- `[data]` describes where samples come from (the synthetic task or container files).
- `[sap]` describes the anchor proposal module.
- `[train]` describes the classifier, the optimizer, and its schedule.

Every key has a default, so a configuration file only needs the keys it changes. Unknown
    sections and keys are rejected with the line they appear on.
"""
import copy
import logging
import os
import re

import toml

from .errors import SAPDataError
from .synthetic import SyntheticTaskSpec, AugmentationPolicy

_LOG = logging.getLogger(__name__)

DEFAULT_FIXED_ANCHORS = ["head", "left_hand", "right_hand", "left_foot", "right_foot",
                         "base_spine", "spine"]

DEFAULTS = {
    "data": {
        "source": "synthetic",
        "train_path": "",
        "test_path": "",
        "num_classes": 4,
        "train_per_class": 200,
        "test_per_class": 100,
        "frames": 20,
        "noise": 0.01,
        "amplitude_jitter": 0.1,
        "seed": 42,
        "train_rotation": False,
        "train_max_rotation": 0.0,
        "train_scale": [1.0, 1.0],
        "train_translation": 0.0,
        "test_rotation": True,
        "test_max_rotation": 0.7853981633974483,
        "test_scale": [0.5, 2.0],
        "test_translation": 0.0,
        "min_frames": 1,
    },
    "sap": {
        "variant": "V3",
        "heads": 5,
        "hidden": 8,
        "alpha": 1.0,
        "share_banks": False,
        "fixed_anchors": DEFAULT_FIXED_ANCHORS,
        "fixed_pairing": "root",
        "fixed_frame": "per-frame",
    },
    "train": {
        "lr": 0.05,
        "momentum": 0.9,
        "decay_epochs": [30, 40],
        "decay_factor": 0.1,
        "epochs": 50,
        "batch_size": 32,
        "seed": 42,
        "streams": ["angles-sap"],
        "hidden_sizes": [128, 64],
    },
}


class SAPConfigParseError(SAPDataError):
    """The configuration could not be read.

    Attributes:
        key (str): The offending `section.key`, if any.
        line (int): The 1-based line of the offending key, if known.
    """

    def __init__(self, message, key=None, line=None):
        where = ""
        if line is not None:
            where += "line %s: " % line
        if key is not None:
            where += "%s: " % key
        SAPDataError.__init__(self, where + message)
        self.key = key
        self.line = line


def _line_of(text, section, key=None):
    """Find the line where a section header, or a key inside a section, is written."""
    current = None
    for number, line in enumerate(text.splitlines(), 1):
        header = re.match(r"^\s*\[([^\]]+)\]", line)
        if header:
            current = header.group(1).strip()
            if key is None and current == section:
                return number
            continue
        if key is not None and current == section \
                and re.match(r"^\s*\"?%s\"?\s*=" % re.escape(key), line):
            return number
    return None


def _check_type(section, key, value, default, line=None):
    name = "%s.%s" % (section, key)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise SAPConfigParseError("expected a boolean but found %r." % (value,), name, line)
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SAPConfigParseError("expected a number but found %r." % (value,), name, line)
        value = float(value)
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise SAPConfigParseError("expected an integer but found %r." % (value,), name, line)
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise SAPConfigParseError("expected a list but found %r." % (value,), name, line)
    elif not isinstance(value, type(default)):
        raise SAPConfigParseError("expected a string but found %r." % (value,), name, line)
    return value


class SAPConfigReader(object):
    """The run configuration reader.

    The configuration reader parses a TOML file and merges it over the defaults. Keyword
        arguments can replace whole sections, and `override` can replace single keys afterwards
        (which is how command-line flags are applied).

    Attributes:
        data (dict): The `[data]` section.
        sap (dict): The `[sap]` section.
        train (dict): The `[train]` section.
        path (str): The file the configuration was read from, if any.
    """

    def __init__(self, filepath="", **kwargs):
        # type: (SAPConfigReader, str, dict) -> None
        """Construct the configuration reader.

        Arguments:
            filepath (str): The path to the TOML file. Defaults to an empty string, in which
                case only the defaults and keyword arguments are used.
            **kwargs (dict): Arbitrary keyword arguments.

        Kwargs:
            text (str): TOML text to parse instead of a file.
            data (dict): Keys to merge into the `[data]` section.
            sap (dict): Keys to merge into the `[sap]` section.
            train (dict): Keys to merge into the `[train]` section.
            exists (callable): The function to use, if not relying on the built-in `os` module
                to determine whether the configuration file path is loadable.
            load (callable): The function to use, if not relying on the the built-in `open`
                function to load the file object.

        Raises:
            error (IOError): The file does not exist.
            error (SAPConfigParseError): The TOML is malformed, or a section, key, or value is
                not recognized.
        """
        self.path = filepath
        self._sections = copy.deepcopy(DEFAULTS)
        text = kwargs.get("text", "")

        if filepath:
            exists_fn = os.path.isfile
            load_fn = lambda a: open(a, "r")

            if "exists" in kwargs and callable(kwargs["exists"]):
                exists_fn = kwargs["exists"]

            if not exists_fn(filepath):
                raise IOError("Cannot locate file %s" % (filepath))

            if "load" in kwargs and callable(kwargs["load"]):
                load_fn = kwargs["load"]

            with load_fn(filepath) as file_object:
                text = file_object.read()

        if text:
            self._merge_text(text)

        for section in DEFAULTS:
            if section in kwargs:
                for key, value in kwargs[section].items():
                    self.set(section, key, value)

    def _merge_text(self, text):
        try:
            parsed = toml.loads(text)
        except toml.TomlDecodeError as error:
            raise SAPConfigParseError(str(error), line=getattr(error, "lineno", None))

        for section, keys in parsed.items():
            if section not in DEFAULTS or not isinstance(keys, dict):
                raise SAPConfigParseError("unknown section.", section, _line_of(text, section))
            for key, value in keys.items():
                line = _line_of(text, section, key)
                if key not in DEFAULTS[section]:
                    raise SAPConfigParseError("unknown key.", "%s.%s" % (section, key), line)
                self._sections[section][key] = _check_type(section, key, value,
                                                           DEFAULTS[section][key], line)

    @property
    def data(self):
        return self._sections["data"]

    @property
    def sap(self):
        return self._sections["sap"]

    @property
    def train(self):
        return self._sections["train"]

    def set(self, section, key, value):
        # type: (SAPConfigReader, str, str, any) -> None
        """Replace a single key.

        Raises:
            error (SAPConfigParseError): The section or key does not exist, or the value has the
                wrong type.
        """
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise SAPConfigParseError("unknown key.", "%s.%s" % (section, key))
        self._sections[section][key] = _check_type(section, key, value, DEFAULTS[section][key])

    def override(self, assignment):
        # type: (SAPConfigReader, str) -> None
        """Apply a `section.key=value` assignment, where the value is written as in TOML.

        Values that are not valid TOML are taken as plain strings.
        """
        target, sep, raw = assignment.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot:
            raise SAPConfigParseError("expected 'section.key=value' but found '%s'." % assignment)
        try:
            value = toml.loads("value = %s" % raw.strip())["value"]
        except toml.TomlDecodeError:
            value = raw.strip()
        self.set(section, key, value)

    def snapshot(self):
        # type: (SAPConfigReader) -> dict
        """Get a deep copy of every section."""
        return copy.deepcopy(self._sections)

    def dumps(self):
        # type: (SAPConfigReader) -> str
        """Get the full configuration as TOML text."""
        return toml.dumps(self._sections)

    def task_spec(self):
        # type: (SAPConfigReader) -> SyntheticTaskSpec
        """Get the synthetic task described by the `[data]` section."""
        data = self.data
        policies = {}
        for split in ("train", "test"):
            policies[split] = AugmentationPolicy(
                rotation=data["%s_rotation" % split],
                max_rotation=data["%s_max_rotation" % split],
                scale_range=tuple(data["%s_scale" % split]),
                translation=data["%s_translation" % split])
        return SyntheticTaskSpec(
            num_classes=data["num_classes"], train_per_class=data["train_per_class"],
            test_per_class=data["test_per_class"], frames=data["frames"], noise=data["noise"],
            amplitude_jitter=data["amplitude_jitter"], seed=data["seed"],
            train_policy=policies["train"], test_policy=policies["test"])
