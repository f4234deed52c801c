# coding=utf-8
#
# manifest.py
# SAP Anchor Core - Manifest
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the run manifest, the record that makes a run directory
    reconstructible."""
import datetime
import json
import logging
import os

from .dataset import atomic_write

_LOG = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def _utc_now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class RunManifest(object):
    """The manifest of a single command run.

    The manifest is rewritten in full (through a temporary file and a rename) every time an
        artifact is added, so a crashed run still leaves a readable manifest behind.

    Attributes:
        run_dir (str): The directory the run writes into.
        command (str): The subcommand that produced the run.
        argv (list): The full argument list, for replaying the run.
        config (dict): A snapshot of every configuration section.
        seed (int): The seed of the run.
        version (str): The package version that produced the run.
        artifacts (list): The paths of every file the run produced, relative to `run_dir`.
        created (str): The UTC time the run started, in ISO 8601 format.
        updated (str): The UTC time the manifest was last written.
    """

    def __init__(self, run_dir, command, config, seed, version, argv=None):
        # type: (RunManifest, str, str, dict, int, str, list) -> None
        self.run_dir = run_dir
        self.command = command
        self.argv = list(argv or [])
        self.config = config
        self.seed = seed
        self.version = version
        self.artifacts = []
        self.created = _utc_now()
        self.updated = self.created

    @property
    def path(self):
        """The location of the manifest file."""
        return os.path.join(self.run_dir, MANIFEST_NAME)

    def add_artifact(self, path):
        # type: (RunManifest, str) -> None
        """Record a produced file and rewrite the manifest."""
        relative = os.path.relpath(path, self.run_dir)
        if relative not in self.artifacts:
            self.artifacts.append(relative)
        self.write()

    def as_dict(self):
        # type: (RunManifest) -> dict
        return {
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "artifacts": self.artifacts,
            "created": self.created,
            "updated": self.updated,
        }

    def write(self):
        # type: (RunManifest) -> str
        """Write the manifest to `run_dir/manifest.json` and return its path."""
        os.makedirs(self.run_dir, exist_ok=True)
        self.updated = _utc_now()
        atomic_write(self.path, json.dumps(self.as_dict(), indent=2, sort_keys=True)
                     .encode("utf-8"))
        _LOG.debug("Wrote manifest %s with %s artifacts.", self.path, len(self.artifacts))
        return self.path

    @classmethod
    def load(cls, run_dir):
        # type: (str) -> RunManifest
        """Read the manifest of an existing run directory."""
        with open(os.path.join(run_dir, MANIFEST_NAME), "r") as file_obj:
            data = json.load(file_obj)
        manifest = cls(run_dir, data["command"], data["config"], data["seed"], data["version"],
                       data.get("argv"))
        manifest.artifacts = list(data.get("artifacts", []))
        manifest.created = data.get("created", manifest.created)
        manifest.updated = data.get("updated", manifest.updated)
        return manifest
