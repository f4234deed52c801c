# coding=utf-8
#
# info.py
# SAP Anchor API - Info
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The info submodule contains the utilities to get the configuration and the data of a run."""
import logging

from ..core.config import SAPConfigReader, SAPConfigParseError
from ..core.dataset import read_dataset
from ..core.synthetic import generate_synthetic_dataset

_LOG = logging.getLogger(__name__)


def load_splits(reader):
    # type: (SAPConfigReader) -> tuple
    """Get the training and test sequences described by the `[data]` section.

    Returns:
        splits (tuple): The training and test lists of `SkeletonSequence`. The test list is
            empty when a container source has no test path.
    """
    data = reader.data
    if data["source"] == "synthetic":
        return generate_synthetic_dataset(reader.task_spec())
    if data["source"] == "sapds":
        if not data["train_path"]:
            raise SAPConfigParseError("a container source needs a training path.",
                                      "data.train_path")
        train = read_dataset(data["train_path"])
        test = read_dataset(data["test_path"]) if data["test_path"] else []
        _LOG.info("Read %s training and %s test samples.", len(train), len(test))
        return train, test
    raise SAPConfigParseError("expected 'synthetic' or 'sapds' but found '%s'."
                              % data["source"], "data.source")


def get_run_information(config_file="", overrides=None, **kwargs):
    # type: (str, list, dict) -> tuple
    """Create the configuration and the datasets of a run.

    Arguments:
        config_file (str): The path to the run configuration file. Defaults to an empty
            string, in which case only the defaults are used.
        overrides (list): `section.key=value` assignments applied after the file is read.
        **kwargs (dict): Arbitrary keyword arguments.

    Kwargs:
        exists (callable): The function to use, if not relying on the built-in `os` module
            to determine whether the configuration file path is loadable.
        load (callable): The function to use, if not relying on the the built-in `open`
            function to load the file object.
        with_data (bool): Whether to load the datasets. Defaults to True.

    Returns:
        info (tuple): A tuple containing the `SAPConfigReader` and the training and test lists
            (None for both when `with_data` is False).
    """
    reader = SAPConfigReader(config_file, **kwargs)
    for assignment in overrides or []:
        reader.override(assignment)
    if not kwargs.get("with_data", True):
        return reader, None, None
    train, test = load_splits(reader)
    return reader, train, test
