# coding:utf-8
#
# test_benchmark.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module runs the default synthetic task at full size.

The runs take several minutes, so they are deselected by default; run them with
`pytest -m benchmark`. The first run records its accuracies in `golden/benchmark.json`;
later runs must reproduce them exactly.
"""
import json
import os

import pytest

from sap_anchor.api import ablation
from sap_anchor.api.train import TrainConfig
from sap_anchor.core.config import SAPConfigReader
from sap_anchor.core.synthetic import generate_synthetic_dataset

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "benchmark.json")

pytestmark = pytest.mark.benchmark


@pytest.fixture(name="task", scope="module")
def fixture_task():
    """Get the default configuration and both splits of the default task."""
    reader = SAPConfigReader()
    train_set, test_set = generate_synthetic_dataset(reader.task_spec())
    return TrainConfig.from_reader(reader), train_set, test_set


@pytest.fixture(name="golden", scope="module")
def fixture_golden():
    """Get the recorded accuracies, and record new ones when the module finishes."""
    recorded = {}
    if os.path.isfile(GOLDEN):
        with open(GOLDEN, "r") as file_obj:
            recorded = json.load(file_obj)
    measured = {}
    yield recorded, measured
    if not recorded and measured:
        if not os.path.isdir(os.path.dirname(GOLDEN)):
            os.makedirs(os.path.dirname(GOLDEN))
        with open(GOLDEN, "w") as file_obj:
            json.dump(measured, file_obj, indent=2, sort_keys=True)


def _check_golden(golden, name, table):
    recorded, measured = golden
    accuracies = dict(("%s/%s" % (row["arm"], row["seed"]), row["test_accuracy"])
                      for row in table)
    measured[name] = accuracies
    if name in recorded:
        assert accuracies == recorded[name]


def test_proposed_angles_beat_coordinates(task, golden):
    """Test that the proposed-anchor stream beats raw coordinates by at least 15 points."""
    config, train_set, test_set = task
    table = ablation.run_ablation(ablation.STREAM, config, train_set, test_set, seeds=(42,),
                                  arms=["coords", "sap"])
    _check_golden(golden, "stream", table)
    trend = ablation.summarize_trends(table)["sap_vs_coords"]
    assert trend["holds"], "gap of %.1f points" % trend["gap_points"]


def test_five_heads_beat_one(task, golden):
    """Test that five heads do at least as well as one on two of three seeds."""
    config, train_set, test_set = task
    table = ablation.run_ablation(ablation.HEAD_COUNT, config, train_set, test_set,
                                  arms=["heads-1", "heads-5"])
    _check_golden(golden, "head-count", table)
    assert ablation.summarize_trends(table)["heads_5_vs_1"]["holds"]


def test_around_body_beats_on_joints(task, golden):
    """Test that around-body anchors do at least as well as on-joint anchors on two of three
    seeds."""
    config, train_set, test_set = task
    table = ablation.run_ablation(ablation.ANCHOR_LOCATION, config, train_set, test_set,
                                  arms=["V3", "on-joints"])
    _check_golden(golden, "anchor-location", table)
    assert ablation.summarize_trends(table)["around_vs_on_joints"]["holds"]
