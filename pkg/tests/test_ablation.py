# coding:utf-8
#
# test_ablation.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module tests the ablation sweeps and their trend summaries."""
import json

import pytest

from sap_anchor.api import ablation
from sap_anchor.api.train import TrainConfig
from sap_anchor.core.synthetic import SyntheticTaskSpec, generate_synthetic_dataset


@pytest.fixture(name="splits")
def fixture_splits():
    """Get a tiny two-class synthetic task."""
    spec = SyntheticTaskSpec(num_classes=2, train_per_class=2, test_per_class=2, frames=3)
    return generate_synthetic_dataset(spec)


def _untrained():
    return TrainConfig(epochs=0, hidden_sizes=[4], hidden=3)


def _row(arm, seed, accuracy):
    return {"axis": "x", "arm": arm, "seed": seed, "test_accuracy": accuracy,
            "train_accuracy": accuracy}


def test_arm_counts():
    """Test the number of arms on every axis."""
    assert [arm for arm, _ in ablation.ARMS[ablation.HEAD_COUNT]] == \
        ["heads-1", "heads-3", "heads-5", "heads-7", "heads-10", "heads-15"]
    assert len(ablation.ARMS[ablation.ANCHOR_LOCATION]) == 7
    assert len(ablation.ARMS[ablation.STREAM]) == 4


def test_anchor_location_table(splits):
    """Test that seven arms over three seeds give twenty-one rows."""
    train_set, test_set = splits
    table = ablation.run_ablation(ablation.ANCHOR_LOCATION, _untrained(), train_set, test_set)
    assert len(table) == 21
    assert sorted(set(row["arm"] for row in table)) == \
        sorted(["fixed-7", "fixed-7-first-frame", "V1", "on-joints-per-frame", "on-joints",
                "V2", "V3"])
    assert all(0.0 <= row["test_accuracy"] <= 1.0 for row in table)
    assert all(row["train_accuracy"] is not None for row in table)


def test_stream_table(splits):
    """Test that four streams over three seeds give twelve rows."""
    train_set, test_set = splits
    table = ablation.run_ablation(ablation.STREAM, _untrained(), train_set, test_set)
    assert len(table) == 4 * 3
    assert [row["seed"] for row in table[:3]] == [1, 2, 3]


def test_unknown_axis(splits):
    """Test that an unknown axis is rejected."""
    train_set, test_set = splits
    with pytest.raises(ablation.SAPUnknownAxisError):
        ablation.run_ablation("depth", _untrained(), train_set, test_set)


def test_trends_hold():
    """Test the pairwise comparisons and the coordinate gap."""
    table = [_row("heads-5", 1, 0.9), _row("heads-1", 1, 0.8),
             _row("heads-5", 2, 0.7), _row("heads-1", 2, 0.8),
             _row("heads-5", 3, 0.9), _row("heads-1", 3, 0.6),
             _row("sap", 1, 0.9), _row("coords", 1, 0.6)]
    trends = ablation.summarize_trends(table)
    assert trends["heads_5_vs_1"]["wins"] == 2
    assert trends["heads_5_vs_1"]["holds"] is True
    assert trends["sap_vs_coords"]["gap_points"] == pytest.approx(30.0)
    assert trends["sap_vs_coords"]["holds"] is True
    assert "around_vs_on_joints" not in trends


def test_trends_fail():
    """Test that losing on most seeds, or a small gap, does not hold."""
    table = [_row("V3", 1, 0.5), _row("on-joints", 1, 0.6),
             _row("V3", 2, 0.5), _row("on-joints", 2, 0.6),
             _row("V3", 3, 0.7), _row("on-joints", 3, 0.6),
             _row("sap", 1, 0.7), _row("coords", 1, 0.6)]
    trends = ablation.summarize_trends(table)
    assert trends["around_vs_on_joints"]["holds"] is False
    assert trends["sap_vs_coords"]["holds"] is False


def test_write_table(tmp_path):
    """Test that the table is written with its trends."""
    path = str(tmp_path / "ablation.json")
    table = [_row("sap", 1, 0.9), _row("coords", 1, 0.5)]
    ablation.write_table(path, table)
    with open(path, "r") as file_obj:
        payload = json.load(file_obj)
    assert payload["rows"] == table
    assert payload["trends"]["sap_vs_coords"]["holds"] is True


def test_arm_selection(splits):
    """Test that a sweep can be limited to some of its arms."""
    train_set, test_set = splits
    table = ablation.run_ablation(ablation.HEAD_COUNT, _untrained(), train_set, test_set,
                                  seeds=(4,), arms=["heads-1", "heads-15"])
    assert [row["arm"] for row in table] == ["heads-1", "heads-15"]
    with pytest.raises(ablation.SAPUnknownAxisError):
        ablation.run_ablation(ablation.HEAD_COUNT, _untrained(), train_set, test_set,
                              arms=["heads-2"])


def test_sharp_arms_sit_on_joints():
    """Test the settings of the on-joint arms and of the first-frame fixed arm."""
    arms = dict(ablation.ARMS[ablation.ANCHOR_LOCATION])
    assert arms["on-joints-per-frame"]["variant"] == "V1"
    assert arms["on-joints-per-frame"]["alpha"] == 20.0
    assert arms["on-joints"]["variant"] == "V2"
    assert arms["fixed-7-first-frame"]["fixed_frame"] == "first"
