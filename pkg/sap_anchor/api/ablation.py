# coding=utf-8
#
# ablation.py
# SAP Anchor API - Ablation
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The ablation submodule contains the sweeps that compare anchor configurations.

Three axes are available:

- `head-count` trains the anchor proposal stream with 1, 3, 5, 7, 10, and 15 heads.
- `anchor-location` compares the seven fixed anchors (read in every frame, or once in the
    first frame) with the three placement variants, plus the per-frame and first-frame
    variants with a sharp softmax (α = 20) that keeps anchors on joints.
- `stream` compares the coordinate, bone, fixed-anchor, and proposed-anchor streams on their
    own.

Every arm is trained once per seed. The resulting table has one row per arm and seed.
"""
import json
import logging

from ..core.dataset import atomic_write
from ..core.errors import SAPDataError
from .train import train, evaluate

_LOG = logging.getLogger(__name__)

HEAD_COUNT = "head-count"
ANCHOR_LOCATION = "anchor-location"
STREAM = "stream"

ARMS = {
    HEAD_COUNT: [
        ("heads-1", {"streams": ["angles-sap"], "heads": 1}),
        ("heads-3", {"streams": ["angles-sap"], "heads": 3}),
        ("heads-5", {"streams": ["angles-sap"], "heads": 5}),
        ("heads-7", {"streams": ["angles-sap"], "heads": 7}),
        ("heads-10", {"streams": ["angles-sap"], "heads": 10}),
        ("heads-15", {"streams": ["angles-sap"], "heads": 15}),
    ],
    ANCHOR_LOCATION: [
        ("fixed-7", {"streams": ["angles-fixed"]}),
        ("fixed-7-first-frame", {"streams": ["angles-fixed"], "fixed_frame": "first"}),
        ("V1", {"streams": ["angles-sap"], "variant": "V1", "alpha": 1.0}),
        ("on-joints-per-frame", {"streams": ["angles-sap"], "variant": "V1", "alpha": 20.0}),
        ("on-joints", {"streams": ["angles-sap"], "variant": "V2", "alpha": 20.0}),
        ("V2", {"streams": ["angles-sap"], "variant": "V2", "alpha": 1.0}),
        ("V3", {"streams": ["angles-sap"], "variant": "V3", "alpha": 1.0}),
    ],
    STREAM: [
        ("coords", {"streams": ["coords"]}),
        ("bones", {"streams": ["bones"]}),
        ("fixed-7", {"streams": ["angles-fixed"]}),
        ("sap", {"streams": ["angles-sap"], "variant": "V3", "heads": 5, "alpha": 1.0}),
    ],
}


class SAPUnknownAxisError(SAPDataError):
    """The ablation axis is not one of the known axes."""


def run_ablation(axis, base_config, train_set, test_set, seeds=(1, 2, 3), **kwargs):
    # type: (str, TrainConfig, list, list, list, dict) -> list
    """Train every arm of an ablation axis once per seed.

    Arguments:
        axis (str): `head-count`, `anchor-location`, or `stream`.
        base_config (TrainConfig): The settings shared by every arm.
        train_set (list): The training sequences.
        test_set (list): The sequences the arms are measured on.
        seeds (list): The training seeds.
        **kwargs (dict): Arbitrary keyword arguments.

    Kwargs:
        arms (list): Train only the arms with these names. Defaults to every arm of the axis.
        classes (int): Passed on to `train`, as is any other keyword.

    Returns:
        table (list): One row per arm and seed with the keys `axis`, `arm`, `seed`,
            `test_accuracy`, and `train_accuracy`.

    Raises:
        error (SAPUnknownAxisError): The axis is not known, or an arm is not part of it.
    """
    if axis not in ARMS:
        raise SAPUnknownAxisError("Unknown ablation axis '%s'; expected one of %s."
                                  % (axis, ", ".join(sorted(ARMS))))
    names = [arm for arm, _ in ARMS[axis]]
    wanted = kwargs.pop("arms", None)
    if wanted is not None:
        unknown = sorted(set(wanted) - set(names))
        if unknown:
            raise SAPUnknownAxisError("Arms %s are not part of the %s axis."
                                      % (", ".join(unknown), axis))
    table = []
    for arm, overrides in ARMS[axis]:
        if wanted is not None and arm not in wanted:
            continue
        for seed in seeds:
            config = base_config.copy(seed=seed, **overrides)
            model, report = train(train_set, config, test_set=test_set, **kwargs)
            train_accuracy = report.train_accuracy
            if train_accuracy is None:
                train_accuracy = evaluate(model, train_set).accuracy
            row = {"axis": axis, "arm": arm, "seed": seed,
                   "test_accuracy": report.test_accuracy,
                   "train_accuracy": train_accuracy}
            _LOG.info("Ablation %s, arm %s, seed %s: test accuracy %.3f.", axis, arm, seed,
                      row["test_accuracy"])
            table.append(row)
    return table


def _accuracies(table, arm):
    return dict((row["seed"], row["test_accuracy"]) for row in table if row["arm"] == arm)


def _pairwise(table, better, worse):
    first, second = _accuracies(table, better), _accuracies(table, worse)
    seeds = sorted(set(first) & set(second))
    if not seeds:
        return None
    wins = len([seed for seed in seeds if first[seed] >= second[seed]])
    return {"better": better, "worse": worse, "seeds": seeds, "wins": wins,
            "holds": 3 * wins >= 2 * len(seeds)}


def summarize_trends(table):
    # type: (list) -> dict
    """Reduce an ablation table to its directional comparisons.

    A comparison between two arms counts the seeds on which the first arm's test accuracy is at
        least the second's; it holds when that is true on at least two thirds of the shared
        seeds. The coordinate gap compares the mean test accuracy of the proposed-anchor stream
        with the coordinate stream, in accuracy points, and holds at 15 points or more.
        Comparisons whose arms are missing from the table are left out.

    Returns:
        trends (dict): Some of the keys `heads_5_vs_1`, `around_vs_on_joints`, and
            `sap_vs_coords`.
    """
    trends = {}
    heads = _pairwise(table, "heads-5", "heads-1")
    if heads is not None:
        trends["heads_5_vs_1"] = heads
    location = _pairwise(table, "V3", "on-joints")
    if location is not None:
        trends["around_vs_on_joints"] = location

    sap, coords = _accuracies(table, "sap"), _accuracies(table, "coords")
    if sap and coords:
        gap = 100.0 * (sum(sap.values()) / len(sap) - sum(coords.values()) / len(coords))
        trends["sap_vs_coords"] = {"gap_points": gap, "holds": gap >= 15.0}
    return trends


def write_table(path, table):
    # type: (str, list) -> None
    """Write an ablation table and its trend summary as JSON."""
    payload = {"rows": table, "trends": summarize_trends(table)}
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True).encode("utf-8"))
    _LOG.info("Wrote %s ablation rows to %s.", len(table), path)
