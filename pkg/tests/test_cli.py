# coding:utf-8
#
# test_cli.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module tests the command-line interface."""
import json
import os

import numpy as np

from sap_anchor import cli
from sap_anchor.core.config import SAPConfigReader
from sap_anchor.core.dataset import read_dataset
from sap_anchor.core.manifest import RunManifest
from sap_anchor.core.ntu import serialize_ntu_skeleton
from sap_anchor.core.skeleton import SkeletonSequence

TINY = ["data.num_classes=2", "data.train_per_class=2", "data.test_per_class=2",
        "data.frames=4", "train.epochs=1", "train.batch_size=2", "train.hidden_sizes=[4]",
        "sap.heads=2", "sap.hidden=3"]


def _run(run_dir, *args):
    argv = ["--run-dir", str(run_dir), "--quiet"]
    for assignment in TINY:
        argv += ["--set", assignment]
    return cli.cli_dispatch(argv + list(args))


def _load(path):
    with open(str(path), "r") as file_obj:
        return json.load(file_obj)


def test_missing_subcommand():
    """Test that running without a subcommand is a usage error."""
    assert cli.cli_dispatch([]) == 1


def test_unknown_subcommand():
    """Test that an unknown subcommand is a usage error."""
    assert cli.cli_dispatch(["dance"]) == 1


def test_unknown_override(tmp_path):
    """Test that overriding an unknown key is a data error."""
    assert cli.cli_dispatch(["--run-dir", str(tmp_path), "--set", "train.speed=2",
                             "gen-data"]) == 2


def test_missing_config_file(tmp_path):
    """Test that a missing configuration file is a data error."""
    assert cli.cli_dispatch(["--config", str(tmp_path / "none.toml"), "--run-dir",
                             str(tmp_path), "gen-data"]) == 2


def test_init_config(tmp_path):
    """Test that the template command writes a readable configuration."""
    path = str(tmp_path / "run.toml")
    assert cli.cli_dispatch(["init-config", path, "--seed", "5"]) == 0
    assert SAPConfigReader(path).train["seed"] == 5


def test_gen_data(tmp_path):
    """Test that generating data writes both splits, the task, and a manifest."""
    assert _run(tmp_path, "gen-data") == 0
    assert len(read_dataset(str(tmp_path / "train.sapds"))) == 4
    assert _load(tmp_path / "task.json")["num_classes"] == 2
    manifest = RunManifest.load(str(tmp_path))
    assert manifest.command == "gen-data"
    assert sorted(manifest.artifacts) == ["task.json", "test.sapds", "train.sapds"]
    assert manifest.config["data"]["frames"] == 4


def test_parse(tmp_path):
    """Test that NTU files are converted, resampled, and normalized into one container."""
    rng = np.random.default_rng(0)
    files = []
    for index, frames in enumerate((5, 7)):
        path = tmp_path / ("S001C001P001R001A%03d.skeleton" % (index + 1))
        seq = SkeletonSequence(rng.normal(size=(frames, 25, 3)))
        path.write_text(serialize_ntu_skeleton(seq))
        files.append(str(path))
    run_dir = tmp_path / "run"
    assert _run(run_dir, "parse", "--frames", "4", "--normalize", *files) == 0
    parsed = read_dataset(str(run_dir / "parsed.sapds"))
    assert [seq.label for seq in parsed] == [0, 1]
    assert parsed[1].frames == 4
    assert np.allclose(parsed[0].coords[0, 0], 0.0)


def test_parse_bad_file(tmp_path):
    """Test that a malformed NTU file is a data error."""
    path = tmp_path / "broken.skeleton"
    path.write_text("three\n")
    assert _run(tmp_path / "run", "parse", str(path)) == 2


def test_train_eval_and_export(tmp_path):
    """Test training, then evaluating, featurizing, and exporting anchors from the checkpoint."""
    assert _run(tmp_path, "train", "--variant", "V1") == 0
    report = _load(tmp_path / "report.json")
    assert len(report["epochs"]) == 1
    assert np.loadtxt(str(tmp_path / "confusion.csv"), delimiter=",").shape == (2, 2)
    assert "checkpoint.sapc" in RunManifest.load(str(tmp_path)).artifacts

    assert _run(tmp_path, "eval") == 0
    assert _load(tmp_path / "eval-test.json")["accuracy"] == report["test_accuracy"]

    assert _run(tmp_path, "featurize", "--split", "train") == 0
    sidecar = _load(str(tmp_path / "features-train.sapds") + ".json")
    assert sidecar["count"] == 4
    assert sidecar["channels"] == ["angle-head-0", "angle-head-1"]

    assert _run(tmp_path, "export-anchors", "--sample", "1") == 0
    records = _load(tmp_path / "anchors-test-1.json")
    assert len(records) == 4 * 2 * 2
    assert records[0]["sample"] == 1


def test_eval_without_checkpoint(tmp_path):
    """Test that evaluating without a checkpoint is a data error."""
    assert _run(tmp_path, "eval") == 2


def test_export_fixed_anchors(tmp_path):
    """Test that a run without the anchor proposal stream exports its fixed anchors."""
    assert _run(tmp_path, "--set", 'train.streams=["angles-fixed"]', "export-anchors") == 0
    records = _load(tmp_path / "anchors-test-0.json")
    assert len(records) == 4 * 7 * 2
    assert records[0]["provenance"] == "fixed-joint"


def test_export_sample_out_of_range(tmp_path):
    """Test that exporting a missing sample is a usage error."""
    assert _run(tmp_path, "export-anchors", "--sample", "9") == 1


def test_ablate(tmp_path):
    """Test that an ablation sweep writes one row per arm and seed."""
    assert _run(tmp_path, "ablate", "--axis", "stream", "--seeds", "1,2", "--epochs", "0") == 0
    payload = _load(tmp_path / "ablation-stream.json")
    assert len(payload["rows"]) == 8
    assert "sap_vs_coords" in payload["trends"]


def test_gradcheck(tmp_path):
    """Test that the gradient check passes and records every parameter."""
    assert _run(tmp_path, "gradcheck", "--variant", "V3", "--max-entries", "8") == 0
    payload = _load(tmp_path / "gradcheck.json")
    assert payload["passed"] is True
    names = [entry["parameter"] for entry in payload["parameters"]]
    assert "sap/bank2/g" in names
    assert "backbone/w2" in names
    assert os.path.isfile(str(tmp_path / "manifest.json"))


def test_gradcheck_rejects_bad_arguments(tmp_path):
    """Test that out-of-range gradient check settings are usage errors."""
    for flags in (["--step", "0.01"], ["--step", "1e-9"], ["--frames", "0"], ["--batch", "0"],
                  ["--hidden", "0"], ["--max-entries", "0"], ["--tol", "0"]):
        assert _run(tmp_path, "gradcheck", *flags) == 1
    assert not os.path.isfile(str(tmp_path / "gradcheck.json"))


def test_gradcheck_reports_counts(tmp_path):
    """Test that the gradient check records how many entries it compared and skipped."""
    assert _run(tmp_path, "gradcheck", "--variant", "V1", "--max-entries", "4") == 0
    payload = _load(tmp_path / "gradcheck.json")
    assert payload["checked"] > 0
    assert payload["checked"] == sum(entry["checked"] for entry in payload["parameters"])
    assert payload["skipped"] == sum(entry["skipped"] for entry in payload["parameters"])


def test_ablate_selected_arms(tmp_path):
    """Test that an ablation sweep can be limited to named arms."""
    assert _run(tmp_path, "ablate", "--axis", "anchor-location", "--seeds", "1",
                "--arms", "fixed-7-first-frame,on-joints-per-frame", "--epochs", "0") == 0
    payload = _load(tmp_path / "ablation-anchor-location.json")
    assert [row["arm"] for row in payload["rows"]] == ["fixed-7-first-frame",
                                                       "on-joints-per-frame"]
    assert _run(tmp_path, "ablate", "--axis", "stream", "--arms", "rgb", "--epochs", "0") == 2
