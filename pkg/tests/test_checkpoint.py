# coding:utf-8
#
# test_checkpoint.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module tests the checkpoint format."""
import struct

import numpy as np
import pytest

from sap_anchor.core import checkpoint

PARAMS = {"backbone/w1": np.arange(6, dtype=np.float64).reshape(2, 3) / 7.0,
          "backbone/b1": np.array([0.5, -0.25, 1e-300])}
VELOCITY = {"backbone/w1": np.full((2, 3), 0.125)}


def _payload(meta=None):
    return checkpoint.encode_checkpoint(PARAMS, VELOCITY, 4, meta or {"classes": 3})


def test_save_and_load(tmp_path):
    """Test that a saved checkpoint loads back its tensors, epoch, and metadata exactly."""
    path = str(tmp_path / "run.sapc")
    checkpoint.save_checkpoint(PARAMS, VELOCITY, 4, path, {"history": [{"epoch": 0}]})
    loaded = checkpoint.load_checkpoint(path)
    assert loaded.epoch == 4
    assert loaded.meta == {"history": [{"epoch": 0}]}
    for name, value in PARAMS.items():
        assert np.array_equal(loaded.params[name], value)
    assert np.array_equal(loaded.velocity["backbone/w1"], VELOCITY["backbone/w1"])


def test_header_layout():
    """Test that a checkpoint starts with its magic bytes, version, epoch, and count."""
    payload = _payload()
    assert payload[:4] == b"SAPC"
    assert struct.unpack("<III", payload[4:16]) == (1, 4, 3)


def test_bad_magic():
    """Test that foreign bytes are rejected."""
    with pytest.raises(checkpoint.SAPCorruptCheckpointError):
        checkpoint.decode_checkpoint(b"XXXX" + _payload()[4:])


def test_version_mismatch():
    """Test that an unknown format version is rejected."""
    payload = _payload()
    changed = payload[:4] + struct.pack("<I", 2) + payload[8:]
    with pytest.raises(checkpoint.SAPVersionMismatchError):
        checkpoint.decode_checkpoint(changed)


def test_truncated():
    """Test that a truncated checkpoint is rejected."""
    with pytest.raises(checkpoint.SAPCorruptCheckpointError):
        checkpoint.decode_checkpoint(_payload()[:40])


def test_trailing_bytes():
    """Test that bytes after the metadata block are rejected."""
    with pytest.raises(checkpoint.SAPCorruptCheckpointError):
        checkpoint.decode_checkpoint(_payload() + b"\x00")


def test_expected_shapes():
    """Test that a parameter with an unexpected shape is rejected."""
    checkpoint.decode_checkpoint(_payload(), {"backbone/w1": (2, 3)})
    with pytest.raises(checkpoint.SAPCorruptCheckpointError):
        checkpoint.decode_checkpoint(_payload(), {"backbone/w1": (3, 2)})
    with pytest.raises(checkpoint.SAPCorruptCheckpointError):
        checkpoint.decode_checkpoint(_payload(), {"backbone/w2": (3, 2)})


def test_velocity_must_match_a_parameter():
    """Test that a velocity without a matching parameter is rejected."""
    payload = checkpoint.encode_checkpoint(PARAMS, {"backbone/w9": np.zeros(2)}, 1)
    with pytest.raises(checkpoint.SAPCorruptCheckpointError):
        checkpoint.decode_checkpoint(payload)


def test_corrupt_errors_are_data_errors():
    """Test that checkpoint failures map to the data-error exit code."""
    assert checkpoint.SAPCorruptCheckpointError("x").exit_code == 2
    assert checkpoint.SAPVersionMismatchError("x").exit_code == 2
