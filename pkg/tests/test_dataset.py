# coding:utf-8
#
# test_dataset.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module tests the sequence container."""
import os

import numpy as np
import pytest

from sap_anchor.core import dataset
from sap_anchor.core.skeleton import SkeletonSequence


def _sequences():
    rng = np.random.default_rng(11)
    return [SkeletonSequence(rng.normal(size=(4, 5, 3)), 2),
            SkeletonSequence(rng.normal(size=(4, 5, 3)))]


def test_write_then_read(tmp_path):
    """Test that a written container reads back the same sequences and labels."""
    path = str(tmp_path / "batch.sapds")
    dataset.write_dataset(path, _sequences())
    restored = dataset.read_dataset(path)
    assert restored == _sequences()
    assert restored[1].label is None


def test_header():
    """Test that the container starts with its magic, version, and dimensions."""
    payload = dataset.dataset_bytes(_sequences())
    assert payload.startswith(b"SAPDS v1 4 5 2\n")


def test_empty_dataset():
    """Test that an empty list cannot be encoded."""
    with pytest.raises(dataset.SAPDatasetFormatError):
        dataset.dataset_bytes([])


def test_mixed_sizes():
    """Test that sequences of different lengths cannot share a container."""
    sequences = _sequences() + [SkeletonSequence(np.zeros((3, 5, 3)))]
    with pytest.raises(dataset.SAPDatasetFormatError):
        dataset.dataset_bytes(sequences)


def test_truncated_payload():
    """Test that a payload missing its last bytes is rejected."""
    with pytest.raises(dataset.SAPDatasetFormatError):
        dataset.decode_array(dataset.dataset_bytes(_sequences())[:-1])


def test_bad_magic():
    """Test that a foreign header is rejected."""
    with pytest.raises(dataset.SAPDatasetFormatError):
        dataset.decode_array(b"NOTIT v1 1 1 1\n")


def test_feature_channels():
    """Test that arrays with more than three channels can be stored."""
    values = np.arange(2 * 3 * 4 * 7, dtype=np.float64).reshape(2, 3, 4, 7)
    decoded, labels = dataset.decode_array(dataset.encode_array(values, [0, 1]), channels=7)
    assert np.array_equal(decoded, values)
    assert labels.tolist() == [0, 1]


def test_atomic_write_leaves_no_temporary(tmp_path):
    """Test that an atomic write leaves only the target file behind."""
    path = str(tmp_path / "out.bin")
    dataset.atomic_write(path, b"abc")
    assert os.listdir(str(tmp_path)) == ["out.bin"]
    with open(path, "rb") as stream:
        assert stream.read() == b"abc"
