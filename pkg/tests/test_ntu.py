# coding:utf-8
#
# test_ntu.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module tests the NTU skeleton file reader and writer."""
import io

import numpy as np
import pytest

from sap_anchor.core import ntu
from sap_anchor.core.skeleton import SkeletonSequence

BODY = "72057594037931101 0 0 0 0 0 0 0.1 0.2 2"


def _joint_lines(offset):
    return ["%s %s %s 0 0 0 0 0 0 0 0 2" % (j + offset, 0.5, -j) for j in range(25)]


def _frame(bodies, offset=0.0):
    lines = ["%d" % bodies]
    for body in range(bodies):
        lines += [BODY, "25"] + _joint_lines(offset + 100 * body)
    return lines


def test_parse_two_frames():
    """Test that a two-frame file parses into a 2×25×3 sequence."""
    text = "\n".join(["2"] + _frame(1) + _frame(1, 1.0)) + "\n"
    seq = ntu.parse_ntu_skeleton(text)
    assert (seq.frames, seq.joints) == (2, 25)
    assert seq.coords[1, 3].tolist() == [4.0, 0.5, -3.0]


def test_parse_file_object():
    """Test that the reader accepts a file-like object."""
    text = "\n".join(["1"] + _frame(1))
    assert ntu.parse_ntu_skeleton(io.StringIO(text)).frames == 1


def test_extra_bodies_and_empty_frames_are_dropped():
    """Test that only the first body is kept and body-less frames are skipped."""
    text = "\n".join(["3"] + _frame(2) + ["0"] + _frame(1, 2.0))
    reader = ntu.SAPNTUReader(text)
    assert reader.size() == (2, 25)
    assert reader.dropped_bodies == 1
    assert reader.dropped_frames == 1
    assert reader.to_sequence().coords[0, 0, 0] == 0.0


def test_malformed_header():
    """Test that a non-integer frame count is reported with its line."""
    with pytest.raises(ntu.SAPMalformedHeaderError) as error:
        ntu.parse_ntu_skeleton("two\n")
    assert error.value.line == 1


def test_wrong_joint_count():
    """Test that a body with the wrong number of joints is rejected."""
    text = "\n".join(["1", "1", BODY, "24"] + _joint_lines(0)[:24])
    with pytest.raises(ntu.SAPMalformedHeaderError):
        ntu.parse_ntu_skeleton(text)


def test_truncated_frame():
    """Test that a file ending in the middle of a frame is reported."""
    text = "\n".join(["1"] + _frame(1)[:-3])
    with pytest.raises(ntu.SAPTruncatedFrameError):
        ntu.parse_ntu_skeleton(text)


def test_non_finite_coordinate():
    """Test that a NaN coordinate is rejected."""
    lines = ["1"] + _frame(1)
    lines[5] = "nan 0 0 0 0 0 0 0 0 0 0 2"
    with pytest.raises(ntu.SAPNonFiniteCoordinateError):
        ntu.parse_ntu_skeleton("\n".join(lines))


def test_all_frames_empty():
    """Test that a file without any body cannot become a sequence."""
    with pytest.raises(ntu.SAPSequenceTooShortError):
        ntu.parse_ntu_skeleton("2\n0\n0\n")


def test_serialize_then_parse_is_exact():
    """Test that written coordinates read back bit for bit."""
    rng = np.random.default_rng(7)
    seq = SkeletonSequence(rng.normal(size=(3, 25, 3)) / 3.0)
    assert np.array_equal(ntu.parse_ntu_skeleton(ntu.serialize_ntu_skeleton(seq)).coords,
                          seq.coords)


def test_metadata_from_filename():
    """Test that capture ids are read from the file name."""
    meta = ntu.metadata_from_filename("/data/S001C002P003R001A014.skeleton")
    assert meta["camera"] == "002"
    assert meta["action"] == "014"


def test_read_file_sets_label(tmp_path):
    """Test that the label comes from the action id and short files are rejected."""
    path = tmp_path / "S001C001P001R001A003.skeleton"
    path.write_text("\n".join(["2"] + _frame(1) + _frame(1)) + "\n")
    assert ntu.read_ntu_file(str(path)).label == 2
    with pytest.raises(ntu.SAPSequenceTooShortError):
        ntu.read_ntu_file(str(path), min_frames=3)
