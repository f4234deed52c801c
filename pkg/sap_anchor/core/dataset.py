# coding=utf-8
#
# dataset.py
# SAP Anchor Core - Dataset
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the binary container used to store batches of skeleton sequences.

## Container layout

- A header line `SAPDS v1 T V N` terminated by a newline.
- `N*T*V*3` little-endian 64-bit floats, ordered sample, frame, joint, then x/y/z.
- `N` little-endian 32-bit integer labels. Unlabeled samples are stored as -1.

The same container, with the joint axis holding feature channels instead of coordinates, is
    used to export feature tensors.
"""
import logging
import os
import tempfile

import numpy as np

from .errors import SAPDataError
from .skeleton import SkeletonSequence

_LOG = logging.getLogger(__name__)

MAGIC = "SAPDS"
VERSION = "v1"


class SAPDatasetFormatError(SAPDataError):
    """A dataset container is malformed."""


def atomic_write(path, payload):
    # type: (str, bytes) -> None
    """Write bytes to a path through a temporary file in the same directory and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    handle, temp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(handle, "wb") as stream:
            stream.write(payload)
        os.replace(temp, path)
    except BaseException:
        if os.path.exists(temp):
            os.remove(temp)
        raise


def encode_array(values, labels):
    # type: (numpy.ndarray, any) -> bytes
    """Encode an N×T×V×C array and N labels as container bytes."""
    values = np.asarray(values, dtype="<f8")
    count, frames, joints = values.shape[:3]
    header = ("%s %s %d %d %d\n" % (MAGIC, VERSION, frames, joints, count)).encode("ascii")
    return header + values.tobytes() + np.asarray(labels, dtype="<i4").tobytes()


def dataset_bytes(sequences):
    # type: (list) -> bytes
    """Encode a list of equally sized skeleton sequences as container bytes.

    Raises:
        error (SAPDatasetFormatError): The list is empty or the sequences differ in size.
    """
    if not sequences:
        raise SAPDatasetFormatError("Cannot encode an empty dataset.")
    shape = sequences[0].coords.shape
    if any(seq.coords.shape != shape for seq in sequences):
        raise SAPDatasetFormatError("Every sequence in a container must have the same T and V.")
    labels = [-1 if seq.label is None else seq.label for seq in sequences]
    return encode_array(np.stack([seq.coords for seq in sequences]), labels)


def write_dataset(path, sequences):
    # type: (str, list) -> None
    """Write a list of skeleton sequences to a container file."""
    atomic_write(path, dataset_bytes(sequences))
    _LOG.info("Wrote %s sequences to %s.", len(sequences), path)


def decode_array(payload, channels=3):
    # type: (bytes, int) -> tuple
    """Decode container bytes into an N×T×V×C array and N labels (C is 3 for coordinates).

    Raises:
        error (SAPDatasetFormatError): The header is malformed, the payload has the wrong
            length, or the values are not finite.
    """
    newline = payload.find(b"\n")
    if newline < 0:
        raise SAPDatasetFormatError("Missing container header.")
    fields = payload[:newline].decode("ascii", "replace").split()
    if len(fields) != 5 or fields[0] != MAGIC or fields[1] != VERSION:
        raise SAPDatasetFormatError("Expected a '%s %s T V N' header." % (MAGIC, VERSION))
    try:
        frames, joints, count = [int(f) for f in fields[2:]]
    except ValueError:
        raise SAPDatasetFormatError("Container dimensions are not integers.")

    body = payload[newline + 1:]
    floats = count * frames * joints * channels
    if len(body) != floats * 8 + count * 4:
        raise SAPDatasetFormatError("Container payload has %s bytes; expected %s."
                                    % (len(body), floats * 8 + count * 4))
    values = np.frombuffer(body[:floats * 8], dtype="<f8").astype(np.float64)
    labels = np.frombuffer(body[floats * 8:], dtype="<i4").astype(np.int64)
    if not np.all(np.isfinite(values)):
        raise SAPDatasetFormatError("Container values are not finite.")
    return values.reshape(count, frames, joints, channels), labels


def read_dataset(path):
    # type: (str) -> list
    """Read a container file into a list of skeleton sequences."""
    with open(path, "rb") as stream:
        coords, labels = decode_array(stream.read())
    return [SkeletonSequence(c, None if label < 0 else int(label), {"source": path, "index": i})
            for i, (c, label) in enumerate(zip(coords, labels))]
