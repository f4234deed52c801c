# coding=utf-8
#
# checkpoint.py
# SAP Anchor Core - Checkpoint
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the binary checkpoint format for trained models.

## Format

All integers are little-endian.

- The magic bytes `SAPC`.
- The format version (u32) and the epoch the checkpoint was taken after (u32).
- The number of tensors (u32), then for every tensor:
    - its table (u8): 0 for model parameters, 1 for optimizer velocity,
    - its name length (u16) and UTF-8 name,
    - its rank (u8) and dimensions (u32 each),
    - its values as 64-bit floats.
- The length (u32) of a UTF-8 JSON metadata block, then the block itself. The block holds the
    run configuration and the per-epoch history, which is everything needed to resume.

Checkpoints are written to a temporary file and renamed into place.
"""
import json
import logging
import struct

import numpy as np

from .dataset import atomic_write
from .errors import SAPDataError

_LOG = logging.getLogger(__name__)

MAGIC = b"SAPC"
VERSION = 1
_TABLES = {0: "params", 1: "velocity"}


class SAPCorruptCheckpointError(SAPDataError):
    """A checkpoint file is truncated, has the wrong magic bytes, or has unexpected shapes."""


class SAPVersionMismatchError(SAPDataError):
    """A checkpoint was written by an incompatible format version."""


class SAPCheckpoint(object):
    """The contents of a checkpoint.

    Attributes:
        params (dict): Model tensors by name.
        velocity (dict): Optimizer velocity tensors by parameter name.
        epoch (int): The number of completed epochs.
        meta (dict): The run configuration and history.
    """

    def __init__(self, params, velocity, epoch, meta=None):
        # type: (SAPCheckpoint, dict, dict, int, dict) -> None
        self.params = params
        self.velocity = velocity
        self.epoch = int(epoch)
        self.meta = meta or {}


def encode_checkpoint(params, velocity, epoch, meta=None):
    # type: (dict, dict, int, dict) -> bytes
    """Encode model tensors, optimizer velocity, and metadata as checkpoint bytes."""
    chunks = [MAGIC, struct.pack("<III", VERSION, int(epoch), len(params) + len(velocity))]
    for table, tensors in ((0, params), (1, velocity)):
        for name in sorted(tensors):
            value = np.asarray(tensors[name], dtype="<f8")
            encoded = name.encode("utf-8")
            chunks.append(struct.pack("<BH", table, len(encoded)) + encoded)
            chunks.append(struct.pack("<B%dI" % value.ndim, value.ndim, *value.shape))
            chunks.append(value.tobytes())
    block = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(block)) + block)
    return b"".join(chunks)


class _Cursor(object):

    def __init__(self, payload):
        self.payload = payload
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.payload):
            raise SAPCorruptCheckpointError("Checkpoint is truncated at byte %s." % self.offset)
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(payload, expected_shapes=None):
    # type: (bytes, dict) -> SAPCheckpoint
    """Decode checkpoint bytes.

    Arguments:
        payload (bytes): The checkpoint bytes.
        expected_shapes (dict): If given, the shape every parameter must have, by name.

    Raises:
        error (SAPCorruptCheckpointError): The magic bytes are wrong, the payload is truncated
            or has trailing bytes, or a shape does not match `expected_shapes`.
        error (SAPVersionMismatchError): The version is not supported.
    """
    cursor = _Cursor(payload)
    if cursor.take(4) != MAGIC:
        raise SAPCorruptCheckpointError("Not a checkpoint: bad magic bytes.")
    version, epoch, count = cursor.unpack("<III")
    if version != VERSION:
        raise SAPVersionMismatchError("Checkpoint version %s is not supported (expected %s)."
                                      % (version, VERSION))

    tables = {"params": {}, "velocity": {}}
    for _ in range(count):
        table, length = cursor.unpack("<BH")
        if table not in _TABLES:
            raise SAPCorruptCheckpointError("Unknown tensor table %s." % table)
        name = cursor.take(length).decode("utf-8")
        ndim, = cursor.unpack("<B")
        shape = cursor.unpack("<%dI" % ndim)
        size = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(cursor.take(size * 8), dtype="<f8").astype(np.float64)
        tables[_TABLES[table]][name] = values.reshape(shape)

    length, = cursor.unpack("<I")
    try:
        meta = json.loads(cursor.take(length).decode("utf-8"))
    except ValueError:
        raise SAPCorruptCheckpointError("Checkpoint metadata is not valid JSON.")
    if cursor.offset != len(payload):
        raise SAPCorruptCheckpointError("Checkpoint has %s trailing bytes."
                                        % (len(payload) - cursor.offset))

    for name, shape in (expected_shapes or {}).items():
        found = tables["params"].get(name)
        if found is None or found.shape != tuple(shape):
            raise SAPCorruptCheckpointError("Tensor '%s' has shape %s; expected %s."
                                            % (name, None if found is None else found.shape,
                                               tuple(shape)))
    for name, value in tables["velocity"].items():
        if name not in tables["params"] or tables["params"][name].shape != value.shape:
            raise SAPCorruptCheckpointError("Velocity '%s' does not match a parameter." % name)
    return SAPCheckpoint(tables["params"], tables["velocity"], epoch, meta)


def save_checkpoint(params, state, epoch, path, meta=None):
    # type: (dict, dict, int, str, dict) -> None
    """Write a checkpoint to disk.

    Arguments:
        params (dict): Model tensors by name.
        state (dict): Optimizer velocity tensors by parameter name.
        epoch (int): The number of completed epochs.
        path (str): The destination file.
        meta (dict): JSON-serializable run metadata.
    """
    atomic_write(path, encode_checkpoint(params, state, epoch, meta))
    _LOG.info("Saved checkpoint for epoch %s to %s.", epoch, path)


def load_checkpoint(path, expected_shapes=None):
    # type: (str, dict) -> SAPCheckpoint
    """Read a checkpoint from disk. See `decode_checkpoint`."""
    with open(path, "rb") as stream:
        return decode_checkpoint(stream.read(), expected_shapes)
