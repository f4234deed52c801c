# coding=utf-8
#
# ntu.py
# SAP Anchor Core - NTU
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the reader and writer for NTU RGB+D `.skeleton` text files.

## File layout

- A line with the number of frames.
- For every frame, a line with the number of bodies, then for every body:
    - a body-information line with 10 fields,
    - a line with the number of joints,
    - one line per joint with 12 fields, the first three of which are x, y and z.

Only the first body of every frame is kept. Frames without any body are dropped.
"""
import logging
import os
import re

import numpy as np

from .errors import SAPDataError
from .skeleton import SkeletonSequence, NTU_LAYOUT

_LOG = logging.getLogger(__name__)

_NAME_PATTERN = re.compile(r"S(\d{3})C(\d{3})P(\d{3})R(\d{3})A(\d{3})")


class SAPParseError(SAPDataError):
    """A `.skeleton` file could not be parsed.

    Attributes:
        line (int): The 1-based line number the error was found on.
    """

    def __init__(self, message, line):
        SAPDataError.__init__(self, "line %s: %s" % (line, message))
        self.line = line


class SAPMalformedHeaderError(SAPParseError):
    """A count or body-information line is not what the format requires."""


class SAPTruncatedFrameError(SAPParseError):
    """A frame ended before every declared body or joint line was read."""


class SAPNonFiniteCoordinateError(SAPParseError):
    """A joint coordinate is NaN or infinite."""


class SAPSequenceTooShortError(SAPDataError):
    """A sequence has fewer frames than the configured minimum."""


class SAPNTUReader(object):
    """The reader for a single NTU RGB+D skeleton sample.

    The reader walks the text line by line, keeps the coordinates of the first body in every
        frame, and records how many frames and extra bodies it had to drop.

    Attributes:
        dropped_frames (int): Frames with zero bodies.
        dropped_bodies (int): Bodies beyond the first one in multi-body frames.
    """

    def __init__(self, text, layout=NTU_LAYOUT):
        # type: (SAPNTUReader, any, any) -> None
        """Construct the reader and parse the text.

        Arguments:
            text (str): The file contents, or a file-like object with a `read` method.
            layout (sap_anchor.core.skeleton.SkeletonLayout): The joint layout the bodies must
                match. Defaults to the 25-joint NTU layout.

        Raises:
            error (SAPMalformedHeaderError): A count line is not an integer, a body-information
                line does not have 10 fields, or the joint count does not match the layout.
            error (SAPTruncatedFrameError): The text ends early or a joint line is missing.
            error (SAPNonFiniteCoordinateError): A coordinate is not finite.
        """
        if hasattr(text, "read"):
            text = text.read()
        self._lines = text.splitlines()
        self._cursor = 0
        self._layout = layout
        self.dropped_frames = 0
        self.dropped_bodies = 0

        frame_count = self._read_count("frame count")
        frames = []
        for frame in range(frame_count):
            body_count = self._read_count("body count of frame %s" % frame)
            kept = None
            for body in range(body_count):
                coords = self._read_body(frame, body)
                if body == 0:
                    kept = coords
                else:
                    self.dropped_bodies += 1
            if kept is None:
                self.dropped_frames += 1
                continue
            frames.append(kept)

        if self.dropped_frames or self.dropped_bodies:
            _LOG.debug("Dropped %s empty frames and %s extra bodies.",
                       self.dropped_frames, self.dropped_bodies)
        self._coords = np.array(frames, dtype=np.float64).reshape(-1, len(layout), 3)

    def _next_line(self, what):
        if self._cursor >= len(self._lines):
            raise SAPTruncatedFrameError("Expected %s but reached the end of the file." % what,
                                         self._cursor + 1)
        line = self._lines[self._cursor]
        self._cursor += 1
        return line.split()

    def _read_count(self, what):
        line_no = self._cursor + 1
        fields = self._next_line(what)
        if len(fields) != 1:
            raise SAPMalformedHeaderError("Expected %s but found %s fields." % (what, len(fields)),
                                          line_no)
        try:
            count = int(fields[0])
        except ValueError:
            raise SAPMalformedHeaderError("Expected an integer %s but found '%s'."
                                          % (what, fields[0]), line_no)
        if count < 0:
            raise SAPMalformedHeaderError("Negative %s." % what, line_no)
        return count

    def _read_body(self, frame, body):
        line_no = self._cursor + 1
        fields = self._next_line("body information of frame %s" % frame)
        if len(fields) != 10:
            raise SAPMalformedHeaderError("Body information has %s fields; expected 10."
                                          % len(fields), line_no)
        joint_count = self._read_count("joint count of frame %s" % frame)
        if body == 0 and joint_count != len(self._layout):
            raise SAPMalformedHeaderError("Body has %s joints; the layout has %s."
                                          % (joint_count, len(self._layout)), self._cursor)

        coords = []
        for joint in range(joint_count):
            line_no = self._cursor + 1
            fields = self._next_line("joint %s of frame %s" % (joint, frame))
            if len(fields) != 12:
                raise SAPTruncatedFrameError("Frame %s declares %s joints but joint line %s has "
                                             "%s fields." % (frame, joint_count, joint,
                                                             len(fields)), line_no)
            try:
                xyz = [float(value) for value in fields[:3]]
            except ValueError:
                raise SAPTruncatedFrameError("Joint line %s of frame %s is not numeric."
                                             % (joint, frame), line_no)
            if not all(np.isfinite(xyz)):
                raise SAPNonFiniteCoordinateError("Joint %s of frame %s is not finite."
                                                  % (joint, frame), line_no)
            coords.append(xyz)
        return coords

    def size(self):
        # type: (SAPNTUReader) -> tuple[int, int]
        """Get the number of kept frames and joints.

        Returns:
            A tuple containing T and V.
        """
        return self._coords.shape[0], self._coords.shape[1]

    def to_sequence(self, label=None, meta=None):
        # type: (SAPNTUReader, int, dict) -> SkeletonSequence
        """Get the kept coordinates as a skeleton sequence.

        Raises:
            error (SAPSequenceTooShortError): Every frame was empty.
        """
        if self._coords.shape[0] == 0:
            raise SAPSequenceTooShortError("The sample has no frame with a body.")
        return SkeletonSequence(self._coords, label, meta)


def parse_ntu_skeleton(text, layout=NTU_LAYOUT):
    # type: (any, any) -> SkeletonSequence
    """Parse the contents of an NTU `.skeleton` file into a skeleton sequence.

    Arguments:
        text (str): The file contents, or a file-like object.
        layout (sap_anchor.core.skeleton.SkeletonLayout): The joint layout.

    Returns:
        seq (SkeletonSequence): The first body's coordinates for every non-empty frame.
    """
    return SAPNTUReader(text, layout).to_sequence()


def serialize_ntu_skeleton(seq):
    # type: (SkeletonSequence) -> str
    """Write a sequence as the contents of a single-body NTU `.skeleton` file.

    Coordinates are written with the shortest representation that reads back to the same
        64-bit value, so parsing the output reproduces the coordinates exactly. The remaining
        body and joint fields are written as zeros with a tracked state of 2.
    """
    lines = ["%d" % seq.frames]
    body_id = seq.meta.get("body_id", "0")
    for frame in seq.coords:
        lines.append("1")
        lines.append("%s 0 0 0 0 0 0 0 0 2" % body_id)
        lines.append("%d" % len(frame))
        for x, y, z in frame:
            lines.append("%r %r %r 0 0 0 0 0 0 0 0 2" % (float(x), float(y), float(z)))
    return "\n".join(lines) + "\n"


def metadata_from_filename(path):
    # type: (str) -> dict
    """Get the setup, camera, subject, replication, and action ids from an NTU file name.

    Returns:
        meta (dict): The ids as strings, plus the source path. Empty ids when the name does not
            follow the `SsssCcccPpppRrrrAaaa` convention.
    """
    meta = {"source": os.path.basename(path)}
    match = _NAME_PATTERN.search(os.path.basename(path))
    if match:
        keys = ("setup", "camera", "subject", "replication", "action")
        meta.update(dict(zip(keys, match.groups())))
    return meta


def read_ntu_file(path, layout=NTU_LAYOUT, min_frames=1):
    # type: (str, any, int) -> SkeletonSequence
    """Read an NTU `.skeleton` file from disk.

    The label is taken from the action id in the file name (action 1 is label 0).

    Raises:
        error (SAPSequenceTooShortError): The sample has fewer than `min_frames` frames.
    """
    with open(path, "r") as file_obj:
        reader = SAPNTUReader(file_obj, layout)
    meta = metadata_from_filename(path)
    label = int(meta["action"]) - 1 if "action" in meta else None
    seq = reader.to_sequence(label, meta)
    if seq.frames < min_frames:
        raise SAPSequenceTooShortError("%s has %s frames; at least %s are required."
                                       % (path, seq.frames, min_frames))
    return seq
