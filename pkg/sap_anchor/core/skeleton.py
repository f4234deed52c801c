# coding=utf-8
#
# skeleton.py
# SAP Anchor Core - Skeleton
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the skeleton data types and the geometric transforms applied to them.

A skeleton sequence is a T×V×3 array of joint coordinates. Coordinates are kept in 64-bit
    floating point from the moment they are parsed; the gradient checks further down the
    pipeline rely on it.

The skeleton layout describes the joints by name and the bones that connect them. Bones are
    stored as (parent, child) pairs and must form a tree rooted at the layout's root joint.
"""
import numpy as np

from .errors import SAPDataError, SAPError


class SAPInvalidSequenceError(SAPDataError):
    """The coordinates do not form a valid skeleton sequence."""


class SAPInvalidLayoutError(SAPDataError):
    """The joint names and bones do not form a valid skeleton tree."""


class SAPUnknownJointError(SAPDataError, KeyError):
    """A joint name does not exist in the layout."""

    def __str__(self):
        return Exception.__str__(self)


class SAPNonOrthonormalRotationError(SAPError):
    """A rotation matrix is not orthonormal."""


class SAPInvalidScaleError(SAPError, ValueError):
    """A scale factor is not positive."""


class SkeletonSequence(object):
    """A series of joint coordinates with an optional class label.

    Attributes:
        coords (numpy.ndarray): The T×V×3 coordinate array.
        label (int): The class id, or None for unlabeled sequences.
        meta (dict): Free-form capture information (source, subject, camera, ...).
    """

    def __init__(self, coords, label=None, meta=None):
        # type: (SkeletonSequence, any, int, dict) -> None
        """Construct a skeleton sequence.

        Arguments:
            coords (array-like): The T×V×3 coordinates.
            label (int): The class id. Defaults to None.
            meta (dict): Capture information. Defaults to an empty dictionary.

        Raises:
            error (SAPInvalidSequenceError): The shape is wrong, T < 1, V < 2, the coordinates
                contain non-finite values, or the label is negative.
        """
        coords = np.array(coords, dtype=np.float64)
        if coords.ndim != 3 or coords.shape[2] != 3:
            raise SAPInvalidSequenceError("Expected a T×V×3 array but received shape %s."
                                          % (coords.shape,))
        if coords.shape[0] < 1 or coords.shape[1] < 2:
            raise SAPInvalidSequenceError("A sequence needs at least 1 frame and 2 joints; "
                                          "received %s×%s." % coords.shape[:2])
        if not np.all(np.isfinite(coords)):
            raise SAPInvalidSequenceError("Coordinates contain non-finite values.")
        if label is not None and int(label) < 0:
            raise SAPInvalidSequenceError("Labels must be non-negative; received %s." % label)
        self.coords = coords
        self.label = None if label is None else int(label)
        self.meta = dict(meta or {})

    def __eq__(self, value):
        return isinstance(value, SkeletonSequence) and self.label == value.label \
            and np.array_equal(self.coords, value.coords)

    def __ne__(self, value):
        return not self.__eq__(value)

    def __str__(self):
        return "SkeletonSequence(T=%s, V=%s, label=%s)" % (self.frames, self.joints, self.label)

    @property
    def frames(self):
        # type: (SkeletonSequence) -> int
        """The number of frames, T."""
        return self.coords.shape[0]

    @property
    def joints(self):
        # type: (SkeletonSequence) -> int
        """The number of joints, V."""
        return self.coords.shape[1]

    def with_coords(self, coords):
        # type: (SkeletonSequence, any) -> SkeletonSequence
        """Get a copy of this sequence with new coordinates and the same label and metadata."""
        return SkeletonSequence(coords, self.label, self.meta)


class SkeletonLayout(object):
    """The joint names and bone topology of a skeleton.

    Attributes:
        names (list): The V joint names.
        edges (list): The (parent, child) bone pairs.
        root (int): The index of the root joint.
        parents (list): The parent index of every joint; the root's parent is -1.
    """

    def __init__(self, names, edges, root=0):
        # type: (SkeletonLayout, list, list, int) -> None
        """Construct a layout.

        Raises:
            error (SAPInvalidLayoutError): An edge references a missing joint, the root is out of
                range, a joint has two parents, or the bones do not connect every joint to the
                root.
        """
        self.names = list(names)
        self.edges = [(int(p), int(c)) for p, c in edges]
        self.root = int(root)
        count = len(self.names)

        if len(set(self.names)) != count:
            raise SAPInvalidLayoutError("Joint names must be unique.")
        if not 0 <= self.root < count:
            raise SAPInvalidLayoutError("Root index %s is out of range." % self.root)
        if len(self.edges) != count - 1:
            raise SAPInvalidLayoutError("A tree over %s joints needs %s bones; received %s."
                                        % (count, count - 1, len(self.edges)))

        self.parents = [-1] * count
        for parent, child in self.edges:
            if not (0 <= parent < count and 0 <= child < count):
                raise SAPInvalidLayoutError("Bone (%s, %s) references a missing joint."
                                            % (parent, child))
            if child == self.root or self.parents[child] != -1:
                raise SAPInvalidLayoutError("Joint %s has more than one parent." % child)
            self.parents[child] = parent

        if len(self.order()) != count:
            raise SAPInvalidLayoutError("The bones do not connect every joint to the root.")

    def __len__(self):
        return len(self.names)

    def index(self, name):
        # type: (SkeletonLayout, str) -> int
        """Get the index of a joint by its name.

        Raises:
            error (SAPUnknownJointError): The name is not part of the layout.
        """
        try:
            return self.names.index(name)
        except ValueError:
            raise SAPUnknownJointError("Unknown joint name '%s'." % name)

    def children(self, joint):
        # type: (SkeletonLayout, int) -> list
        """Get the direct children of a joint."""
        return [c for p, c in self.edges if p == joint]

    def descendants(self, joint):
        # type: (SkeletonLayout, int) -> list
        """Get every joint below a joint in the tree, excluding the joint itself."""
        found, stack = [], self.children(joint)
        while stack:
            current = stack.pop()
            found.append(current)
            stack.extend(self.children(current))
        return sorted(found)

    def depth(self, joint):
        # type: (SkeletonLayout, int) -> int
        """Get the number of bones between a joint and the root."""
        depth = 0
        while self.parents[joint] != -1:
            joint = self.parents[joint]
            depth += 1
        return depth

    def order(self):
        # type: (SkeletonLayout) -> list
        """Get the joints in breadth-first order from the root."""
        seen, queue = [], [self.root]
        while queue:
            current = queue.pop(0)
            if current in seen:
                break
            seen.append(current)
            queue.extend(self.children(current))
        return seen


NTU_JOINT_NAMES = [
    "base_spine", "mid_spine", "neck", "head",
    "left_shoulder", "left_elbow", "left_wrist", "left_hand",
    "right_shoulder", "right_elbow", "right_wrist", "right_hand",
    "left_hip", "left_knee", "left_ankle", "left_foot",
    "right_hip", "right_knee", "right_ankle", "right_foot",
    "spine", "left_hand_tip", "left_thumb", "right_hand_tip", "right_thumb",
]

NTU_BONES = [
    (0, 1), (1, 20), (20, 2), (2, 3),
    (20, 4), (4, 5), (5, 6), (6, 7), (7, 21), (7, 22),
    (20, 8), (8, 9), (9, 10), (10, 11), (11, 23), (11, 24),
    (0, 12), (12, 13), (13, 14), (14, 15),
    (0, 16), (16, 17), (17, 18), (18, 19),
]

NTU_LAYOUT = SkeletonLayout(NTU_JOINT_NAMES, NTU_BONES, root=0)


def rotation_about_vertical(angle):
    # type: (float) -> numpy.ndarray
    """Get the rotation matrix for a turn about the vertical (y) axis.

    Arguments:
        angle (float): The angle in radians.

    Returns:
        rotation (numpy.ndarray): A 3×3 orthonormal matrix.
    """
    cos, sin = np.cos(angle), np.sin(angle)
    return np.array([[cos, 0.0, sin], [0.0, 1.0, 0.0], [-sin, 0.0, cos]])


def rotation_about_axis(axis, angle):
    # type: (any, float) -> numpy.ndarray
    """Get the rotation matrix for a turn about an arbitrary axis (Rodrigues' formula)."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    cross = np.array([[0.0, -axis[2], axis[1]],
                      [axis[2], 0.0, -axis[0]],
                      [-axis[1], axis[0], 0.0]])
    return np.eye(3) + np.sin(angle) * cross + (1.0 - np.cos(angle)) * cross.dot(cross)


def random_rotation(rng):
    # type: (numpy.random.Generator) -> numpy.ndarray
    """Draw a uniformly distributed rotation matrix."""
    matrix, upper = np.linalg.qr(rng.normal(size=(3, 3)))
    matrix = matrix * np.sign(np.diag(upper))
    if np.linalg.det(matrix) < 0:
        matrix[:, 0] = -matrix[:, 0]
    return matrix


def apply_similarity_transform(seq, rotation, translation, scale):
    # type: (SkeletonSequence, any, any, float) -> SkeletonSequence
    """Map every coordinate of a sequence through `x -> scale * R x + t`.

    Arguments:
        seq (SkeletonSequence): The sequence to transform.
        rotation (array-like): A 3×3 orthonormal matrix.
        translation (array-like): A 3-vector.
        scale (float): A positive scale factor.

    Returns:
        seq (SkeletonSequence): A new sequence with the same label and metadata.

    Raises:
        error (SAPNonOrthonormalRotationError): The rotation is not orthonormal within 1e-9.
        error (SAPInvalidScaleError): The scale is not positive.
    """
    rotation = np.asarray(rotation, dtype=np.float64)
    translation = np.asarray(translation, dtype=np.float64).reshape(3)
    if rotation.shape != (3, 3) or not np.allclose(rotation.dot(rotation.T), np.eye(3),
                                                   rtol=0.0, atol=1e-9):
        raise SAPNonOrthonormalRotationError("Rotation matrix is not orthonormal.")
    if not scale > 0:
        raise SAPInvalidScaleError("Scale must be positive; received %s." % scale)
    return seq.with_coords(scale * np.einsum("ij,tvj->tvi", rotation, seq.coords) + translation)


def normalize_sequence(seq, layout):
    # type: (SkeletonSequence, SkeletonLayout) -> SkeletonSequence
    """Translate a sequence so that the root joint of the first frame sits at the origin."""
    if not 0 <= layout.root < seq.joints:
        raise IndexError("Root joint %s is out of range for %s joints." % (layout.root,
                                                                           seq.joints))
    return seq.with_coords(seq.coords - seq.coords[0, layout.root])


def bounding_box_diagonal(seq):
    # type: (SkeletonSequence) -> float
    """Get the length of the diagonal of the box enclosing every coordinate of a sequence."""
    flat = seq.coords.reshape(-1, 3)
    return float(np.linalg.norm(flat.max(axis=0) - flat.min(axis=0)))


def resample_frames(seq, frames):
    # type: (SkeletonSequence, int) -> SkeletonSequence
    """Pick `frames` evenly spaced frames of a sequence, keeping the first and the last.

    Raises:
        error (SAPInvalidSequenceError): The sequence has fewer frames than requested.
    """
    if frames < 1 or seq.frames < frames:
        raise SAPInvalidSequenceError("Cannot pick %s frames from a %s-frame sequence."
                                      % (frames, seq.frames))
    picks = np.round(np.linspace(0, seq.frames - 1, frames)).astype(np.int64)
    return seq.with_coords(seq.coords[picks])
