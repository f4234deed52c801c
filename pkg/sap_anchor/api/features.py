# coding=utf-8
#
# features.py
# SAP Anchor API - Features
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The features submodule contains the triplet angle representation and the baseline streams.

Every joint `u` of every frame is described, for every anchor pair `(w1, w2)`, by the cosine of
    the angle at `u` between the vectors `w1 - u` and `w2 - u`. The cosine is exactly 0 when `u`
    coincides with either anchor or when the two anchors coincide with each other, since such a
    triplet carries no angle.

Angle features are unchanged by any rotation, translation, or uniform scale applied jointly to
    the joints and the anchors. Bone and coordinate streams are provided as baselines and are
    not scale-invariant.

The numpy functions in this module compute features for single sequences. `angle_nodes` and
    `featurize_nodes` record the same computation on a `sap_anchor.core.autodiff.SAPTape` so
    that gradients can flow into learned anchors.
"""
import json
import logging

import numpy as np

from ..core.config import DEFAULT_FIXED_ANCHORS
from ..core.dataset import atomic_write, encode_array, decode_array
from ..core.errors import SAPDataError
from ..core.skeleton import SkeletonSequence

_LOG = logging.getLogger(__name__)

EPSILON = 1e-8

FIXED_JOINT = "fixed-joint"
SAP_PROPOSED = "sap-proposed"

PER_FRAME = "per-frame"
FIRST_FRAME = "first"
FIXED_FRAMES = (PER_FRAME, FIRST_FRAME)

COORD_CHANNELS = ["coord-x", "coord-y", "coord-z"]
BONE_CHANNELS = ["bone-dx", "bone-dy", "bone-dz"]


class SAPFrameCountMismatchError(SAPDataError):
    """Per-frame anchors do not have as many frames as the sequence."""


class SAPInvalidAnchorsError(SAPDataError):
    """An anchor pair set or a feature tensor is malformed."""


def angle_channels(heads, prefix="angle-head"):
    # type: (int, str) -> list
    """Get the channel descriptors of `heads` angle channels."""
    return ["%s-%d" % (prefix, head) for head in range(heads)]


class AnchorPairSet(object):
    """Per-head anchor pairs, either one pair per frame or one pair shared across frames.

    Attributes:
        pairs (numpy.ndarray): A T×H×2×3 array (per-frame) or an H×2×3 array (shared). Index 0
            of the third-to-last axis holds the first anchor, index 1 the second.
        provenance (str): Where the anchors come from: `fixed-joint` or `sap-proposed`.
    """

    def __init__(self, pairs, provenance=SAP_PROPOSED):
        # type: (AnchorPairSet, any, str) -> None
        """Construct an anchor pair set.

        Raises:
            error (SAPInvalidAnchorsError): The array does not have either layout, has no
                heads, or contains non-finite values.
        """
        pairs = np.array(pairs, dtype=np.float64)
        if pairs.ndim not in (3, 4) or pairs.shape[-2:] != (2, 3) or pairs.shape[-3] < 1:
            raise SAPInvalidAnchorsError("Expected a T×H×2×3 or H×2×3 anchor array but "
                                         "received shape %s." % (pairs.shape,))
        if not np.all(np.isfinite(pairs)):
            raise SAPInvalidAnchorsError("Anchor coordinates contain non-finite values.")
        if provenance not in (FIXED_JOINT, SAP_PROPOSED):
            raise SAPInvalidAnchorsError("Unknown anchor provenance '%s'." % provenance)
        self.pairs = pairs
        self.provenance = provenance

    def __str__(self):
        mode = ("per-frame, T=%s" % self.frames) if self.per_frame else "shared"
        return "AnchorPairSet(H=%s, %s, %s)" % (self.heads, mode, self.provenance)

    @property
    def per_frame(self):
        # type: (AnchorPairSet) -> bool
        return self.pairs.ndim == 4

    @property
    def heads(self):
        # type: (AnchorPairSet) -> int
        return self.pairs.shape[-3]

    @property
    def frames(self):
        # type: (AnchorPairSet) -> int
        """The number of frames for per-frame anchors, or None for shared anchors."""
        return self.pairs.shape[0] if self.per_frame else None

    def expand(self, frames):
        # type: (AnchorPairSet, int) -> numpy.ndarray
        """Get the anchors as a T×H×2×3 array, repeating shared anchors over every frame.

        Raises:
            error (SAPFrameCountMismatchError): Per-frame anchors have a different frame count.
        """
        if self.per_frame:
            if self.frames != frames:
                raise SAPFrameCountMismatchError("Anchors cover %s frames but the sequence has "
                                                 "%s." % (self.frames, frames))
            return self.pairs
        return np.broadcast_to(self.pairs, (frames,) + self.pairs.shape)

    def distances(self):
        # type: (AnchorPairSet) -> numpy.ndarray
        """Get the distance between the two anchors of every pair."""
        return np.linalg.norm(self.pairs[..., 0, :] - self.pairs[..., 1, :], axis=-1)


class FeatureTensor(object):
    """Per-frame, per-joint feature channels.

    Attributes:
        values (numpy.ndarray): The T×V×C values.
        channels (list): The C channel descriptors, such as `angle-head-0` or `bone-dx`.
    """

    def __init__(self, values, channels):
        # type: (FeatureTensor, any, list) -> None
        """Construct a feature tensor.

        Raises:
            error (SAPInvalidAnchorsError): The descriptors do not match the channel count, or an
                angle channel leaves [-1, 1].
        """
        values = np.array(values, dtype=np.float64)
        if values.ndim != 3 or values.shape[2] != len(channels):
            raise SAPInvalidAnchorsError("Feature shape %s does not match %s channel "
                                         "descriptors." % (values.shape, len(channels)))
        angles = [i for i, name in enumerate(channels) if name.startswith("angle")]
        if angles and np.any(np.abs(values[..., angles]) > 1.0 + 1e-12):
            raise SAPInvalidAnchorsError("Angle channels must lie in [-1, 1].")
        self.values = values
        self.channels = list(channels)

    def __str__(self):
        return "FeatureTensor(T=%s, V=%s, C=%s)" % self.values.shape


def sequence_coords(seq):
    # type: (any) -> numpy.ndarray
    """Get the T×V×3 coordinates of a sequence, or of a raw array."""
    return seq.coords if isinstance(seq, SkeletonSequence) else np.asarray(seq, dtype=np.float64)


def angle_cosines(u, w1, w2):
    # type: (any, any, any) -> numpy.ndarray
    """Compute triplet angle cosines over broadcastable arrays whose last axis holds x/y/z."""
    u, w1, w2 = [np.asarray(a, dtype=np.float64) for a in (u, w1, w2)]
    first, second = w1 - u, w2 - u
    norm_first = np.sqrt(np.sum(first * first, axis=-1))
    norm_second = np.sqrt(np.sum(second * second, axis=-1))
    spread = w1 - w2
    norm_spread = np.sqrt(np.sum(spread * spread, axis=-1))
    degenerate = (norm_first < EPSILON) | (norm_second < EPSILON) | (norm_spread < EPSILON)
    with np.errstate(all="ignore"):
        cosine = np.sum(first * second, axis=-1) / (norm_first * norm_second)
    return np.where(degenerate, 0.0, np.clip(np.nan_to_num(cosine), -1.0, 1.0))


def angle_feature(u, w1, w2):
    # type: (any, any, any) -> float
    """Compute the cosine of the angle at `u` subtended by the anchors `w1` and `w2`.

    Arguments:
        u (array-like): The joint position.
        w1 (array-like): The first anchor.
        w2 (array-like): The second anchor.

    Returns:
        cosine (float): A value in [-1, 1], or exactly 0 when `u` coincides with an anchor or
            the anchors coincide with each other.
    """
    return float(angle_cosines(u, w1, w2))


def featurize_sequence(seq, anchors):
    # type: (SkeletonSequence, AnchorPairSet) -> FeatureTensor
    """Compute the T×V×H angle features of a sequence against a set of anchor pairs.

    Arguments:
        seq (SkeletonSequence): The sequence, or a raw T×V×3 coordinate array.
        anchors (AnchorPairSet): The anchor pairs.

    Returns:
        features (FeatureTensor): Channel `h` at `(t, v)` is the angle at joint `v` of frame `t`
            against pair `h` (of frame `t`, for per-frame anchors).

    Raises:
        error (SAPFrameCountMismatchError): Per-frame anchors have a different frame count.
    """
    coords = sequence_coords(seq)
    pairs = anchors.expand(coords.shape[0])
    values = angle_cosines(coords[:, :, None, :], pairs[:, None, :, 0, :],
                           pairs[:, None, :, 1, :])
    return FeatureTensor(values, angle_channels(anchors.heads))


def fixed_anchor_pairs(layout, seq, names=None, pairing=None, frame=PER_FRAME):
    # type: (SkeletonLayout, SkeletonSequence, list, str, str) -> AnchorPairSet
    """Build anchor pairs from named joints.

    Arguments:
        layout (SkeletonLayout): The layout the names are looked up in.
        seq (SkeletonSequence): The sequence the anchors are read from.
        names (list): The anchor joints. Defaults to the seven-joint set (head, both hands,
            both feet, base of the spine, and spine).
        pairing (str): `root` pairs every named joint with the layout's root joint (one pair
            per name); `consecutive` pairs the names two by two. Defaults to `root` for the
            default set and to `consecutive` when names are given.
        frame (str): `per-frame` reads the joints in every frame; `first` reads them once in
            the first frame and shares them over the sequence.

    Returns:
        anchors (AnchorPairSet): The anchor pairs, with `fixed-joint` provenance.

    Raises:
        error (SAPUnknownJointError): A name is not part of the layout.
        error (SAPInvalidAnchorsError): Consecutive pairing was asked for an odd number of names,
            or the pairing or frame choice is unknown.
    """
    if frame not in FIXED_FRAMES:
        raise SAPInvalidAnchorsError("Unknown fixed anchor frame '%s'; expected one of %s."
                                     % (frame, ", ".join(FIXED_FRAMES)))
    if pairing is None:
        pairing = "root" if names is None else "consecutive"
    indices = [layout.index(name) for name in (names or DEFAULT_FIXED_ANCHORS)]
    if pairing == "root":
        pairs = [(index, layout.root) for index in indices]
    elif pairing == "consecutive":
        if not indices or len(indices) % 2:
            raise SAPInvalidAnchorsError("Consecutive pairing needs an even number of names; "
                                         "received %s." % len(indices))
        pairs = list(zip(indices[0::2], indices[1::2]))
    else:
        raise SAPInvalidAnchorsError("Unknown anchor pairing '%s'." % pairing)

    coords = sequence_coords(seq)
    selected = coords[:, np.asarray(pairs, dtype=np.int64), :]
    return AnchorPairSet(selected if frame == PER_FRAME else selected[0], FIXED_JOINT)


def bone_features(seq, layout):
    # type: (SkeletonSequence, SkeletonLayout) -> FeatureTensor
    """Get the vector from each joint's parent to the joint; the root gets zeros."""
    coords = sequence_coords(seq)
    values = np.zeros(coords.shape)
    for parent, child in layout.edges:
        values[:, child, :] = coords[:, child, :] - coords[:, parent, :]
    return FeatureTensor(values, BONE_CHANNELS)


def coordinate_features(seq):
    # type: (SkeletonSequence) -> FeatureTensor
    """Get the raw coordinates as a feature tensor."""
    return FeatureTensor(sequence_coords(seq), COORD_CHANNELS)


def concat_features(*tensors):
    # type: (*FeatureTensor) -> FeatureTensor
    """Concatenate feature tensors along the channel axis.

    Raises:
        error (SAPInvalidAnchorsError): No tensors were given, or their frame or joint counts
            differ.
    """
    if not tensors:
        raise SAPInvalidAnchorsError("Cannot concatenate an empty list of feature tensors.")
    shape = tensors[0].values.shape[:2]
    if any(tensor.values.shape[:2] != shape for tensor in tensors):
        raise SAPInvalidAnchorsError("Feature tensors differ in frame or joint count.")
    channels = []
    for tensor in tensors:
        channels.extend(tensor.channels)
    return FeatureTensor(np.concatenate([t.values for t in tensors], axis=-1), channels)


def export_features(features, path, labels=None):
    # type: (list, str, list) -> None
    """Write feature tensors to a container file and their channel descriptors to a sidecar.

    The values go to `path` in the `SAPDS` container layout, with channels in place of x/y/z.
        The sidecar `path.json` records the channel descriptors needed to read them back.

    Arguments:
        features (list): Feature tensors with identical shapes and channels, or a single tensor.
        path (str): The container path.
        labels (list): The label of every tensor. Defaults to unlabeled.
    """
    if isinstance(features, FeatureTensor):
        features = [features]
    if not features:
        raise SAPInvalidAnchorsError("Cannot export an empty list of feature tensors.")
    channels = features[0].channels
    if any(f.channels != channels or f.values.shape != features[0].values.shape
           for f in features):
        raise SAPInvalidAnchorsError("Exported feature tensors must share shape and channels.")
    labels = [-1] * len(features) if labels is None \
        else [-1 if label is None else label for label in labels]
    atomic_write(path, encode_array(np.stack([f.values for f in features]), labels))
    sidecar = {"channels": channels, "frames": features[0].values.shape[0],
               "joints": features[0].values.shape[1], "count": len(features)}
    atomic_write(path + ".json", json.dumps(sidecar, indent=2).encode("utf-8"))
    _LOG.info("Exported %s feature tensors (%s channels) to %s.", len(features), len(channels),
              path)


def read_features(path):
    # type: (str) -> tuple
    """Read feature tensors written by `export_features`.

    Returns:
        result (tuple): The list of feature tensors and the list of labels (None if unlabeled).
    """
    with open(path + ".json", "r") as file_obj:
        channels = json.load(file_obj)["channels"]
    with open(path, "rb") as stream:
        values, labels = decode_array(stream.read(), channels=len(channels))
    return ([FeatureTensor(v, channels) for v in values],
            [None if label < 0 else int(label) for label in labels])


def angle_nodes(tape, u, w1, w2):
    # type: (SAPTape, SAPNode, SAPNode, SAPNode) -> SAPNode
    """Record the triplet angle cosine on a tape.

    The operands broadcast against each other and hold x/y/z on their last axis. Each of the
        three distances is guarded by adding `EPSILON` when it is below `EPSILON`, and the
        cosine is multiplied by the three indicators `distance >= EPSILON`, so degenerate
        triplets evaluate to exactly 0 and pass no gradient.

    Returns:
        node (SAPNode): The cosines, with the broadcast shape of the operands minus the last
            axis.
    """
    first, second, spread = tape.sub(w1, u), tape.sub(w2, u), tape.sub(w1, w2)
    one = tape.constant(1.0)
    guarded, masks = [], []
    for vector in (first, second, spread):
        length = tape.norm(vector)
        mask = tape.step(length, EPSILON)
        guarded.append(tape.add(length, tape.scale(tape.sub(one, mask), EPSILON)))
        masks.append(mask)
    cosine = tape.div(tape.dot(first, second), tape.mul(guarded[0], guarded[1]))
    return tape.mul(tape.mul(cosine, masks[0]), tape.mul(masks[1], masks[2]))


def featurize_nodes(tape, joints, anchors):
    # type: (SAPTape, SAPNode, tuple) -> SAPNode
    """Record batched angle featurization on a tape.

    Arguments:
        tape (SAPTape): The tape to record on.
        joints (SAPNode): A B×T×V×3 node of joint coordinates.
        anchors (tuple): The first and second anchors, each a B×T'×H×3 node where T' is T for
            per-frame anchors or 1 for shared anchors.

    Returns:
        node (SAPNode): A B×T×V×H node of angle features.
    """
    batch, frames, count, _ = joints.shape
    u = tape.reshape(joints, (batch, frames, count, 1, 3))
    ends = []
    for anchor in anchors:
        span, heads = anchor.shape[1], anchor.shape[2]
        ends.append(tape.reshape(anchor, (batch, span, 1, heads, 3)))
    return angle_nodes(tape, u, ends[0], ends[1])
