# coding=utf-8
#
# sap.py
# SAP Anchor API - Skeleton Anchor Proposal
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The sap submodule contains the skeleton anchor proposal module.

The module learns where to put anchors by attending over the joints of a sequence:

1. Each joint is summarized by its mean position over all frames.
2. Two learned maps, θ and φ, project the means into a hidden space. The logit of joint `i`
    is `α` times the sum of its similarities `θ(i)·φ(j)` to every joint `j`.
3. A softmax over the logits gives a weight per joint.
4. The anchor is a weighted sum of joint positions. Where the positions come from depends on
    the placement variant:
    - `V1` uses every frame's own joints, so the anchor moves with the body and stays inside it.
    - `V2` uses the first frame's joints, so the anchor is fixed for the whole sequence.
    - `V3` uses a learned linear map `g` of the mean joints, so the anchor may fall around the
        body instead of on it.

Two banks of `H` heads run side by side. Head `h` of the first bank and head `h` of the second
    bank give the two anchors of pair `h`, and every pair contributes one angle channel.

Large values of `α` sharpen the softmax until the anchors sit on single joints.
"""
import json
import logging

import numpy as np

from ..core.autodiff import SAPShapeMismatchError
from ..core.dataset import atomic_write
from ..core.errors import SAPDataError
from .features import AnchorPairSet, SAP_PROPOSED, EPSILON, featurize_sequence, \
    featurize_nodes, sequence_coords

_LOG = logging.getLogger(__name__)

V1 = "V1"
V2 = "V2"
V3 = "V3"
VARIANTS = (V1, V2, V3)
BANKS = (1, 2)


class SAPInvalidParamsError(SAPDataError):
    """The anchor proposal parameters are invalid."""


class SAPVariantParamMissingError(SAPInvalidParamsError):
    """The around-body variant was asked for without its `g` transform."""


class SAPInvalidWeightsError(SAPDataError):
    """A weight vector is not on the simplex."""


class SapParams(object):
    """The trainable tensors and settings of one pair of anchor proposal banks.

    Tensors are stored by name: `sap/bank1/theta`, `sap/bank1/phi`, and (for `V3` only)
        `sap/bank1/g`, and the same for `bank2`. θ and φ are H×d×3; `g` is H×3×3. When the banks
        share parameters, only the `bank1` tensors exist and both banks read them.

    Attributes:
        heads (int): The number of heads, H.
        hidden (int): The hidden size of θ and φ, d.
        variant (str): The placement variant, `V1`, `V2`, or `V3`.
        alpha (float): The softmax temperature.
        share_banks (bool): Whether both banks use the same tensors.
        tensors (dict): The tensors by name.
    """

    def __init__(self, tensors, variant=V3, alpha=1.0, share_banks=False):
        # type: (SapParams, dict, str, float, bool) -> None
        """Construct the parameters from existing tensors.

        Raises:
            error (SAPInvalidParamsError): A setting is out of range, a tensor is missing or
                has the wrong shape, or a tensor contains non-finite values.
        """
        self.variant = variant
        self.alpha = float(alpha)
        self.share_banks = bool(share_banks)
        self.tensors = dict((k, np.array(v, dtype=np.float64)) for k, v in tensors.items())
        theta = self.tensors.get(self.tensor_name(1, "theta"))
        if theta is None or theta.ndim != 3:
            raise SAPInvalidParamsError("Missing or malformed tensor %s."
                                        % self.tensor_name(1, "theta"))
        self.heads, self.hidden = theta.shape[0], theta.shape[1]
        self.validate()

    def __str__(self):
        return "SapParams(%s, H=%s, d=%s, alpha=%s%s)" % (
            self.variant, self.heads, self.hidden, self.alpha,
            ", shared" if self.share_banks else "")

    @classmethod
    def initialize(cls, heads=5, hidden=8, variant=V3, alpha=1.0, rng=None, share_banks=False):
        # type: (int, int, str, float, numpy.random.Generator, bool) -> SapParams
        """Create freshly initialized parameters.

        θ and φ entries are drawn uniformly from [-r, r] with r = 1/sqrt(3d), which keeps the
            first logits small so the weights start close to uniform. `g` starts at the
            identity plus uniform noise in [-0.01, 0.01].

        Arguments:
            heads (int): The number of heads.
            hidden (int): The hidden size.
            variant (str): The placement variant.
            alpha (float): The softmax temperature.
            rng (numpy.random.Generator): The random source. Defaults to a generator seeded
                with 0.
            share_banks (bool): Whether both banks use the same tensors.
        """
        if heads < 1 or hidden < 1:
            raise SAPInvalidParamsError("Heads and hidden size must be at least 1.")
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(3.0 * hidden)
        tensors = {}
        for bank in (BANKS[:1] if share_banks else BANKS):
            prefix = "sap/bank%d/" % bank
            tensors[prefix + "theta"] = rng.uniform(-bound, bound, (heads, hidden, 3))
            tensors[prefix + "phi"] = rng.uniform(-bound, bound, (heads, hidden, 3))
            if variant == V3:
                tensors[prefix + "g"] = np.eye(3) + rng.uniform(-0.01, 0.01, (heads, 3, 3))
        return cls(tensors, variant, alpha, share_banks)

    def tensor_name(self, bank, kind):
        # type: (SapParams, int, str) -> str
        """Get the name of a bank's `theta`, `phi`, or `g` tensor."""
        return "sap/bank%d/%s" % (1 if self.share_banks else bank, kind)

    def shapes(self):
        # type: (SapParams) -> dict
        """Get the shape every tensor must have, by name."""
        shapes = {}
        for bank in BANKS:
            shapes[self.tensor_name(bank, "theta")] = (self.heads, self.hidden, 3)
            shapes[self.tensor_name(bank, "phi")] = (self.heads, self.hidden, 3)
            if self.variant == V3:
                shapes[self.tensor_name(bank, "g")] = (self.heads, 3, 3)
        return shapes

    def validate(self):
        # type: (SapParams) -> None
        if self.variant not in VARIANTS:
            raise SAPInvalidParamsError("Unknown placement variant '%s'." % self.variant)
        if not self.alpha > 0:
            raise SAPInvalidParamsError("Alpha must be positive; received %s." % self.alpha)
        if self.heads < 1 or self.hidden < 1:
            raise SAPInvalidParamsError("Heads and hidden size must be at least 1.")
        for name, shape in self.shapes().items():
            if name not in self.tensors:
                if name.endswith("/g"):
                    raise SAPVariantParamMissingError("Variant V3 needs tensor %s." % name)
                raise SAPInvalidParamsError("Missing tensor %s." % name)
            if self.tensors[name].shape != shape:
                raise SAPInvalidParamsError("Tensor %s has shape %s; expected %s."
                                            % (name, self.tensors[name].shape, shape))
            if not np.all(np.isfinite(self.tensors[name])):
                raise SAPInvalidParamsError("Tensor %s contains non-finite values." % name)

    def bank(self, bank, head):
        # type: (SapParams, int, int) -> tuple
        """Get the θ, φ, and `g` matrices of one head of one bank (`g` is None unless V3)."""
        g_name = self.tensor_name(bank, "g")
        return (self.tensors[self.tensor_name(bank, "theta")][head],
                self.tensors[self.tensor_name(bank, "phi")][head],
                self.tensors[g_name][head] if g_name in self.tensors else None)

    def with_tensors(self, tensors):
        # type: (SapParams, dict) -> SapParams
        """Get a copy of these parameters with some tensors replaced."""
        merged = dict(self.tensors)
        merged.update((k, v) for k, v in tensors.items() if k in merged)
        return SapParams(merged, self.variant, self.alpha, self.share_banks)


class AnchorWeights(object):
    """Joint weights on the simplex.

    Attributes:
        values (numpy.ndarray): An array whose last axis runs over the V joints.
    """

    def __init__(self, values):
        # type: (AnchorWeights, any) -> None
        """Construct the weights.

        Raises:
            error (SAPInvalidWeightsError): An entry is negative or a vector does not sum to 1
                within 1e-9.
        """
        values = np.array(values, dtype=np.float64)
        if np.any(values < 0.0) or not np.allclose(values.sum(axis=-1), 1.0, rtol=0.0,
                                                   atol=1e-9):
            raise SAPInvalidWeightsError("Weights must be non-negative and sum to 1.")
        self.values = values

    def argmax(self):
        # type: (AnchorWeights) -> any
        """Get the most heavily weighted joint."""
        return np.argmax(self.values, axis=-1)


class BodyFrame(object):
    """A body-centred frame of reference for the mean joint positions.

    The frame puts the root joint at the origin, divides by the root-mean-square distance of
        the joints from the root, and turns about the vertical (y) axis so that the main
        horizontal axis of the body lies along x. Points in body coordinates do not change when
        the whole sequence is scaled, translated, or turned about the vertical axis, so the
        attention and the around-body map `g` see the same input however the subject stands.

    Attributes:
        origin (numpy.ndarray): The root joint's mean position.
        scale (float): The body's spread around the root, or 1 for a collapsed body.
        rotation (numpy.ndarray): The 3×3 turn about the vertical axis into body coordinates.
    """

    def __init__(self, origin, scale, rotation):
        # type: (BodyFrame, any, float, any) -> None
        self.origin = np.asarray(origin, dtype=np.float64)
        self.scale = float(scale)
        self.rotation = np.asarray(rotation, dtype=np.float64)

    @classmethod
    def from_means(cls, means, root=0):
        # type: (any, int) -> BodyFrame
        """Find the body frame of a set of V×3 mean joint positions."""
        means = np.asarray(means, dtype=np.float64)
        origin = means[root]
        centered = means - origin
        spread = np.sqrt(np.mean(np.sum(centered ** 2, axis=-1)))
        flat = centered[:, (0, 2)]
        _, vectors = np.linalg.eigh(flat.T.dot(flat))
        axis = vectors[:, -1]
        # Orient the axis by the joint order so mirrored eigenvectors agree.
        if np.arange(1, len(means) + 1).dot(flat.dot(axis)) < 0.0:
            axis = -axis
        rotation = np.array([[axis[0], 0.0, axis[1]],
                             [0.0, 1.0, 0.0],
                             [-axis[1], 0.0, axis[0]]])
        return cls(origin, spread if spread >= EPSILON else 1.0, rotation)

    def to_body(self, points):
        # type: (BodyFrame, any) -> numpy.ndarray
        """Map world points (last axis of size 3) into body coordinates."""
        return (np.asarray(points) - self.origin).dot(self.rotation.T) / self.scale

    def to_world(self, points):
        # type: (BodyFrame, any) -> numpy.ndarray
        """Map body points (last axis of size 3) back into world coordinates."""
        return self.origin + self.scale * np.asarray(points).dot(self.rotation)


def temporal_mean(seq):
    # type: (SkeletonSequence) -> numpy.ndarray
    """Get the mean position of every joint over all frames, as a V×3 array."""
    coords = sequence_coords(seq)
    return coords.sum(axis=0) / coords.shape[0]


def similarity_logits(means, w_theta, w_phi, alpha):
    # type: (any, any, any, float) -> numpy.ndarray
    """Compute the attention logit of every joint.

    The logit of joint `i` is `alpha * sum_j θ(i)·φ(j)` where `θ(i) = w_theta x_i` and
        `φ(j) = w_phi x_j`. The full V×V similarity matrix is formed and summed row by row.

    Arguments:
        means (array-like): The V×3 mean joint positions.
        w_theta (array-like): The d×3 θ matrix.
        w_phi (array-like): The d×3 φ matrix.
        alpha (float): The temperature.

    Returns:
        logits (numpy.ndarray): The V logits.

    Raises:
        error (SAPShapeMismatchError): The shapes do not agree.
    """
    means, w_theta, w_phi = [np.asarray(a, dtype=np.float64) for a in (means, w_theta, w_phi)]
    if means.ndim != 2 or means.shape[1] != 3 or w_theta.ndim != 2 \
            or w_theta.shape[1] != 3 or w_phi.shape != w_theta.shape:
        raise SAPShapeMismatchError("Cannot compute logits for means %s with maps %s and %s."
                                    % (means.shape, w_theta.shape, w_phi.shape))
    theta = means.dot(w_theta.T)
    phi = means.dot(w_phi.T)
    similarity = theta.dot(phi.T)
    return alpha * similarity.sum(axis=1)


def anchor_weights(logits):
    # type: (any) -> AnchorWeights
    """Normalize logits into weights with a max-shifted softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return AnchorWeights(shifted / shifted.sum(axis=-1, keepdims=True))


def propose_anchor(seq, means, weights, variant, wg=None, frame=None):
    # type: (SkeletonSequence, any, AnchorWeights, str, any, BodyFrame) -> numpy.ndarray
    """Place one anchor as a weighted sum of joint positions.

    Arguments:
        seq (SkeletonSequence): The sequence, or a raw T×V×3 array.
        means (array-like): The V×3 mean joint positions.
        weights (AnchorWeights): A single weight vector over the V joints.
        variant (str): `V1`, `V2`, or `V3`.
        wg (array-like): The 3×3 `g` matrix, required for `V3`.
        frame (BodyFrame): The frame `g` acts in, for `V3`. Defaults to acting on the world
            coordinates directly.

    Returns:
        anchor (numpy.ndarray): A T×3 array for `V1`, or a 3-vector for `V2` and `V3`.

    Raises:
        error (SAPVariantParamMissingError): `V3` was asked for without `wg`.
        error (SAPInvalidParamsError): The variant is unknown.
    """
    weight = weights.values if isinstance(weights, AnchorWeights) else np.asarray(weights)
    coords = sequence_coords(seq)
    if variant == V1:
        return np.einsum("v,tvc->tc", weight, coords)
    if variant == V2:
        return weight.dot(coords[0])
    if variant == V3:
        if wg is None:
            raise SAPVariantParamMissingError("Variant V3 needs a g matrix.")
        wg = np.asarray(wg, dtype=np.float64)
        if frame is None:
            return wg.dot(weight.dot(np.asarray(means)))
        return frame.to_world(wg.dot(weight.dot(frame.to_body(means))))
    raise SAPInvalidParamsError("Unknown placement variant '%s'." % variant)


def bank_weights(seq, params, root=0):
    # type: (SkeletonSequence, SapParams, int) -> dict
    """Get the joint weights of every head of both banks, keyed by bank number (H×V each).

    The logits are computed from the mean joints in body coordinates (see `BodyFrame`).
    """
    means = temporal_mean(seq)
    body = BodyFrame.from_means(means, root).to_body(means)
    result = {}
    for bank in BANKS:
        rows = []
        for head in range(params.heads):
            theta, phi, _ = params.bank(bank, head)
            rows.append(anchor_weights(similarity_logits(body, theta, phi, params.alpha)).values)
        result[bank] = AnchorWeights(np.stack(rows))
    return result


def propose_anchor_pairs(seq, params, root=0):
    # type: (SkeletonSequence, SapParams, int) -> AnchorPairSet
    """Propose one anchor pair per head.

    Head `h` of bank 1 gives the first anchor and head `h` of bank 2 the second. Pairs whose
        anchors coincide (distance below `EPSILON`) produce only zero angles; they are reported
        once per head with a warning.

    Arguments:
        seq (SkeletonSequence): The sequence.
        params (SapParams): The parameters.
        root (int): The index of the root joint the body frame is centred on.

    Returns:
        anchors (AnchorPairSet): Per-frame pairs for `V1`, shared pairs otherwise, with
            `sap-proposed` provenance.
    """
    params.validate()
    means = temporal_mean(seq)
    frame = BodyFrame.from_means(means, root)
    weights = bank_weights(seq, params, root)
    heads = []
    for head in range(params.heads):
        pair = []
        for bank in BANKS:
            _, _, wg = params.bank(bank, head)
            pair.append(propose_anchor(seq, means, weights[bank].values[head], params.variant,
                                       wg, frame))
        heads.append(np.stack(pair, axis=-2))
    pairs = AnchorPairSet(np.stack(heads, axis=-3), SAP_PROPOSED)

    distances = pairs.distances()
    for head in range(params.heads):
        if np.any(distances[..., head] < EPSILON):
            _LOG.warning("Anchor pair of head %s is coincident; its angle channel is zero.",
                         head)
    return pairs


def sap_forward(seq, params, root=0):
    # type: (SkeletonSequence, SapParams, int) -> FeatureTensor
    """Propose anchor pairs for a sequence and compute its T×V×H angle features."""
    return featurize_sequence(seq, propose_anchor_pairs(seq, params, root))


def export_anchors(pairs, path=None, sample=None):
    # type: (AnchorPairSet, str, int) -> list
    """Get (and optionally write) the anchors as JSON records.

    Every record has the keys `head`, `bank` (1 or 2), `frame` (an index, or `"shared"`),
        `xyz`, and `provenance`. When `sample` is given it is added to every record.

    Arguments:
        pairs (AnchorPairSet): The anchors to export.
        path (str): Where to write the JSON array. Defaults to not writing.
        sample (int): The index of the sample the anchors belong to.

    Returns:
        records (list): The records.
    """
    records = []
    frames = range(pairs.frames) if pairs.per_frame else ["shared"]
    for frame in frames:
        block = pairs.pairs[frame] if pairs.per_frame else pairs.pairs
        for head in range(pairs.heads):
            for bank in BANKS:
                record = {"head": head, "bank": bank, "frame": frame,
                          "xyz": [float(v) for v in block[head, bank - 1]],
                          "provenance": pairs.provenance}
                if sample is not None:
                    record["sample"] = sample
                records.append(record)
    if path is not None:
        atomic_write(path, json.dumps(records, indent=2).encode("utf-8"))
        _LOG.info("Exported %s anchors to %s.", len(records), path)
    return records


def _bank_anchor_nodes(tape, bank, params, nodes, body, frames, coords):
    batch = coords.shape[0]
    joints = coords.shape[2]
    heads = params.heads

    def parameter(kind, shape):
        name = params.tensor_name(bank, kind)
        if name not in nodes:
            nodes[name] = tape.parameter(name, shape)
        return nodes[name]

    theta = parameter("theta", (heads, params.hidden, 3))
    phi = parameter("phi", (heads, params.hidden, 3))
    projected_theta = tape.matmul(body, tape.transpose(theta))
    projected_phi = tape.matmul(body, tape.transpose(phi))
    similarity = tape.matmul(projected_theta, tape.transpose(projected_phi))
    logits = tape.scale(tape.sum(similarity, axis=-1), params.alpha)
    weights = tape.softmax(logits)

    if params.variant == V3:
        rotation, scale, origin = frames
        g = parameter("g", (heads, 3, 3))
        mapped = tape.matmul(body, tape.transpose(g))
        anchor = tape.matmul(tape.reshape(weights, (batch, heads, 1, joints)), mapped)
        anchor = tape.matmul(tape.reshape(anchor, (batch, 1, heads, 3)), rotation)
        return tape.add(tape.mul(anchor, scale), origin)
    source = coords if params.variant == V1 else tape.gather(coords, [0], axis=1)
    return tape.matmul(tape.reshape(weights, (batch, 1, heads, joints)), source)


def sap_nodes(tape, batch, params, joints=None, root=0):
    # type: (SAPTape, any, SapParams, SAPNode, int) -> tuple
    """Record the batched anchor proposal and angle featurization on a tape.

    Mean joint positions and their body frames do not depend on any parameter, so they are
        computed up front and recorded as constants.

    Arguments:
        tape (SAPTape): The tape to record on.
        batch (array-like): The B×T×V×3 joint coordinates.
        params (SapParams): The parameters; their tensor names become parameter names.
        joints (SAPNode): An existing constant node holding `batch`. Defaults to recording a
            new one.
        root (int): The index of the root joint the body frames are centred on.

    Returns:
        result (tuple): The B×T×V×H feature node and a dictionary of the parameter nodes by
            name.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4 or batch.shape[-1] != 3:
        raise SAPShapeMismatchError("Expected a B×T×V×3 batch but received shape %s."
                                    % (batch.shape,))
    coords = joints if joints is not None else tape.constant(batch)
    means = batch.sum(axis=1) / batch.shape[1]
    frames = [BodyFrame.from_means(sample, root) for sample in means]
    body = tape.constant(np.stack([f.to_body(m) for f, m in zip(frames, means)])[:, None])
    constants = (tape.constant(np.stack([f.rotation for f in frames])[:, None]),
                 tape.constant(np.array([f.scale for f in frames]).reshape(-1, 1, 1, 1)),
                 tape.constant(np.stack([f.origin for f in frames]).reshape(-1, 1, 1, 3)))
    nodes = {}
    anchors = tuple(_bank_anchor_nodes(tape, bank, params, nodes, body, constants, coords)
                    for bank in BANKS)
    return featurize_nodes(tape, coords, anchors), nodes
