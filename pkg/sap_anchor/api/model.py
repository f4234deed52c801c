# coding=utf-8
#
# model.py
# SAP Anchor API - Model
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The model submodule contains the classifier trained on top of the feature streams.

The classifier is a temporal-pooling perceptron. Every frame's V×C features are flattened and
    passed through a rectified linear layer, the frame outputs are averaged over time, and the
    average goes through the remaining layers. The last layer has no rectifier and produces the
    class logits.

`FeaturePipeline` turns a batch of sequences into the fused V×C features the classifier reads.
    It concatenates the enabled streams along the channel axis in the order they are listed.
"""
import logging

import numpy as np

from ..core.autodiff import SAPTape, SAPShapeMismatchError
from ..core.errors import SAPDataError
from ..core.skeleton import NTU_LAYOUT
from .features import FeatureTensor, featurize_sequence, fixed_anchor_pairs, bone_features, \
    coordinate_features, concat_features, sequence_coords, angle_channels, COORD_CHANNELS, \
    BONE_CHANNELS, PER_FRAME
from .sap import SapParams, sap_nodes, sap_forward

_LOG = logging.getLogger(__name__)

COORDS = "coords"
BONES = "bones"
ANGLES_FIXED = "angles-fixed"
ANGLES_SAP = "angles-sap"
STREAMS = (COORDS, BONES, ANGLES_FIXED, ANGLES_SAP)


class SAPInvalidStreamsError(SAPDataError):
    """The list of feature streams is empty, repeats a stream, or names an unknown stream."""


def softmax_cross_entropy(logits, labels):
    # type: (any, any) -> float
    """Get the mean cross-entropy of an N×K logits array against N integer labels."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1))
    return float(np.mean(log_norm - shifted[np.arange(len(labels)), labels]))


class BackboneParams(object):
    """The weights of the classifier.

    Tensors are stored by name: `backbone/w1`, `backbone/b1`, and so on for every layer. Layer
        `k` maps `sizes[k-1]` inputs to `sizes[k]` outputs.

    Attributes:
        sizes (list): The input size (V·C), every hidden size, and the class count.
        tensors (dict): The weights and biases by name.
    """

    def __init__(self, tensors):
        # type: (BackboneParams, dict) -> None
        """Construct the classifier from existing tensors.

        Raises:
            error (SAPShapeMismatchError): The layer shapes do not chain or a tensor is missing.
        """
        self.tensors = dict((k, np.array(v, dtype=np.float64)) for k, v in tensors.items())
        layers = len([k for k in self.tensors if k.startswith("backbone/w")])
        if layers < 1:
            raise SAPShapeMismatchError("A classifier needs at least one layer.")
        self.sizes = [self.tensors["backbone/w1"].shape[0]]
        for layer in range(1, layers + 1):
            weight = self.tensors.get("backbone/w%d" % layer)
            bias = self.tensors.get("backbone/b%d" % layer)
            if weight is None or bias is None or weight.ndim != 2 \
                    or weight.shape[0] != self.sizes[-1] or bias.shape != weight.shape[1:]:
                raise SAPShapeMismatchError("Layer %s of the classifier does not chain." % layer)
            self.sizes.append(weight.shape[1])

    @classmethod
    def initialize(cls, input_size, hidden_sizes, classes, rng=None):
        # type: (int, list, int, numpy.random.Generator) -> BackboneParams
        """Create a classifier with uniform Glorot weights and zero biases."""
        rng = rng if rng is not None else np.random.default_rng(0)
        sizes = [input_size] + list(hidden_sizes) + [classes]
        tensors = {}
        for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), 1):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            tensors["backbone/w%d" % layer] = rng.uniform(-bound, bound, (fan_in, fan_out))
            tensors["backbone/b%d" % layer] = np.zeros(fan_out)
        return cls(tensors)

    @property
    def layers(self):
        # type: (BackboneParams) -> int
        return len(self.sizes) - 1

    @property
    def classes(self):
        # type: (BackboneParams) -> int
        return self.sizes[-1]

    def shapes(self):
        # type: (BackboneParams) -> dict
        return dict((name, value.shape) for name, value in self.tensors.items())


def backbone_forward(features, params):
    # type: (any, BackboneParams) -> numpy.ndarray
    """Compute class logits from T×V×C features (or a B×T×V×C batch).

    Raises:
        error (SAPShapeMismatchError): V·C does not match the classifier's input size.
    """
    values = features.values if isinstance(features, FeatureTensor) \
        else np.asarray(features, dtype=np.float64)
    single = values.ndim == 3
    if single:
        values = values[None]
    batch, frames = values.shape[:2]
    flat = values.reshape(batch, frames, -1)
    if flat.shape[-1] != params.sizes[0]:
        raise SAPShapeMismatchError("Features have %s inputs per frame; the classifier expects "
                                    "%s." % (flat.shape[-1], params.sizes[0]))
    hidden = flat.dot(params.tensors["backbone/w1"]) + params.tensors["backbone/b1"]
    if params.layers > 1:
        hidden = np.maximum(hidden, 0.0)
    hidden = hidden.mean(axis=1)
    for layer in range(2, params.layers + 1):
        hidden = hidden.dot(params.tensors["backbone/w%d" % layer]) \
            + params.tensors["backbone/b%d" % layer]
        if layer < params.layers:
            hidden = np.maximum(hidden, 0.0)
    return hidden[0] if single else hidden


def backbone_nodes(tape, features, params):
    # type: (SAPTape, SAPNode, BackboneParams) -> tuple
    """Record the classifier on a tape.

    Arguments:
        tape (SAPTape): The tape to record on.
        features (SAPNode): A B×T×V×C feature node.
        params (BackboneParams): The classifier; its tensor names become parameter names.

    Returns:
        result (tuple): The B×K logits node and a dictionary of the parameter nodes by name.
    """
    batch, frames = features.shape[:2]
    flat = tape.reshape(features, (batch, frames, int(np.prod(features.shape[2:]))))
    if flat.shape[-1] != params.sizes[0]:
        raise SAPShapeMismatchError("Features have %s inputs per frame; the classifier expects "
                                    "%s." % (flat.shape[-1], params.sizes[0]))
    nodes = dict((name, tape.parameter(name, value.shape))
                 for name, value in sorted(params.tensors.items()))
    hidden = tape.add(tape.matmul(flat, nodes["backbone/w1"]), nodes["backbone/b1"])
    if params.layers > 1:
        hidden = tape.relu(hidden)
    hidden = tape.mean(hidden, axis=1)
    for layer in range(2, params.layers + 1):
        hidden = tape.add(tape.matmul(hidden, nodes["backbone/w%d" % layer]),
                          nodes["backbone/b%d" % layer])
        if layer < params.layers:
            hidden = tape.relu(hidden)
    return hidden, nodes


def check_streams(streams):
    # type: (list) -> list
    """Validate a list of stream names and return it.

    Raises:
        error (SAPInvalidStreamsError): The list is empty, repeats a stream, or names an unknown
            stream.
    """
    streams = list(streams)
    if not streams or len(set(streams)) != len(streams):
        raise SAPInvalidStreamsError("Streams must be a non-empty list without repeats.")
    for stream in streams:
        if stream not in STREAMS:
            raise SAPInvalidStreamsError("Unknown stream '%s'; expected one of %s."
                                         % (stream, ", ".join(STREAMS)))
    return streams


class FeaturePipeline(object):
    """The assembly of feature streams into one fused tensor.

    Attributes:
        streams (list): The enabled streams, in fusion order.
        layout (SkeletonLayout): The skeleton layout used by the bone and fixed-anchor streams.
        fixed_anchors (list): The joint names of the fixed-anchor stream.
        fixed_pairing (str): How the fixed-anchor joints are paired.
        fixed_frame (str): Which frames the fixed anchors are read from.
    """

    def __init__(self, streams, layout=NTU_LAYOUT, fixed_anchors=None, fixed_pairing="root",
                 fixed_frame=PER_FRAME):
        # type: (FeaturePipeline, list, SkeletonLayout, list, str, str) -> None
        self.streams = check_streams(streams)
        self.layout = layout
        self.fixed_anchors = list(fixed_anchors) if fixed_anchors else None
        self.fixed_pairing = fixed_pairing
        self.fixed_frame = fixed_frame
        self._fixed_count = None
        if ANGLES_FIXED in self.streams:
            empty = np.zeros((1, len(layout), 3))
            self._fixed_count = fixed_anchor_pairs(layout, empty, self.fixed_anchors,
                                                   fixed_pairing, fixed_frame).heads

    @property
    def uses_sap(self):
        # type: (FeaturePipeline) -> bool
        return ANGLES_SAP in self.streams

    def channels(self, sap_heads=0):
        # type: (FeaturePipeline, int) -> list
        """Get the fused channel descriptors."""
        channels = []
        for stream in self.streams:
            if stream == COORDS:
                channels.extend(COORD_CHANNELS)
            elif stream == BONES:
                channels.extend(BONE_CHANNELS)
            elif stream == ANGLES_FIXED:
                channels.extend(angle_channels(self._fixed_count, "angle-fixed"))
            else:
                channels.extend(angle_channels(sap_heads))
        return channels

    def _stream(self, stream, seq, sap_params):
        if stream == COORDS:
            return coordinate_features(seq)
        if stream == BONES:
            return bone_features(seq, self.layout)
        if stream == ANGLES_FIXED:
            anchors = fixed_anchor_pairs(self.layout, seq, self.fixed_anchors, self.fixed_pairing,
                                         self.fixed_frame)
            tensor = featurize_sequence(seq, anchors)
            return FeatureTensor(tensor.values, angle_channels(anchors.heads, "angle-fixed"))
        return sap_forward(seq, sap_params, self.layout.root)

    def features(self, seq, sap_params=None):
        # type: (FeaturePipeline, SkeletonSequence, SapParams) -> FeatureTensor
        """Compute the fused features of one sequence."""
        if self.uses_sap and sap_params is None:
            raise SAPInvalidStreamsError("The angles-sap stream needs anchor proposal parameters.")
        return concat_features(*[self._stream(s, seq, sap_params) for s in self.streams])

    def nodes(self, tape, batch, sap_params=None):
        # type: (FeaturePipeline, SAPTape, any, SapParams) -> tuple
        """Record the fused features of a B×T×V×3 batch on a tape.

        Streams without parameters are computed in numpy and recorded as constants.

        Returns:
            result (tuple): The B×T×V×C feature node and the anchor proposal parameter nodes by
                name (empty when the angles-sap stream is disabled).
        """
        batch = np.asarray(batch, dtype=np.float64)
        parts, nodes = [], {}
        for stream in self.streams:
            if stream == ANGLES_SAP:
                if sap_params is None:
                    raise SAPInvalidStreamsError("The angles-sap stream needs anchor proposal "
                                                 "parameters.")
                part, nodes = sap_nodes(tape, batch, sap_params, root=self.layout.root)
            else:
                part = tape.constant(np.stack([self._stream(stream, seq, None).values
                                               for seq in batch]))
            parts.append(part)
        fused = parts[0] if len(parts) == 1 else tape.concat(parts, axis=-1)
        return fused, nodes


class SAPModel(object):
    """A feature pipeline, its anchor proposal parameters, and a classifier.

    Attributes:
        pipeline (FeaturePipeline): The feature streams.
        sap (SapParams): The anchor proposal parameters, or None if the angles-sap stream is off.
        backbone (BackboneParams): The classifier.
    """

    def __init__(self, pipeline, backbone, sap=None):
        # type: (SAPModel, FeaturePipeline, BackboneParams, SapParams) -> None
        if pipeline.uses_sap and sap is None:
            raise SAPInvalidStreamsError("The angles-sap stream needs anchor proposal parameters.")
        self.pipeline = pipeline
        self.backbone = backbone
        self.sap = sap if pipeline.uses_sap else None

    @classmethod
    def initialize(cls, pipeline, joints, classes, rng, **kwargs):
        # type: (FeaturePipeline, int, int, numpy.random.Generator, dict) -> SAPModel
        """Create a freshly initialized model.

        Arguments:
            pipeline (FeaturePipeline): The feature streams.
            joints (int): The number of joints, V.
            classes (int): The number of classes, K.
            rng (numpy.random.Generator): The random source. The anchor proposal parameters are
                drawn first, then the classifier.
            **kwargs (dict): Arbitrary keyword arguments.

        Kwargs:
            heads (int): The number of heads. Defaults to 5.
            hidden (int): The anchor proposal hidden size. Defaults to 8.
            variant (str): The placement variant. Defaults to `V3`.
            alpha (float): The softmax temperature. Defaults to 1.0.
            share_banks (bool): Whether the banks share parameters. Defaults to False.
            hidden_sizes (list): The classifier's hidden sizes. Defaults to [128, 64].
        """
        sap = None
        heads = 0
        if pipeline.uses_sap:
            sap = SapParams.initialize(kwargs.get("heads", 5), kwargs.get("hidden", 8),
                                       kwargs.get("variant", "V3"), kwargs.get("alpha", 1.0),
                                       rng, kwargs.get("share_banks", False))
            heads = sap.heads
        inputs = joints * len(pipeline.channels(heads))
        backbone = BackboneParams.initialize(inputs, kwargs.get("hidden_sizes", [128, 64]),
                                             classes, rng)
        return cls(pipeline, backbone, sap)

    @property
    def classes(self):
        # type: (SAPModel) -> int
        return self.backbone.classes

    def tensors(self):
        # type: (SAPModel) -> dict
        """Get every trainable tensor by name."""
        tensors = dict(self.backbone.tensors)
        if self.sap is not None:
            tensors.update(self.sap.tensors)
        return tensors

    def shapes(self):
        # type: (SAPModel) -> dict
        return dict((name, value.shape) for name, value in self.tensors().items())

    def with_tensors(self, tensors):
        # type: (SAPModel, dict) -> SAPModel
        """Get a copy of this model with its tensors replaced by name.

        Raises:
            error (SAPShapeMismatchError): A tensor is missing or has the wrong shape.
        """
        for name, shape in self.shapes().items():
            if name not in tensors or np.shape(tensors[name]) != shape:
                raise SAPShapeMismatchError("Tensor '%s' is missing or does not have shape %s."
                                            % (name, shape))
        backbone = BackboneParams(dict((k, tensors[k]) for k in self.backbone.tensors))
        sap = self.sap.with_tensors(tensors) if self.sap is not None else None
        return SAPModel(self.pipeline, backbone, sap)

    def build(self, batch, labels=None):
        # type: (SAPModel, any, any) -> tuple
        """Record the full model on a new tape.

        Arguments:
            batch (array-like): The B×T×V×3 joint coordinates.
            labels (array-like): The B labels. When given, a loss node is recorded.

        Returns:
            result (tuple): The tape, the logits node, the loss node (or None), and the
                parameter nodes by name.
        """
        tape = SAPTape()
        features, nodes = self.pipeline.nodes(tape, batch, self.sap)
        logits, backbone = backbone_nodes(tape, features, self.backbone)
        nodes.update(backbone)
        loss = tape.softmax_cross_entropy(logits, labels) if labels is not None else None
        return tape, logits, loss, nodes

    def logits(self, batch):
        # type: (SAPModel, any) -> numpy.ndarray
        """Compute the B×K logits of a batch of coordinates."""
        tape, logits, _, _ = self.build(batch)
        return tape.evaluate(self.tensors())[logits.id]

    def features(self, seq):
        # type: (SAPModel, SkeletonSequence) -> FeatureTensor
        """Compute the fused features of one sequence."""
        return self.pipeline.features(seq, self.sap)

    def predict(self, seq):
        # type: (SAPModel, SkeletonSequence) -> numpy.ndarray
        """Compute the class logits of one sequence without recording a tape."""
        return backbone_forward(self.features(seq), self.backbone)


def stack_sequences(sequences):
    # type: (list) -> tuple
    """Stack sequences into a B×T×V×3 array and a label array (unlabeled samples get -1).

    Raises:
        error (SAPDataError): The sequences differ in frame or joint count.
    """
    shapes = set(sequence_coords(seq).shape for seq in sequences)
    if len(shapes) > 1:
        raise SAPDataError("Sequences in a batch must share T and V; found %s."
                           % sorted(shapes))
    coords = np.stack([sequence_coords(seq) for seq in sequences])
    labels = np.array([-1 if getattr(seq, "label", None) is None else seq.label
                       for seq in sequences], dtype=np.int64)
    return coords, labels
