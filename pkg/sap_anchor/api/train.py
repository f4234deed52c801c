# coding=utf-8
#
# train.py
# SAP Anchor API - Train
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The train submodule contains the optimizer, its schedule, and the training loop.

Training uses mini-batch stochastic gradient descent with classical momentum: the velocity
    accumulates raw gradients and the learning rate is applied when the parameters move. The
    learning rate is divided by ten at every decay epoch.

The order of the samples in an epoch depends only on the seed and the epoch number, so a run
    resumed from a checkpoint replays exactly what the uninterrupted run would have done.
"""
import logging
import time
from decimal import Decimal

import numpy as np

from ..core.autodiff import SAPShapeMismatchError, SAPNonFiniteError
from ..core.checkpoint import save_checkpoint
from ..core.config import DEFAULTS
from ..core.errors import SAPDataError, SAPError, SAPNumericError
from ..core.skeleton import NTU_LAYOUT
from .features import FIXED_FRAMES
from .model import FeaturePipeline, SAPModel, check_streams, stack_sequences

_LOG = logging.getLogger(__name__)


class SAPEmptyDatasetError(SAPDataError):
    """Training was asked for on a dataset without samples."""


class SAPScheduleError(SAPError, ValueError):
    """A learning rate was asked for an epoch before the first."""


class SAPDivergenceError(SAPNumericError):
    """The training loss became non-finite.

    Attributes:
        epoch (int): The epoch in which the loss diverged.
        dump (str): The path of the checkpoint holding the last finite state, if one was written.
    """

    def __init__(self, message, epoch=None, dump=None):
        SAPNumericError.__init__(self, message)
        self.epoch = epoch
        self.dump = dump


class TrainConfig(object):
    """The settings of one reproducible training run.

    Every keyword defaults to the value in the `[train]` and `[sap]` configuration sections.

    Attributes:
        lr (float): The base learning rate.
        momentum (float): The momentum coefficient.
        decay_epochs (list): The epochs at which the learning rate is divided.
        decay_factor (float): The factor applied at every decay epoch.
        epochs (int): The number of epochs.
        batch_size (int): The mini-batch size.
        seed (int): The seed for initialization and shuffling.
        streams (list): The enabled feature streams.
        hidden_sizes (list): The classifier's hidden sizes.
        variant (str): The anchor placement variant.
        heads (int): The number of heads.
        hidden (int): The anchor proposal hidden size.
        alpha (float): The softmax temperature.
        share_banks (bool): Whether both banks share parameters.
        fixed_anchors (list): The joints of the fixed-anchor stream.
        fixed_pairing (str): How the fixed-anchor joints are paired.
        fixed_frame (str): Which frames the fixed anchors are read from.
    """

    _TRAIN_KEYS = ("lr", "momentum", "decay_epochs", "decay_factor", "epochs", "batch_size",
                   "seed", "streams", "hidden_sizes")
    _SAP_KEYS = ("variant", "heads", "hidden", "alpha", "share_banks", "fixed_anchors",
                 "fixed_pairing", "fixed_frame")

    def __init__(self, **kwargs):
        # type: (TrainConfig, dict) -> None
        for key in self._TRAIN_KEYS:
            setattr(self, key, kwargs.pop(key, DEFAULTS["train"][key]))
        for key in self._SAP_KEYS:
            setattr(self, key, kwargs.pop(key, DEFAULTS["sap"][key]))
        if kwargs:
            raise SAPDataError("Unknown training settings: %s." % ", ".join(sorted(kwargs)))
        self.decay_epochs = list(self.decay_epochs)
        self.streams = list(self.streams)
        self.hidden_sizes = list(self.hidden_sizes)
        self.validate()

    @classmethod
    def from_reader(cls, reader):
        # type: (SAPConfigReader) -> TrainConfig
        """Build the training settings from a configuration reader."""
        settings = dict(reader.train)
        settings.update(reader.sap)
        return cls(**settings)

    def validate(self):
        # type: (TrainConfig) -> None
        """Check the settings.

        A learning rate of zero is accepted and freezes every parameter.

        Raises:
            error (SAPDataError): A setting is out of range.
        """
        if self.lr < 0:
            raise SAPDataError("The learning rate must not be negative; received %s." % self.lr)
        if not 0 <= self.momentum < 1:
            raise SAPDataError("Momentum must lie in [0, 1); received %s." % self.momentum)
        if self.decay_epochs != sorted(self.decay_epochs):
            raise SAPDataError("Decay epochs must be sorted.")
        if not 0 < self.decay_factor <= 1:
            raise SAPDataError("The decay factor must lie in (0, 1].")
        if self.epochs < 0 or self.batch_size < 1:
            raise SAPDataError("Epochs must not be negative and batches must hold a sample.")
        check_streams(self.streams)
        if self.fixed_frame not in FIXED_FRAMES:
            raise SAPDataError("Fixed anchors are read per frame or from the first frame; "
                               "received '%s'." % self.fixed_frame)

    def copy(self, **overrides):
        # type: (TrainConfig, dict) -> TrainConfig
        """Get a copy of these settings with some of them replaced."""
        settings = self.as_dict()
        settings.update(overrides)
        return TrainConfig(**settings)

    def as_dict(self):
        # type: (TrainConfig) -> dict
        return dict((key, getattr(self, key)) for key in self._TRAIN_KEYS + self._SAP_KEYS)

    def schedule(self, epoch):
        # type: (TrainConfig, int) -> float
        """Get the learning rate of an epoch under these settings."""
        return lr_schedule(epoch, self.lr, self.decay_epochs, self.decay_factor)


class RunReport(object):
    """The history and final metrics of a training run.

    Attributes:
        epochs (list): One record per epoch with `epoch`, `lr`, `train_loss`, `train_accuracy`,
            and `test_accuracy` (None without a test split).
        confusion (numpy.ndarray): The K×K confusion counts of the final model on the test split
            (or the training split without one). Rows are true classes.
        test_accuracy (float): The final accuracy on the same split as `confusion`.
        wall_clock (float): The training time in seconds.
    """

    def __init__(self, epochs=None, confusion=None, test_accuracy=None, wall_clock=0.0):
        # type: (RunReport, list, any, float, float) -> None
        self.epochs = list(epochs or [])
        self.confusion = confusion
        self.test_accuracy = test_accuracy
        self.wall_clock = wall_clock

    @property
    def train_accuracy(self):
        # type: (RunReport) -> float
        """The training accuracy of the last epoch, or None before any epoch."""
        return self.epochs[-1]["train_accuracy"] if self.epochs else None

    def as_dict(self):
        # type: (RunReport) -> dict
        return {
            "epochs": self.epochs,
            "confusion": None if self.confusion is None else self.confusion.tolist(),
            "test_accuracy": self.test_accuracy,
            "wall_clock": self.wall_clock,
        }


class EvaluationResult(object):
    """The accuracy and confusion counts of a model on a dataset.

    Attributes:
        accuracy (float): The top-1 accuracy.
        confusion (numpy.ndarray): The K×K confusion counts; rows are true classes.
        predictions (numpy.ndarray): The predicted class of every sample.
    """

    def __init__(self, accuracy, confusion, predictions):
        self.accuracy = accuracy
        self.confusion = confusion
        self.predictions = predictions

    def as_dict(self):
        # type: (EvaluationResult) -> dict
        return {"accuracy": self.accuracy, "confusion": self.confusion.tolist(),
                "predictions": self.predictions.tolist()}


def sgd_momentum_step(params, grads, state, lr, momentum):
    # type: (dict, dict, dict, float, float) -> tuple
    """Apply one step of stochastic gradient descent with classical momentum.

    For every parameter, `v <- momentum * v + g` and then `p <- p - lr * v`.

    Arguments:
        params (dict): The parameters by name.
        grads (dict): The gradients by name.
        state (dict): The velocities by name. Missing velocities start at zero.
        lr (float): The learning rate.
        momentum (float): The momentum coefficient.

    Returns:
        result (tuple): The updated parameters and the updated velocities, as new dictionaries.

    Raises:
        error (SAPShapeMismatchError): A gradient or velocity does not match its parameter.
    """
    updated, velocity = {}, {}
    for name, value in params.items():
        value = np.asarray(value, dtype=np.float64)
        grad = np.asarray(grads.get(name, np.zeros(value.shape)), dtype=np.float64)
        previous = np.asarray(state.get(name, np.zeros(value.shape)), dtype=np.float64)
        if grad.shape != value.shape or previous.shape != value.shape:
            raise SAPShapeMismatchError("Gradient or velocity of '%s' does not have shape %s."
                                        % (name, value.shape))
        velocity[name] = momentum * previous + grad
        updated[name] = value - lr * velocity[name]
    return updated, velocity


def lr_schedule(epoch, base=0.05, decay_epochs=(30, 40), factor=0.1):
    # type: (int, float, list, float) -> float
    """Get the learning rate of an epoch.

    The rate is `base` multiplied by `factor` once for every decay epoch at or before `epoch`.
    The product is taken in decimal on the shortest representations of both numbers, so
    the default schedule takes exactly the values 0.05, 0.005, and 0.0005 and a rate that
    has not decayed is returned unchanged.

    Raises:
        error (SAPScheduleError): The epoch is negative.
    """
    if epoch < 0:
        raise SAPScheduleError("Epochs are counted from 0; received %s." % epoch)
    decays = len([boundary for boundary in decay_epochs if epoch >= boundary])
    return float(Decimal(repr(float(base))) * Decimal(repr(float(factor))) ** decays)


def epoch_order(seed, epoch, count):
    # type: (int, int, int) -> numpy.ndarray
    """Get the sample order of an epoch."""
    return np.random.default_rng([seed, epoch]).permutation(count)


def evaluate(model, dataset, batch_size=256):
    # type: (SAPModel, list, int) -> EvaluationResult
    """Measure a model on labeled sequences.

    Returns:
        result (EvaluationResult): The top-1 accuracy and the K×K confusion counts.
    """
    coords, labels = stack_sequences(dataset)
    if len(labels) and labels.min() < 0:
        raise SAPDataError("Evaluation needs labeled sequences.")
    predictions = []
    for start in range(0, len(labels), batch_size):
        predictions.append(np.argmax(model.logits(coords[start:start + batch_size]), axis=-1))
    predictions = np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)
    confusion = np.zeros((model.classes, model.classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    accuracy = float(np.mean(predictions == labels)) if len(labels) else 0.0
    return EvaluationResult(accuracy, confusion, predictions)


def build_model(config, joints, classes, layout=NTU_LAYOUT):
    # type: (TrainConfig, int, int, SkeletonLayout) -> SAPModel
    """Create the freshly initialized model a training run starts from."""
    pipeline = FeaturePipeline(config.streams, layout, config.fixed_anchors,
                               config.fixed_pairing, config.fixed_frame)
    return SAPModel.initialize(pipeline, joints, classes, np.random.default_rng(config.seed),
                               heads=config.heads, hidden=config.hidden, variant=config.variant,
                               alpha=config.alpha, share_banks=config.share_banks,
                               hidden_sizes=config.hidden_sizes)


def train(dataset, config, **kwargs):
    # type: (list, TrainConfig, dict) -> tuple
    """Train a model on labeled sequences.

    Arguments:
        dataset (list): The training sequences.
        config (TrainConfig): The run settings.
        **kwargs (dict): Arbitrary keyword arguments.

    Kwargs:
        test_set (list): Sequences measured after every epoch.
        classes (int): The number of classes. Defaults to one more than the largest label.
        layout (SkeletonLayout): The skeleton layout. Defaults to the NTU layout.
        resume (SAPCheckpoint): A checkpoint to continue from.
        checkpoint_path (str): Where to write a checkpoint after every epoch.
        meta (dict): Extra metadata to store in checkpoints.

    Returns:
        result (tuple): The trained `SAPModel` and its `RunReport`.

    Raises:
        error (SAPEmptyDatasetError): The dataset has no samples.
        error (SAPDivergenceError): The loss became non-finite. The last finite state is written
            next to `checkpoint_path` with a `.diverged` suffix when a path is given.
    """
    if not dataset:
        raise SAPEmptyDatasetError("Cannot train on an empty dataset.")
    coords, labels = stack_sequences(dataset)
    if labels.min() < 0:
        raise SAPDataError("Training needs labeled sequences.")
    test_set = kwargs.get("test_set") or []
    classes = int(kwargs.get("classes") or max([labels.max()] + [s.label for s in test_set]) + 1)
    checkpoint_path = kwargs.get("checkpoint_path")
    meta = dict(kwargs.get("meta") or {})
    meta.update(train=config.as_dict(), classes=classes, joints=coords.shape[2])

    model = build_model(config, coords.shape[2], classes, kwargs.get("layout", NTU_LAYOUT))
    tensors, velocity = model.tensors(), {}
    report = RunReport()
    start = 0
    resume = kwargs.get("resume")
    if resume is not None:
        model = model.with_tensors(resume.params)
        tensors, velocity = model.tensors(), dict(resume.velocity)
        report.epochs = list(resume.meta.get("history", []))
        start = resume.epoch
        _LOG.info("Resuming from epoch %s.", start)

    began = time.time()
    for epoch in range(start, config.epochs):
        lr = config.schedule(epoch)
        order = epoch_order(config.seed, epoch, len(labels))
        loss_sum, correct = 0.0, 0
        for first in range(0, len(order), config.batch_size):
            picks = order[first:first + config.batch_size]
            tape, logits, loss, nodes = model.build(coords[picks], labels[picks])
            detail = None
            try:
                values = tape.evaluate(tensors)
            except SAPNonFiniteError as error:
                values, detail = None, str(error)
            if values is None or not np.isfinite(values[loss.id]):
                dump = None
                if checkpoint_path:
                    dump = checkpoint_path + ".diverged"
                    save_checkpoint(tensors, velocity, epoch, dump,
                                    dict(meta, history=report.epochs))
                _LOG.error("Training diverged in epoch %s.", epoch)
                raise SAPDivergenceError("The loss became non-finite in epoch %s (%s)."
                                         % (epoch, detail or "non-finite loss"),
                                         epoch, dump)
            grads = tape.backward(loss, list(nodes), values)
            tensors, velocity = sgd_momentum_step(tensors, grads, velocity, lr, config.momentum)
            model = model.with_tensors(tensors)
            loss_sum += float(values[loss.id]) * len(picks)
            correct += int(np.sum(np.argmax(values[logits.id], axis=-1) == labels[picks]))

        record = {"epoch": epoch, "lr": lr, "train_loss": loss_sum / len(labels),
                  "train_accuracy": correct / float(len(labels)), "test_accuracy": None}
        if test_set:
            record["test_accuracy"] = evaluate(model, test_set).accuracy
        report.epochs.append(record)
        _LOG.info("Epoch %s: lr %s, loss %.4f, train accuracy %.3f, test accuracy %s.",
                  epoch, lr, record["train_loss"], record["train_accuracy"],
                  "n/a" if record["test_accuracy"] is None else "%.3f" % record["test_accuracy"])
        if checkpoint_path:
            save_checkpoint(tensors, velocity, epoch + 1, checkpoint_path,
                            dict(meta, history=report.epochs))

    final = evaluate(model, test_set or dataset)
    report.confusion = final.confusion
    report.test_accuracy = final.accuracy
    report.wall_clock = time.time() - began
    return model, report


def restore_model(checkpoint, layout=NTU_LAYOUT):
    # type: (SAPCheckpoint, SkeletonLayout) -> tuple
    """Rebuild a trained model from a checkpoint written by `train`.

    Returns:
        result (tuple): The `SAPModel` and the `TrainConfig` it was trained with.

    Raises:
        error (SAPDataError): The checkpoint does not carry the run settings.
    """
    meta = checkpoint.meta
    if not all(key in meta for key in ("train", "classes", "joints")):
        raise SAPDataError("The checkpoint does not record the settings of its run.")
    config = TrainConfig(**meta["train"])
    model = build_model(config, meta["joints"], meta["classes"], layout)
    return model.with_tensors(checkpoint.params), config
