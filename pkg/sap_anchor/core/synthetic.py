# coding=utf-8
#
# synthetic.py
# SAP Anchor Core - Synthetic
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the synthetic action dataset used in place of the full NTU corpus.

Every class is defined by a set of articulations: a joint of the 25-joint layout whose subtree
    swings about a fixed axis, following `base + amplitude * sin(2π f t / T + phase)`. The rest
    pose has straight limbs, so the angle formed by the articulated joint, its parent and its
    child is exactly `π` minus the swing angle. Classes therefore differ only in the relative
    angular motion of their joint triplets. In the default task every class moves the same
    limbs and only the mean bend differs, so where a hand or a foot ends up in space depends on
    the size of the subject as much as on the class.

Each split has its own augmentation policy. By default the training split is left as generated
    and the test split is scaled by a uniform factor and turned about the vertical axis, so
    features that only depend on angles carry over from training to testing while raw
    coordinates do not.

Samples are generated from seeds derived from `(seed, split, label, index)`, so any sample can
    be regenerated on its own and samples can be produced in any order.
"""
import logging

import numpy as np

from .errors import SAPDataError
from .skeleton import SkeletonSequence, NTU_LAYOUT, apply_similarity_transform, \
    rotation_about_axis, rotation_about_vertical

_LOG = logging.getLogger(__name__)

SPLITS = {"train": 0, "test": 1}

# Rest pose for the NTU layout, in meters, y up, root at the origin.
NTU_REST_POSE = np.array([
    [0.00, 0.00, 0.00], [0.00, 0.25, 0.00], [0.00, 0.55, 0.00], [0.00, 0.70, 0.00],
    [0.18, 0.45, 0.00], [0.45, 0.45, 0.00], [0.70, 0.45, 0.00], [0.78, 0.45, 0.00],
    [-0.18, 0.45, 0.00], [-0.45, 0.45, 0.00], [-0.70, 0.45, 0.00], [-0.78, 0.45, 0.00],
    [0.10, -0.02, 0.00], [0.10, -0.45, 0.00], [0.10, -0.85, 0.00], [0.10, -0.85, 0.10],
    [-0.10, -0.02, 0.00], [-0.10, -0.45, 0.00], [-0.10, -0.85, 0.00], [-0.10, -0.85, 0.10],
    [0.00, 0.45, 0.00], [0.86, 0.45, 0.00], [0.78, 0.49, 0.03], [-0.86, 0.45, 0.00],
    [-0.78, 0.49, 0.03],
])


class SAPInvalidSpecError(SAPDataError):
    """The synthetic task specification cannot produce a dataset."""


class Articulation(object):
    """A joint whose subtree swings about a fixed axis.

    Attributes:
        joint (str): The articulated joint.
        axis (tuple): The swing axis.
        base (float): The mean swing angle, in radians.
        amplitude (float): The swing amplitude, in radians.
        frequency (float): Full swings over the length of the sequence.
        phase (float): A phase offset added to the per-sample phase.
    """

    def __init__(self, joint, axis, base=0.6, amplitude=0.5, frequency=1.0, phase=0.0):
        # type: (Articulation, str, tuple, float, float, float, float) -> None
        self.joint = joint
        self.axis = tuple(float(a) for a in axis)
        self.base = float(base)
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.phase = float(phase)

    def as_dict(self):
        # type: (Articulation) -> dict
        """Get the articulation as a dictionary."""
        return {"joint": self.joint, "axis": list(self.axis), "base": self.base,
                "amplitude": self.amplitude, "frequency": self.frequency, "phase": self.phase}


class AugmentationPolicy(object):
    """The random similarity transform applied to the samples of one split.

    Attributes:
        rotation (bool): Whether to turn samples about the vertical axis.
        max_rotation (float): The largest turn, in radians; angles are drawn uniformly from
            `[-max_rotation, max_rotation]`.
        scale_range (tuple): The bounds of the uniform scale factor.
        translation (float): Offsets are drawn uniformly from `[-translation, translation]` per
            axis.
    """

    def __init__(self, rotation=False, max_rotation=0.0, scale_range=(1.0, 1.0), translation=0.0):
        # type: (AugmentationPolicy, bool, float, tuple, float) -> None
        self.rotation = bool(rotation)
        self.max_rotation = float(max_rotation)
        self.scale_range = (float(scale_range[0]), float(scale_range[1]))
        self.translation = float(translation)

    def as_dict(self):
        # type: (AugmentationPolicy) -> dict
        """Get the policy as a dictionary."""
        return {"rotation": self.rotation, "max_rotation": self.max_rotation,
                "scale_range": list(self.scale_range), "translation": self.translation}


# Mean flexion of a bent and a nearly straight limb, and the swing around it, in radians.
FLEXED = 1.15
EXTENDED = 0.35
SWING = 0.3


def _limbs(elbows, knees):
    return [Articulation("left_elbow", (0.0, 0.0, 1.0), elbows, SWING),
            Articulation("right_elbow", (0.0, 0.0, -1.0), elbows, SWING),
            Articulation("left_knee", (1.0, 0.0, 0.0), knees, SWING),
            Articulation("right_knee", (1.0, 0.0, 0.0), knees, SWING, phase=np.pi)]


def default_class_motions():
    # type: () -> list
    """Get the articulations of the default four-class task.

    Every class swings both elbows and both knees (the knees in alternation); the classes only
        differ in how far each pair of limbs is bent on average:

    - 0: elbows and knees nearly straight.
    - 1: elbows bent, knees nearly straight.
    - 2: elbows nearly straight, knees bent.
    - 3: elbows and knees bent.
    """
    return [_limbs(EXTENDED, EXTENDED), _limbs(FLEXED, EXTENDED), _limbs(EXTENDED, FLEXED),
            _limbs(FLEXED, FLEXED)]


class SyntheticTaskSpec(object):
    """The description of a synthetic classification task.

    Attributes:
        num_classes (int): The number of classes.
        train_per_class (int): Training samples per class.
        test_per_class (int): Test samples per class.
        frames (int): Frames per sample, T.
        layout (sap_anchor.core.skeleton.SkeletonLayout): The joint layout.
        rest_pose (numpy.ndarray): The V×3 rest pose.
        class_motions (list): One list of `Articulation` per class.
        amplitude_jitter (float): Relative per-sample jitter of every amplitude.
        noise (float): The standard deviation of per-coordinate Gaussian noise.
        train_policy (AugmentationPolicy): The augmentation of the training split.
        test_policy (AugmentationPolicy): The augmentation of the test split.
        seed (int): The dataset seed.
    """

    def __init__(self, **kwargs):
        # type: (SyntheticTaskSpec, dict) -> None
        """Construct the task specification.

        Arguments:
            **kwargs (dict): Any of the attributes above. Unspecified attributes take the
                defaults of the four-class scale-augmented task.

        Raises:
            error (SAPInvalidSpecError): A count is not positive, a scale bound is not
                positive, or the class motions do not match the number of classes.
        """
        self.num_classes = int(kwargs.get("num_classes", 4))
        self.train_per_class = int(kwargs.get("train_per_class", 200))
        self.test_per_class = int(kwargs.get("test_per_class", 100))
        self.frames = int(kwargs.get("frames", 20))
        self.layout = kwargs.get("layout", NTU_LAYOUT)
        self.rest_pose = np.asarray(kwargs.get("rest_pose", NTU_REST_POSE), dtype=np.float64)
        self.class_motions = kwargs.get("class_motions") or \
            default_class_motions()[:self.num_classes]
        self.amplitude_jitter = float(kwargs.get("amplitude_jitter", 0.1))
        self.noise = float(kwargs.get("noise", 0.01))
        self.train_policy = kwargs.get("train_policy", AugmentationPolicy())
        self.test_policy = kwargs.get("test_policy", AugmentationPolicy(
            rotation=True, max_rotation=np.pi / 4, scale_range=(0.5, 2.0)))
        self.seed = int(kwargs.get("seed", 42))
        self.validate()

    def validate(self):
        # type: (SyntheticTaskSpec) -> None
        """Check that the specification can produce a dataset."""
        for name in ("num_classes", "frames"):
            if getattr(self, name) <= 0:
                raise SAPInvalidSpecError("'%s' must be positive." % name)
        if self.train_per_class < 0 or self.test_per_class < 0 \
                or self.train_per_class + self.test_per_class == 0:
            raise SAPInvalidSpecError("At least one sample per class is required.")
        if self.noise < 0 or self.amplitude_jitter < 0:
            raise SAPInvalidSpecError("Noise and jitter must not be negative.")
        if len(self.class_motions) != self.num_classes:
            raise SAPInvalidSpecError("Expected motions for %s classes but received %s."
                                      % (self.num_classes, len(self.class_motions)))
        if self.rest_pose.shape != (len(self.layout), 3):
            raise SAPInvalidSpecError("Rest pose does not match the %s-joint layout."
                                      % len(self.layout))
        for policy in (self.train_policy, self.test_policy):
            low, high = policy.scale_range
            if not 0 < low <= high:
                raise SAPInvalidSpecError("Scale range %s must be positive and ordered."
                                          % (policy.scale_range,))
        for motions in self.class_motions:
            for motion in motions:
                self.layout.index(motion.joint)

    def as_dict(self):
        # type: (SyntheticTaskSpec) -> dict
        """Get the specification as a JSON-friendly dictionary."""
        return {
            "num_classes": self.num_classes, "train_per_class": self.train_per_class,
            "test_per_class": self.test_per_class, "frames": self.frames,
            "joints": len(self.layout), "amplitude_jitter": self.amplitude_jitter,
            "noise": self.noise, "seed": self.seed,
            "class_motions": [[m.as_dict() for m in ms] for ms in self.class_motions],
            "train_policy": self.train_policy.as_dict(),
            "test_policy": self.test_policy.as_dict(),
        }


def _articulate(spec, motions, rng):
    """Pose the rest skeleton over T frames for one sample of a class."""
    layout, frames = spec.layout, spec.frames
    sample_phase = rng.uniform(0.0, 2.0 * np.pi)
    jitters = [1.0 + rng.uniform(-spec.amplitude_jitter, spec.amplitude_jitter)
               for _ in motions]

    # Distal joints first, so each swing happens about the joint's rest position.
    ordered = sorted(zip(motions, jitters),
                     key=lambda item: -layout.depth(layout.index(item[0].joint)))
    coords = np.repeat(spec.rest_pose[None], frames, axis=0)
    time = np.arange(frames) / float(frames)
    for motion, jitter in ordered:
        joint = layout.index(motion.joint)
        subtree = layout.descendants(joint)
        angles = motion.base + motion.amplitude * jitter * np.sin(
            2.0 * np.pi * motion.frequency * time + sample_phase + motion.phase)
        for t in range(frames):
            pivot = spec.rest_pose[joint]
            turn = rotation_about_axis(motion.axis, angles[t])
            coords[t, subtree] = (coords[t, subtree] - pivot).dot(turn.T) + pivot
    return coords


def synthesize_sample(spec, split, label, index, augment=True):
    # type: (SyntheticTaskSpec, str, int, int, bool) -> SkeletonSequence
    """Generate one sample of the synthetic task.

    Arguments:
        spec (SyntheticTaskSpec): The task.
        split (str): `"train"` or `"test"`.
        label (int): The class of the sample.
        index (int): The index of the sample within its class and split.
        augment (bool): Whether to apply the split's augmentation policy. Defaults to True.

    Returns:
        seq (SkeletonSequence): The sample. Its metadata records the scale and rotation that
            were applied.
    """
    split_id = SPLITS[split]
    motion_rng = np.random.default_rng([spec.seed, split_id, label, index, 0])
    augment_rng = np.random.default_rng([spec.seed, split_id, label, index, 1])

    coords = _articulate(spec, spec.class_motions[label], motion_rng)
    if spec.noise > 0:
        coords = coords + motion_rng.normal(0.0, spec.noise, size=coords.shape)
    meta = {"source": "synthetic", "split": split, "index": index, "scale": 1.0, "rotation": 0.0}
    seq = SkeletonSequence(coords, label, meta)
    if not augment:
        return seq

    policy = spec.train_policy if split == "train" else spec.test_policy
    scale = augment_rng.uniform(*policy.scale_range)
    angle = augment_rng.uniform(-policy.max_rotation, policy.max_rotation) \
        if policy.rotation else 0.0
    offset = augment_rng.uniform(-policy.translation, policy.translation, size=3)
    seq = apply_similarity_transform(seq, rotation_about_vertical(angle), offset, scale)
    seq.meta.update({"scale": scale, "rotation": angle})
    return seq


def generate_synthetic_dataset(spec):
    # type: (SyntheticTaskSpec) -> tuple[list, list]
    """Generate the training and test splits of a synthetic task.

    Samples are ordered class-major: every sample of class 0, then class 1, and so on.

    Returns:
        splits (tuple): The training and test lists of `SkeletonSequence`.
    """
    spec.validate()
    train = [synthesize_sample(spec, "train", label, index)
             for label in range(spec.num_classes) for index in range(spec.train_per_class)]
    test = [synthesize_sample(spec, "test", label, index)
            for label in range(spec.num_classes) for index in range(spec.test_per_class)]
    _LOG.info("Generated %s training and %s test samples over %s classes.",
              len(train), len(test), spec.num_classes)
    return train, test
