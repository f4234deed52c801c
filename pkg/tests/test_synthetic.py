# coding:utf-8
#
# test_synthetic.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module tests the synthetic action task."""
import numpy as np
import pytest

from sap_anchor.core import synthetic
from sap_anchor.core.skeleton import NTU_LAYOUT


def _small_spec(**kwargs):
    settings = {"train_per_class": 3, "test_per_class": 2, "frames": 8}
    settings.update(kwargs)
    return synthetic.SyntheticTaskSpec(**settings)


def _elbow_angles(seq):
    shoulder, elbow, wrist = (NTU_LAYOUT.index(n) for n in
                              ("left_shoulder", "left_elbow", "left_wrist"))
    first = seq.coords[:, shoulder] - seq.coords[:, elbow]
    second = seq.coords[:, wrist] - seq.coords[:, elbow]
    cos = np.sum(first * second, axis=-1) / (np.linalg.norm(first, axis=-1)
                                             * np.linalg.norm(second, axis=-1))
    return np.arccos(np.clip(cos, -1.0, 1.0))


def test_split_sizes_and_order():
    """Test that the splits have the requested sizes and are ordered by class."""
    train, test = synthetic.generate_synthetic_dataset(_small_spec())
    assert len(train) == 12
    assert len(test) == 8
    assert [seq.label for seq in train] == [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]
    assert (train[0].frames, train[0].joints) == (8, 25)


def test_samples_are_reproducible():
    """Test that a sample can be regenerated on its own."""
    spec = _small_spec()
    _, test = synthetic.generate_synthetic_dataset(spec)
    assert synthetic.synthesize_sample(spec, "test", 1, 1) == test[3]


def test_training_split_is_not_augmented():
    """Test that the default training policy applies neither scale nor rotation."""
    train, _ = synthetic.generate_synthetic_dataset(_small_spec())
    assert all(seq.meta["scale"] == 1.0 and seq.meta["rotation"] == 0.0 for seq in train)


def test_test_split_augmentation_bounds():
    """Test that test samples are scaled within [0.5, 2] and turned within ±π/4."""
    _, test = synthetic.generate_synthetic_dataset(_small_spec(test_per_class=10))
    for seq in test:
        assert 0.5 <= seq.meta["scale"] <= 2.0
        assert abs(seq.meta["rotation"]) <= np.pi / 4


def test_extended_class_swings_the_elbow():
    """Test that the elbow angle of a straight-armed class is π minus a swing in [0.05, 0.65]."""
    spec = _small_spec(noise=0.0, amplitude_jitter=0.0)
    angles = _elbow_angles(synthetic.synthesize_sample(spec, "train", 0, 0))
    assert np.all(angles >= np.pi - 0.65 - 1e-9)
    assert np.all(angles <= np.pi - 0.05 + 1e-9)
    assert np.ptp(angles) > 0.1


def test_classes_differ_in_mean_bend():
    """Test that every class moves the same joints and only the mean elbow bend separates them."""
    spec = _small_spec(noise=0.0, amplitude_jitter=0.0)
    joints = [[m.joint for m in motions] for motions in spec.class_motions]
    assert all(names == joints[0] for names in joints)
    straight = _elbow_angles(synthetic.synthesize_sample(spec, "train", 0, 0))
    bent = _elbow_angles(synthetic.synthesize_sample(spec, "train", 1, 0))
    assert np.all(bent >= np.pi - 1.45 - 1e-9)
    assert np.all(bent <= np.pi - 0.85 + 1e-9)
    assert straight.min() > bent.max()


def test_augmentation_preserves_angles():
    """Test that the similarity transform leaves joint angles unchanged."""
    spec = _small_spec()
    plain = synthetic.synthesize_sample(spec, "test", 0, 4, augment=False)
    moved = synthetic.synthesize_sample(spec, "test", 0, 4)
    assert np.allclose(_elbow_angles(plain), _elbow_angles(moved))


def test_too_many_classes():
    """Test that a class count without matching motions is rejected."""
    with pytest.raises(synthetic.SAPInvalidSpecError):
        synthetic.SyntheticTaskSpec(num_classes=5)


def test_invalid_scale_range():
    """Test that a non-positive scale bound is rejected."""
    policy = synthetic.AugmentationPolicy(scale_range=(0.0, 1.0))
    with pytest.raises(synthetic.SAPInvalidSpecError):
        _small_spec(test_policy=policy)


def test_spec_as_dict():
    """Test that the task description records its counts and motions."""
    payload = _small_spec().as_dict()
    assert payload["joints"] == 25
    assert payload["class_motions"][0][0]["joint"] == "left_elbow"
