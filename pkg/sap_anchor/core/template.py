# coding=utf-8
#
# template.py
# SAP Anchor Core - Template
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The template module contains the utilities to create a commented run configuration file.

The template lists every key with its default value, so it can be edited in place and passed
    back to any subcommand with `--config`.
"""
from .config import DEFAULTS


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"%s"' % value
    if isinstance(value, list):
        return "[%s]" % ", ".join(_toml_value(v) for v in value)
    return repr(value)


def generate_template(filepath, seed=None):
    # type: (str, int) -> None
    """Generate a run configuration file with every default written out.

    Arguments:
        filepath (str): The path to where the configuration file will be written.
        seed (int): A seed to write into both the `[data]` and `[train]` sections. Defaults to
            the built-in seed.
    """
    data = dict(DEFAULTS["data"])
    sap = dict(DEFAULTS["sap"])
    train = dict(DEFAULTS["train"])
    if seed is not None:
        data["seed"] = train["seed"] = int(seed)
    values = dict(("%s_%s" % (section, key), _toml_value(value))
                  for section, keys in (("data", data), ("sap", sap), ("train", train))
                  for key, value in keys.items())

    template = """#
# Run configuration for the skeleton-anchor proposal experiments.
#
# Every key below is optional; removing a key restores its default. Any key can also be
# replaced from the command line with `--set section.key=value`.
#

[data]
# "synthetic" generates the scale-augmented task; "sapds" reads train_path and test_path.
source = %(data_source)s
train_path = %(data_train_path)s
test_path = %(data_test_path)s
num_classes = %(data_num_classes)s
train_per_class = %(data_train_per_class)s
test_per_class = %(data_test_per_class)s
frames = %(data_frames)s
noise = %(data_noise)s
amplitude_jitter = %(data_amplitude_jitter)s
seed = %(data_seed)s
# Augmentation of each split: turns about the vertical axis (radians), uniform scale, offsets.
train_rotation = %(data_train_rotation)s
train_max_rotation = %(data_train_max_rotation)s
train_scale = %(data_train_scale)s
train_translation = %(data_train_translation)s
test_rotation = %(data_test_rotation)s
test_max_rotation = %(data_test_max_rotation)s
test_scale = %(data_test_scale)s
test_translation = %(data_test_translation)s
# Sequences read from .skeleton files with fewer frames are rejected.
min_frames = %(data_min_frames)s

[sap]
# V1: per-frame anchors within the body; V2: anchors from the first frame; V3: around the body.
variant = %(sap_variant)s
heads = %(sap_heads)s
hidden = %(sap_hidden)s
# Softmax temperature. Large values (e.g. 20) push anchors onto single joints.
alpha = %(sap_alpha)s
share_banks = %(sap_share_banks)s
# Joints used by the angles-fixed stream.
fixed_anchors = %(sap_fixed_anchors)s
# "root" pairs each fixed joint with the root joint; "consecutive" pairs the names two by two.
fixed_pairing = %(sap_fixed_pairing)s
# "per-frame" reads the fixed joints in every frame; "first" keeps their first-frame positions.
fixed_frame = %(sap_fixed_frame)s

[train]
lr = %(train_lr)s
momentum = %(train_momentum)s
decay_epochs = %(train_decay_epochs)s
decay_factor = %(train_decay_factor)s
epochs = %(train_epochs)s
batch_size = %(train_batch_size)s
seed = %(train_seed)s
# Any of "coords", "bones", "angles-fixed", "angles-sap".
streams = %(train_streams)s
hidden_sizes = %(train_hidden_sizes)s
""" % values
    with open(filepath, "w+") as file_obj:
        file_obj.write(template)
