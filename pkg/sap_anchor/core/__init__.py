# coding=utf-8
#
# __init__.py
# SAP Anchor Core
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The `core` module contains the low-level machinery the anchor proposal pipeline is built on.

- `autodiff` and `gradcheck` host the differentiation tape and its finite-difference verifier.
- `skeleton`, `ntu`, `synthetic`, and `dataset` host skeleton sequences, their file formats,
    and the synthetic task.
- `config`, `template`, `checkpoint`, and `manifest` host run configuration and artifacts.
"""
from .errors import SAPError, SAPDataError, SAPNumericError
from .autodiff import SAPTape, SAPNode
from .gradcheck import finite_difference_check, relative_error
from .skeleton import SkeletonSequence, SkeletonLayout, NTU_LAYOUT, apply_similarity_transform, \
    normalize_sequence, rotation_about_vertical, bounding_box_diagonal, resample_frames
from .ntu import parse_ntu_skeleton, serialize_ntu_skeleton, read_ntu_file
from .synthetic import SyntheticTaskSpec, AugmentationPolicy, Articulation, \
    generate_synthetic_dataset
from .dataset import write_dataset, read_dataset
from .config import SAPConfigReader, DEFAULTS
from .template import generate_template
from .checkpoint import save_checkpoint, load_checkpoint
from .manifest import RunManifest

__version__ = "1.0.0"
