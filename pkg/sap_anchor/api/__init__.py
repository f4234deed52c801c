# coding=utf-8
#
# __init__.py
# SAP Anchor API
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The `api` module contains the anchor proposal pipeline and the experiments built on it.

The `api` module comes with a few submodules that cover each stage of a run:

- `features` hosts the triplet angle representation and the bone and coordinate baselines.
- `sap` hosts the skeleton anchor proposal module and its three placement variants.
- `model` hosts the feature pipeline and the classifier.
- `train` hosts the optimizer, the learning-rate schedule, training, and evaluation.
- `ablation` hosts the head-count, anchor-location, and stream sweeps.
- `info` hosts the assembly of a run's configuration and data.
"""
from .features import AnchorPairSet, FeatureTensor, angle_feature, featurize_sequence, \
    fixed_anchor_pairs, bone_features, coordinate_features, concat_features, export_features
from .sap import SapParams, AnchorWeights, temporal_mean, similarity_logits, anchor_weights, \
    propose_anchor, propose_anchor_pairs, sap_forward, export_anchors
from .model import BackboneParams, FeaturePipeline, SAPModel, backbone_forward
from .train import TrainConfig, RunReport, sgd_momentum_step, lr_schedule, evaluate
from .ablation import run_ablation, summarize_trends
from .info import get_run_information

__version__ = "1.0.0"
