# coding=utf-8
#
# __init__.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#

"""The `sap_anchor` package contains the skeleton anchor proposal library and its experiments.

Skeleton anchor proposal describes every joint of a skeleton sequence by the angles it forms
    with pairs of anchor points, and learns where those anchors should be with a small
    self-attention module over the joints. Angles do not change when the body is moved, turned,
    or scaled, which makes the representation robust to the size of the performer and to the
    camera placement.

The package provides a differentiation tape to train the whole pipeline, the angle, bone, and
    coordinate streams, the attention module in three placement variants, a small classifier,
    the training recipe, ablation sweeps, and the `sap-anchor` command-line tool.
"""
from sap_anchor.api import *
from sap_anchor.core import *

__version__ = "1.0.0"
