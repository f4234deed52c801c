# coding:utf-8
#
# test_package.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This module contains the tests for the SAP Anchor package."""
from sap_anchor import __version__ as __sver, api, core
from sap_anchor.cli import main

def test_version_matches():
    """Test that the version matches correctly."""
    assert __sver == "1.0.0"

def test_module_import():
    """Test that the API and core modules were imported."""
    assert api
    assert core

def test_entry_point():
    """Test that the console entry point exists."""
    assert callable(main)
