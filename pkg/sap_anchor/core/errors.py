# coding=utf-8
#
# errors.py
# SAP Anchor Core - Errors
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the base exception classes shared by every part of the package.

Individual modules define their own, more specific exceptions next to the code that raises them;
    every one of those derives from one of the classes below so that the command-line interface
    can translate a failure into an exit code without knowing where it came from.
"""


class SAPError(Exception):
    """Base class for all errors raised by the package."""
    exit_code = 1


class SAPDataError(SAPError):
    """Input data, configuration, or an artifact on disk could not be used."""
    exit_code = 2


class SAPNumericError(SAPError):
    """A numeric computation produced an unusable result."""
    exit_code = 3
