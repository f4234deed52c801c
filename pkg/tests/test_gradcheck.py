# coding:utf-8
#
# test_gradcheck.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module tests the finite-difference verifier."""
import numpy as np
import pytest

from sap_anchor.core.autodiff import SAPTape
from sap_anchor.core import gradcheck


def _quadratic():
    tape = SAPTape()
    p = tape.parameter("p", (3,))
    out = tape.sum(tape.mul(p, p))
    return tape, out, p


def test_quadratic_passes():
    """Test that a correct gradient passes the check."""
    tape, out, p = _quadratic()
    report = gradcheck.finite_difference_check(tape, out, [p], {"p": np.array([1.0, -2.0, 3.0])})
    assert report.passed()
    assert report.entries["p"].checked == 3
    assert report.max_error() < 1e-6


def test_step_out_of_range():
    """Test that a step outside [1e-7, 1e-3] is rejected."""
    tape, out, p = _quadratic()
    with pytest.raises(ValueError):
        gradcheck.finite_difference_check(tape, out, [p], {"p": np.zeros(3)}, h=1e-2)


def test_max_entries_limits_checks():
    """Test that only the requested number of entries is compared."""
    tape = SAPTape()
    p = tape.parameter("p", (10, 10))
    out = tape.sum(tape.exp(tape.scale(p, 0.1)))
    report = gradcheck.finite_difference_check(tape, out, ["p"], {"p": np.zeros((10, 10))},
                                               max_entries=5, seed=1)
    assert report.entries["p"].checked == 5


def test_kink_entries_are_skipped():
    """Test that entries sitting on the rectifier's kink are skipped, not failed."""
    tape = SAPTape()
    p = tape.parameter("p", (2,))
    out = tape.sum(tape.relu(p))
    report = gradcheck.finite_difference_check(tape, out, [p], {"p": np.array([0.0, 1.0])})
    assert report.entries["p"].skipped == 1
    assert report.passed()


def test_relative_error_floor():
    """Test that the relative error divides by at least one."""
    assert gradcheck.relative_error(1e-3, 0.0) == pytest.approx(1e-3)
    assert gradcheck.relative_error(10.0, 11.0) == pytest.approx(1.0 / 11.0)


def test_report_as_dict():
    """Test that the report serializes its parameters and verdict."""
    tape, out, p = _quadratic()
    report = gradcheck.finite_difference_check(tape, out, [p], {"p": np.ones(3)})
    payload = report.as_dict()
    assert payload["passed"] is True
    assert payload["parameters"][0]["parameter"] == "p"


def test_step_error_is_a_package_error():
    """Test that an out-of-range step raises the package's own error."""
    tape, out, p = _quadratic()
    with pytest.raises(gradcheck.SAPGradientStepError) as info:
        gradcheck.finite_difference_check(tape, out, [p], {"p": np.zeros(3)}, h=1e-2)
    assert info.value.exit_code == 1


def test_steep_smooth_entries_are_compared():
    """Test that a steep exponential is compared rather than mistaken for a kink."""
    tape = SAPTape()
    q = tape.parameter("q", (1,))
    out = tape.sum(tape.exp(tape.scale(q, 50.0)))
    report = gradcheck.finite_difference_check(tape, out, [q], {"q": np.zeros(1)})
    assert report.entries["q"].checked == 1
    assert report.entries["q"].skipped == 0
    assert report.passed()


def test_large_curvature_is_compared():
    """Test that a strongly curved quadratic has every entry compared."""
    tape = SAPTape()
    p = tape.parameter("p", (3,))
    out = tape.scale(tape.sum(tape.mul(p, p)), 1000.0)
    report = gradcheck.finite_difference_check(tape, out, [p], {"p": np.array([0.5, -1.0, 2.0])})
    assert report.entries["p"].checked == 3
    assert report.entries["p"].skipped == 0
    assert report.passed()


def test_nothing_compared_does_not_pass():
    """Test that a parameter whose every entry sits on a kink fails the check."""
    tape = SAPTape()
    p = tape.parameter("p", (2,))
    out = tape.sum(tape.relu(p))
    report = gradcheck.finite_difference_check(tape, out, [p], {"p": np.zeros(2)})
    assert report.entries["p"].checked == 0
    assert report.entries["p"].skipped == 2
    assert not report.passed()
    assert report.as_dict()["passed"] is False


def test_indicator_flip_is_skipped():
    """Test that an indicator changing side inside the step is skipped."""
    tape = SAPTape()
    p = tape.parameter("p", (2,))
    out = tape.sum(tape.mul(tape.step(p, 0.5), p))
    report = gradcheck.finite_difference_check(tape, out, [p], {"p": np.array([0.5, 2.0])})
    assert report.entries["p"].skipped == 1
    assert report.entries["p"].checked == 1
    assert report.passed()


def test_report_counts():
    """Test that the report totals its compared and skipped entries."""
    tape = SAPTape()
    p = tape.parameter("p", (3,))
    out = tape.sum(tape.relu(p))
    report = gradcheck.finite_difference_check(tape, out, [p], {"p": np.array([0.0, 1.0, 2.0])})
    payload = report.as_dict()
    assert payload["checked"] == 2
    assert payload["skipped"] == 1
