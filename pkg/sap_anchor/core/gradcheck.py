# coding=utf-8
#
# gradcheck.py
# SAP Anchor Core - Gradient Check
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the central finite-difference verifier for tape gradients.

For every checked entry of a parameter, the verifier evaluates the output at `p + h` and `p - h`
    and compares the central difference with the analytic gradient using the relative error
    `|a - b| / max(1, |a|, |b|)`.

An entry is skipped only when a rectifier or an indicator in the graph changes side between
    `p - h` and `p + h`; the function has a kink inside the step there. Every other entry is
    compared, however steep the function is. A report where some parameter had no compared
    entry at all does not pass.
"""
import logging

import numpy as np

from .autodiff import SAPNode
from .errors import SAPError

_LOG = logging.getLogger(__name__)


class SAPGradientStepError(SAPError, ValueError):
    """The finite-difference step is out of range."""


class SAPGradientEntry(object):
    """The worst comparison found for one parameter.

    Attributes:
        name (str): The parameter name.
        error (float): The worst relative error over the checked entries.
        index (tuple): The index of the worst entry.
        analytic (float): The analytic gradient at that entry.
        numeric (float): The central difference at that entry.
        checked (int): How many entries were compared.
        skipped (int): How many entries were skipped because a kink lies inside the step.
    """

    def __init__(self, name):
        # type: (SAPGradientEntry, str) -> None
        self.name = name
        self.error = 0.0
        self.index = None
        self.analytic = 0.0
        self.numeric = 0.0
        self.checked = 0
        self.skipped = 0

    def as_dict(self):
        # type: (SAPGradientEntry) -> dict
        """Get the entry as a JSON-friendly dictionary."""
        return {
            "parameter": self.name,
            "max_relative_error": self.error,
            "index": list(self.index) if self.index is not None else None,
            "analytic": self.analytic,
            "numeric": self.numeric,
            "checked": self.checked,
            "skipped": self.skipped,
        }


class SAPGradientReport(object):
    """The result of a finite-difference check.

    Attributes:
        entries (dict): A mapping from parameter name to `SAPGradientEntry`.
        tolerance (float): The relative tolerance the check was run with.
        step (float): The finite-difference step.
    """

    def __init__(self, tolerance, step):
        # type: (SAPGradientReport, float, float) -> None
        self.entries = {}
        self.tolerance = tolerance
        self.step = step

    def max_error(self):
        # type: (SAPGradientReport) -> float
        """Get the worst relative error over every parameter."""
        return max([entry.error for entry in self.entries.values()] or [0.0])

    def checked(self):
        # type: (SAPGradientReport) -> int
        """Get the number of compared entries over every parameter."""
        return sum(entry.checked for entry in self.entries.values())

    def skipped(self):
        # type: (SAPGradientReport) -> int
        """Get the number of skipped entries over every parameter."""
        return sum(entry.skipped for entry in self.entries.values())

    def passed(self):
        # type: (SAPGradientReport) -> bool
        """Determine whether every parameter had compared entries, all within the tolerance."""
        if not self.entries or any(entry.checked == 0 for entry in self.entries.values()):
            return False
        return self.max_error() <= self.tolerance

    def as_dict(self):
        # type: (SAPGradientReport) -> dict
        """Get the report as a JSON-friendly dictionary."""
        return {
            "step": self.step,
            "tolerance": self.tolerance,
            "max_relative_error": self.max_error(),
            "passed": self.passed(),
            "checked": self.checked(),
            "skipped": self.skipped(),
            "parameters": [self.entries[name].as_dict() for name in sorted(self.entries)],
        }


def relative_error(analytic, numeric):
    # type: (float, float) -> float
    """Get the relative error used by the gradient check."""
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def finite_difference_check(tape, output, params, bindings, h=1e-5, tol=1e-4, **kwargs):
    # type: (any, SAPNode, list, dict, float, float, dict) -> SAPGradientReport
    """Compare the tape's analytic gradients against central finite differences.

    Arguments:
        tape (sap_anchor.core.autodiff.SAPTape): The graph to check.
        output (SAPNode): The scalar output node.
        params (list): The parameter nodes or names to check.
        bindings (dict): Values for every parameter in the tape.
        h (float): The finite-difference step. Must lie in [1e-7, 1e-3].
        tol (float): The relative tolerance used by `SAPGradientReport.passed`.
        **kwargs (dict): Arbitrary keyword arguments.

    Kwargs:
        max_entries (int): Check at most this many randomly chosen entries per parameter.
            Defaults to checking every entry.
        seed (int): The seed used to choose entries when `max_entries` is set. Defaults to 0.

    Returns:
        report (SAPGradientReport): The worst offender per parameter.

    Raises:
        error (SAPGradientStepError): The step is outside [1e-7, 1e-3].
    """
    if not 1e-7 <= h <= 1e-3:
        raise SAPGradientStepError("Finite-difference step %s is outside [1e-7, 1e-3]." % h)

    max_entries = kwargs.get("max_entries")
    rng = np.random.default_rng(kwargs.get("seed", 0))
    names = [p.name if isinstance(p, SAPNode) else p for p in params]
    base = dict((key, np.array(value, dtype=np.float64)) for key, value in bindings.items())

    values = tape.evaluate(base)
    gradients = tape.backward(output, names, values)

    def loss_at(name, index, value):
        trial = dict(base)
        trial[name] = base[name].copy()
        trial[name][index] = value
        return tape.evaluate(trial)

    report = SAPGradientReport(tol, h)
    for name in names:
        entry = SAPGradientEntry(name)
        indices = list(np.ndindex(base[name].shape))
        if max_entries is not None and len(indices) > max_entries:
            picks = rng.choice(len(indices), size=max_entries, replace=False)
            indices = [indices[i] for i in sorted(picks)]

        for index in indices:
            original = base[name][index]
            plus_values = loss_at(name, index, original + h)
            minus_values = loss_at(name, index, original - h)
            crossed = [np.any(a != b) for a, b in zip(tape.kink_pattern(plus_values, output),
                                                      tape.kink_pattern(minus_values, output))]
            if any(crossed):
                entry.skipped += 1
                continue

            plus = float(plus_values[output.id])
            minus = float(minus_values[output.id])
            numeric = (plus - minus) / (2.0 * h)
            analytic = float(gradients[name][index])
            error = relative_error(analytic, numeric)
            entry.checked += 1
            if entry.index is None or error > entry.error:
                entry.error, entry.index = error, index
                entry.analytic, entry.numeric = analytic, numeric

        if entry.skipped:
            _LOG.debug("Skipped %s of %s entries of %s on a kink.", entry.skipped,
                       entry.skipped + entry.checked, name)
        if not entry.checked:
            _LOG.warning("No entry of %s could be compared.", name)
        report.entries[name] = entry

    tape.evaluate(base)
    return report
