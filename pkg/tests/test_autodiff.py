# coding:utf-8
#
# test_autodiff.py
# SAP Anchor
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This test module tests the differentiable tape."""
import math

import numpy as np
import pytest

from sap_anchor.core import autodiff
from sap_anchor.core.errors import SAPDataError
from sap_anchor.core.gradcheck import finite_difference_check


def test_dot_of_constants():
    """Test that the inner product of two constant vectors evaluates to 32."""
    tape = autodiff.SAPTape()
    out = tape.dot(tape.constant([1, 2, 3]), tape.constant([4, 5, 6]))
    assert tape.evaluate()[out.id] == 32.0


def test_exp_of_zero():
    """Test that exp(0) evaluates to 1."""
    tape = autodiff.SAPTape()
    out = tape.exp(tape.constant(0.0))
    assert tape.evaluate()[out.id] == 1.0


def test_square_gradient():
    """Test that the derivative of p * p at 3 is 6."""
    tape = autodiff.SAPTape()
    p = tape.parameter("p", ())
    out = tape.mul(p, p)
    grads = tape.backward(out, [p], tape.evaluate({"p": 3.0}))
    assert grads["p"] == pytest.approx(6.0)


def test_uniform_cross_entropy():
    """Test that uniform logits over k classes have a cross-entropy of ln k."""
    tape = autodiff.SAPTape()
    logits = tape.constant(np.zeros((3, 4)))
    loss = tape.softmax_cross_entropy(logits, [0, 1, 3])
    assert tape.evaluate()[loss.id] == pytest.approx(math.log(4))


def test_softmax_values():
    """Test that the softmax of (ln 2, 0) is (2/3, 1/3)."""
    tape = autodiff.SAPTape()
    out = tape.softmax(tape.constant([math.log(2.0), 0.0]))
    assert np.allclose(tape.evaluate()[out.id], [2.0 / 3.0, 1.0 / 3.0])


def test_unbound_parameter():
    """Test that evaluating without binding a parameter fails."""
    tape = autodiff.SAPTape()
    tape.exp(tape.parameter("p", (2,)))
    with pytest.raises(autodiff.SAPUnboundInputError):
        tape.evaluate()


def test_binding_shape_mismatch():
    """Test that a binding with the wrong shape is rejected."""
    tape = autodiff.SAPTape()
    tape.exp(tape.parameter("p", (2,)))
    with pytest.raises(autodiff.SAPShapeMismatchError):
        tape.evaluate({"p": np.zeros(3)})


def test_matmul_shape_mismatch():
    """Test that incompatible matrix shapes are rejected when recorded."""
    tape = autodiff.SAPTape()
    with pytest.raises(autodiff.SAPShapeMismatchError):
        tape.matmul(tape.constant(np.zeros((2, 3))), tape.constant(np.zeros((2, 3))))


def test_non_finite_log():
    """Test that the log of zero is reported as a numeric failure."""
    tape = autodiff.SAPTape()
    tape.log(tape.constant(0.0))
    with pytest.raises(autodiff.SAPNonFiniteError):
        tape.evaluate()


def test_non_scalar_backward():
    """Test that only scalar outputs can be differentiated."""
    tape = autodiff.SAPTape()
    p = tape.parameter("p", (2,))
    out = tape.exp(p)
    with pytest.raises(autodiff.SAPNonScalarOutputError):
        tape.backward(out, [p], tape.evaluate({"p": np.zeros(2)}))


def test_unused_parameter_gets_zeros():
    """Test that a parameter the output ignores gets a zero gradient."""
    tape = autodiff.SAPTape()
    p = tape.parameter("p", (2,))
    q = tape.parameter("q", (3,))
    out = tape.sum(tape.exp(p))
    grads = tape.backward(out, [p, q], tape.evaluate({"p": np.zeros(2), "q": np.ones(3)}))
    assert np.array_equal(grads["q"], np.zeros(3))
    assert np.allclose(grads["p"], np.ones(2))


def test_step_blocks_gradient():
    """Test that the indicator primitive passes no gradient."""
    tape = autodiff.SAPTape()
    p = tape.parameter("p", (3,))
    out = tape.sum(tape.step(p, 0.5))
    values = tape.evaluate({"p": np.array([0.0, 1.0, 2.0])})
    assert values[out.id] == 2.0
    assert np.array_equal(tape.backward(out, [p], values)["p"], np.zeros(3))


def test_broadcast_gradient_is_reduced():
    """Test that gradients through a broadcast sum are folded back to the operand's shape."""
    tape = autodiff.SAPTape()
    p = tape.parameter("p", (1, 3))
    out = tape.sum(tape.add(p, tape.constant(np.ones((4, 3)))))
    grads = tape.backward(out, [p], tape.evaluate({"p": np.zeros((1, 3))}))
    assert np.allclose(grads["p"], np.full((1, 3), 4.0))


def test_composite_graph_gradients():
    """Test a graph using most primitives against finite differences."""
    rng = np.random.default_rng(3)
    tape = autodiff.SAPTape()
    a = tape.parameter("a", (2, 3, 4))
    b = tape.parameter("b", (4, 2))
    mixed = tape.matmul(a, b)
    joined = tape.concat([mixed, tape.gather(a, [0, 2], axis=2)], axis=1)
    rows = tape.softmax(tape.scale(tape.transpose(joined), 0.5))
    lengths = tape.norm(tape.add(tape.reshape(tape.exp(mixed), (2, 6)), tape.constant(1.0)))
    tail = tape.log(tape.add(tape.mean(rows, axis=1), tape.constant(1.0)))
    out = tape.add(tape.sum(tail), tape.sum(tape.div(lengths, tape.constant([2.0, 3.0]))))
    out = tape.sub(out, tape.dot(tape.reshape(b, (8,)), tape.reshape(b, (8,))))
    bindings = {"a": rng.normal(size=(2, 3, 4)) * 0.5, "b": rng.normal(size=(4, 2)) * 0.5}
    report = finite_difference_check(tape, out, [a, b], bindings)
    assert report.passed()


def test_relu_gradient():
    """Test that the rectifier passes gradient only where its input is positive."""
    tape = autodiff.SAPTape()
    p = tape.parameter("p", (2,))
    out = tape.sum(tape.relu(p))
    grads = tape.backward(out, ["p"], tape.evaluate({"p": np.array([-1.0, 2.0])}))
    assert np.array_equal(grads["p"], [0.0, 1.0])


def test_module_level_backward():
    """Test the module-level helpers evaluate and differentiate a tape."""
    tape = autodiff.SAPTape()
    p = tape.parameter("p", ())
    out = tape.mul(p, tape.constant(5.0))
    assert autodiff.evaluate(tape, {"p": 2.0})[out.id] == 10.0
    assert autodiff.backward(tape, out, ["p"], {"p": 2.0})["p"] == pytest.approx(5.0)


def test_shape_mismatch_is_a_data_error():
    """Test that shape errors carry the data error exit status."""
    tape = autodiff.SAPTape()
    with pytest.raises(SAPDataError) as info:
        tape.matmul(tape.constant(np.zeros((2, 3))), tape.constant(np.zeros((2, 3))))
    assert info.value.exit_code == 2


def _pair(tape, rng, shape=(2, 3), low=None):
    draw = (lambda: rng.uniform(low, 2.0, shape)) if low is not None \
        else (lambda: rng.normal(size=shape))
    return tape.parameter("a", shape), tape.parameter("b", shape), {"a": draw(), "b": draw()}


def _unary(op, low=None):
    def build(tape, rng):
        value = rng.uniform(low, 2.0, (2, 3)) if low is not None else rng.normal(size=(2, 3))
        return op(tape, tape.parameter("a", (2, 3))), {"a": value}
    return build


def _binary(op, low=None):
    def build(tape, rng):
        a, b, bindings = _pair(tape, rng, low=low)
        return op(tape, a, b), bindings
    return build


def _build_matmul(tape, rng):
    a, b = tape.parameter("a", (2, 1, 3, 4)), tape.parameter("b", (5, 4, 2))
    return tape.matmul(a, b), {"a": rng.normal(size=(2, 1, 3, 4)),
                               "b": rng.normal(size=(5, 4, 2))}


def _build_cross_entropy(tape, rng):
    a = tape.parameter("a", (4, 3))
    return tape.softmax_cross_entropy(a, [0, 2, 1, 2]), {"a": rng.normal(size=(4, 3))}


PRIMITIVES = {
    "add": _binary(lambda t, a, b: t.add(a, b)),
    "sub": _binary(lambda t, a, b: t.sub(a, b)),
    "mul": _binary(lambda t, a, b: t.mul(a, b)),
    "div": _binary(lambda t, a, b: t.div(a, b), low=0.5),
    "dot": _binary(lambda t, a, b: t.dot(a, b)),
    "concat": _binary(lambda t, a, b: t.concat([a, b], axis=0)),
    "matmul": _build_matmul,
    "exp": _unary(lambda t, a: t.exp(a)),
    "log": _unary(lambda t, a: t.log(a), low=0.5),
    "relu": _unary(lambda t, a: t.relu(a)),
    "scale": _unary(lambda t, a: t.scale(a, -2.5)),
    "sum": _unary(lambda t, a: t.sum(a, axis=1)),
    "mean": _unary(lambda t, a: t.mean(a, axis=0, keepdims=True)),
    "norm": _unary(lambda t, a: t.norm(a)),
    "gather": _unary(lambda t, a: t.gather(a, [2, 0, 2], axis=1)),
    "reshape": _unary(lambda t, a: t.reshape(a, (3, 2))),
    "transpose": _unary(lambda t, a: t.transpose(a)),
    "softmax": _unary(lambda t, a: t.softmax(a)),
    "softmax_cross_entropy": _build_cross_entropy,
}


@pytest.mark.parametrize("primitive", sorted(PRIMITIVES))
def test_primitive_gradients(primitive):
    """Test every differentiable primitive against central differences on seeded inputs."""
    for seed in range(100):
        rng = np.random.default_rng(seed)
        tape = autodiff.SAPTape()
        node, bindings = PRIMITIVES[primitive](tape, rng)
        weights = tape.constant(rng.normal(size=node.shape))
        out = tape.sum(tape.mul(node, weights))
        report = finite_difference_check(tape, out, sorted(bindings), bindings)
        assert report.passed(), "%s failed for seed %s" % (primitive, seed)
        assert report.checked() > 0


def test_kink_pattern_reports_rectifiers_and_indicators():
    """Test that the kink pattern lists the active side of relu and step nodes."""
    tape = autodiff.SAPTape()
    p = tape.parameter("p", (3,))
    tape.relu(p)
    tape.step(p, 1.5)
    pattern = tape.kink_pattern(tape.evaluate({"p": np.array([-1.0, 1.0, 2.0])}))
    assert [mask.tolist() for mask in pattern] == [[False, True, True], [False, False, True]]
