# coding=utf-8
#
# autodiff.py
# SAP Anchor Core - Autodiff
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""This submodule contains the reverse-mode differentiation tape used to train the anchor
proposal pipeline.

## Implementation

A graph is recorded as an instruction list (a Wengert list). Building a graph with `SAPTape`
    appends one `SAPNode` per primitive; because nodes can only refer to nodes that already
    exist, the list is always in topological order. `SAPTape.evaluate` replays the list against
    a set of bindings and `SAPTape.backward` walks it in reverse, accumulating adjoints.

The tape never caches anything between evaluations other than the last values it computed, so
    the same graph can be replayed with perturbed parameter values (which is what
    `sap_anchor.core.gradcheck` does).

### Primitives
- `constant`, `parameter`: leaves. Constants carry their value; parameters must be bound.
- `add`, `sub`, `mul`, `div`: elementwise, with numpy broadcasting of the operands.
- `matmul`: batched matrix product over the last two axes.
- `exp`, `log`, `relu`, `scale`: elementwise unary operations.
- `sum`, `mean`: reduction over one axis (or all axes).
- `dot`, `norm`: inner product and Euclidean norm over the last axis.
- `concat`: concatenation along an axis.
- `gather`: selection of indices along an axis.
- `reshape`, `transpose`: layout changes (`transpose` swaps the last two axes).
- `step`: indicator `x >= threshold`; it has a zero gradient.
- `softmax`: normalized exponential over the last axis.
- `softmax_cross_entropy`: mean cross-entropy of a logits matrix against integer labels.
"""
import logging

import numpy as np

from .errors import SAPDataError, SAPNumericError, SAPError

_LOG = logging.getLogger(__name__)


class SAPShapeMismatchError(SAPDataError):
    """Operand shapes are not compatible with the requested primitive."""

    def __init__(self, message, node_id=None):
        SAPDataError.__init__(self, message)
        self.node_id = node_id


class SAPUnboundInputError(SAPDataError):
    """A parameter was not given a value before evaluation."""


class SAPNonFiniteError(SAPNumericError):
    """A node evaluated to a value containing NaN or infinity."""

    def __init__(self, message, node_id=None):
        SAPNumericError.__init__(self, message)
        self.node_id = node_id


class SAPNonScalarOutputError(SAPError):
    """Gradients were requested for an output that is not a scalar."""


class SAPNode(object):
    """A single instruction in the tape.

    Attributes:
        id (int): The position of the node in the tape.
        shape (tuple): The declared shape of the node's value.
        primitive (str): The primitive tag.
        parents (tuple): The ids of the nodes this node reads from.
        attrs (dict): Primitive-specific settings (axis, factor, labels, ...).
        name (str): The binding name for leaves, or None.
        value (numpy.ndarray): The value computed by the last evaluation.
    """

    __slots__ = ("id", "shape", "primitive", "parents", "attrs", "name", "value")

    def __init__(self, node_id, shape, primitive, parents=(), attrs=None, name=None):
        # type: (SAPNode, int, tuple, str, tuple, dict, str) -> None
        self.id = node_id
        self.shape = tuple(shape)
        self.primitive = primitive
        self.parents = tuple(parents)
        self.attrs = attrs or {}
        self.name = name
        self.value = None

    def __str__(self):
        args = " ".join("n%s" % p for p in self.parents)
        label = (" %s" % self.name) if self.name else ""
        return "n%s = %s%s %s %s" % (self.id, self.primitive, label, args, self.shape)


def _broadcast(first, second, node_id=None):
    try:
        return tuple(np.broadcast_shapes(first, second))
    except ValueError:
        raise SAPShapeMismatchError("Cannot broadcast shapes %s and %s." % (first, second),
                                    node_id)


def _reduced_shape(shape, axis, keepdims):
    if axis is None:
        return tuple(1 for _ in shape) if keepdims else ()
    axis = axis % len(shape)
    if keepdims:
        return shape[:axis] + (1,) + shape[axis + 1:]
    return shape[:axis] + shape[axis + 1:]


def _unbroadcast(grad, shape):
    """Sum a gradient down to the shape of the operand that was broadcast into it."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _expand_reduced(grad, shape, axis, keepdims):
    if axis is not None and not keepdims:
        grad = np.expand_dims(grad, axis)
    return np.broadcast_to(grad, shape)


def _softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def _cross_entropy(logits, labels):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1))
    picked = shifted[np.arange(len(labels)), labels]
    return np.mean(log_norm - picked)


# Forward rules: (node, *parent_values) -> value
_FORWARD = {
    "add": lambda n, a, b: a + b,
    "sub": lambda n, a, b: a - b,
    "mul": lambda n, a, b: a * b,
    "div": lambda n, a, b: a / b,
    "matmul": lambda n, a, b: np.matmul(a, b),
    "exp": lambda n, a: np.exp(a),
    "log": lambda n, a: np.log(a),
    "relu": lambda n, a: np.maximum(a, 0.0),
    "scale": lambda n, a: a * n.attrs["factor"],
    "sum": lambda n, a: np.sum(a, axis=n.attrs["axis"], keepdims=n.attrs["keepdims"]),
    "mean": lambda n, a: np.mean(a, axis=n.attrs["axis"], keepdims=n.attrs["keepdims"]),
    "dot": lambda n, a, b: np.sum(a * b, axis=-1),
    "norm": lambda n, a: np.sqrt(np.sum(a * a, axis=-1)),
    "concat": lambda n, *xs: np.concatenate(xs, axis=n.attrs["axis"]),
    "gather": lambda n, a: np.take(a, n.attrs["indices"], axis=n.attrs["axis"]),
    "reshape": lambda n, a: np.reshape(a, n.shape),
    "transpose": lambda n, a: np.swapaxes(a, -1, -2),
    "step": lambda n, a: (a >= n.attrs["threshold"]).astype(np.float64),
    "softmax": lambda n, a: _softmax(a),
    "softmax_cross_entropy": lambda n, a: np.asarray(_cross_entropy(a, n.attrs["labels"])),
}


def _back_norm(node, g, a, out):
    safe = np.where(out > 0.0, out, 1.0)
    return (g[..., None] * a / safe[..., None],)


def _back_concat(node, g, out, *xs):
    axis = node.attrs["axis"]
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return tuple(np.split(g, bounds, axis=axis))


def _back_gather(node, g, a, out):
    grad = np.zeros(a.shape)
    axis = node.attrs["axis"]
    np.add.at(np.moveaxis(grad, axis, 0), node.attrs["indices"], np.moveaxis(g, axis, 0))
    return (grad,)


def _back_softmax(node, g, a, out):
    return (out * (g - np.sum(g * out, axis=-1, keepdims=True)),)


def _back_cross_entropy(node, g, a, out):
    labels = node.attrs["labels"]
    probs = _softmax(a)
    probs[np.arange(len(labels)), labels] -= 1.0
    return (g * probs / len(labels),)


def _back_matmul(node, g, a, b, out):
    return (_unbroadcast(np.matmul(g, np.swapaxes(b, -1, -2)), a.shape),
            _unbroadcast(np.matmul(np.swapaxes(a, -1, -2), g), b.shape))


# Backward rules: (node, adjoint, *parent_values, out) -> parent adjoints. Binary rules receive
# the parents in order; unary rules receive (node, g, a, out).
_BACKWARD = {
    "add": lambda n, g, a, b, o: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    "sub": lambda n, g, a, b, o: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    "mul": lambda n, g, a, b, o: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
    "div": lambda n, g, a, b, o: (_unbroadcast(g / b, a.shape),
                                  _unbroadcast(-g * a / (b * b), b.shape)),
    "matmul": _back_matmul,
    "exp": lambda n, g, a, o: (g * o,),
    "log": lambda n, g, a, o: (g / a,),
    "relu": lambda n, g, a, o: (g * (a > 0.0),),
    "scale": lambda n, g, a, o: (g * n.attrs["factor"],),
    "sum": lambda n, g, a, o: (_expand_reduced(g, a.shape, n.attrs["axis"],
                                               n.attrs["keepdims"]),),
    "mean": lambda n, g, a, o: (_expand_reduced(g, a.shape, n.attrs["axis"], n.attrs["keepdims"])
                                * (float(o.size) / a.size),),
    "dot": lambda n, g, a, b, o: (_unbroadcast(g[..., None] * b, a.shape),
                                  _unbroadcast(g[..., None] * a, b.shape)),
    "norm": _back_norm,
    "gather": _back_gather,
    "reshape": lambda n, g, a, o: (np.reshape(g, a.shape),),
    "transpose": lambda n, g, a, o: (np.swapaxes(g, -1, -2),),
    "step": lambda n, g, a, o: (np.zeros(a.shape),),
    "softmax": _back_softmax,
    "softmax_cross_entropy": _back_cross_entropy,
}


class SAPTape(object):
    """An instruction-list implementation of a differentiable graph.

    The tape records primitives as they are requested and hands back `SAPNode` handles that
        can be used as operands for further primitives. Leaves are either constants (with a
        value captured at build time, which can be overridden by binding their name) or
        parameters (which must be bound at evaluation time).

    Attributes:
        nodes (list): The recorded instructions, in topological order.
    """

    def __init__(self):
        # type: (SAPTape) -> None
        """Construct an empty tape."""
        self.nodes = []
        self._names = {}

    def __str__(self):
        return "\n".join(str(node) for node in self.nodes)

    def __len__(self):
        return len(self.nodes)

    def _record(self, shape, primitive, parents=(), attrs=None, name=None):
        for parent in parents:
            if not isinstance(parent, SAPNode) or parent.id >= len(self.nodes) \
                    or self.nodes[parent.id] is not parent:
                raise SAPShapeMismatchError("Operand of '%s' does not belong to this tape."
                                            % primitive, len(self.nodes))
        node = SAPNode(len(self.nodes), shape, primitive,
                       [p.id for p in parents], attrs, name)
        self.nodes.append(node)
        if name is not None:
            if name in self._names:
                raise SAPShapeMismatchError("Duplicate leaf name '%s'." % name, node.id)
            self._names[name] = node
        return node

    def node(self, name):
        # type: (SAPTape, str) -> SAPNode
        """Get a leaf node by its binding name.

        Arguments:
            name (str): The name given to the constant or parameter.

        Returns:
            node (SAPNode): The leaf with that name.
        """
        return self._names[name]

    def constant(self, value, name=None):
        # type: (SAPTape, any, str) -> SAPNode
        """Record a constant leaf.

        Arguments:
            value (array-like): The value of the constant.
            name (str): An optional binding name so the value can be replaced at evaluation.

        Returns:
            node (SAPNode): The constant node.
        """
        value = np.asarray(value, dtype=np.float64)
        node = self._record(value.shape, "constant", name=name)
        node.attrs["value"] = value
        return node

    def parameter(self, name, shape):
        # type: (SAPTape, str, tuple) -> SAPNode
        """Record a parameter leaf, which must be bound when the tape is evaluated.

        Arguments:
            name (str): The binding name of the parameter.
            shape (tuple): The shape of the parameter.

        Returns:
            node (SAPNode): The parameter node.
        """
        return self._record(shape, "parameter", name=name)

    def _binary(self, primitive, a, b):
        return self._record(_broadcast(a.shape, b.shape, len(self.nodes)), primitive, (a, b))

    def add(self, a, b):
        """Elementwise sum."""
        return self._binary("add", a, b)

    def sub(self, a, b):
        """Elementwise difference."""
        return self._binary("sub", a, b)

    def mul(self, a, b):
        """Elementwise product."""
        return self._binary("mul", a, b)

    def div(self, a, b):
        """Elementwise quotient."""
        return self._binary("div", a, b)

    def matmul(self, a, b):
        # type: (SAPTape, SAPNode, SAPNode) -> SAPNode
        """Batched matrix product over the last two axes of both operands.

        Raises:
            error (SAPShapeMismatchError): Either operand has fewer than two axes or the inner
                dimensions disagree.
        """
        if len(a.shape) < 2 or len(b.shape) < 2 or a.shape[-1] != b.shape[-2]:
            raise SAPShapeMismatchError("Cannot multiply %s by %s." % (a.shape, b.shape),
                                        len(self.nodes))
        batch = _broadcast(a.shape[:-2], b.shape[:-2], len(self.nodes))
        return self._record(batch + (a.shape[-2], b.shape[-1]), "matmul", (a, b))

    def exp(self, a):
        """Elementwise exponential."""
        return self._record(a.shape, "exp", (a,))

    def log(self, a):
        """Elementwise natural logarithm."""
        return self._record(a.shape, "log", (a,))

    def relu(self, a):
        """Elementwise rectifier."""
        return self._record(a.shape, "relu", (a,))

    def scale(self, a, factor):
        """Multiply by a fixed scalar."""
        return self._record(a.shape, "scale", (a,), {"factor": float(factor)})

    def sum(self, a, axis=None, keepdims=False):
        """Sum over one axis, or over all axes when `axis` is None."""
        return self._record(_reduced_shape(a.shape, axis, keepdims), "sum", (a,),
                            {"axis": axis, "keepdims": keepdims})

    def mean(self, a, axis=None, keepdims=False):
        """Average over one axis, or over all axes when `axis` is None."""
        return self._record(_reduced_shape(a.shape, axis, keepdims), "mean", (a,),
                            {"axis": axis, "keepdims": keepdims})

    def dot(self, a, b):
        """Inner product over the last axis."""
        if a.shape[-1:] != b.shape[-1:]:
            raise SAPShapeMismatchError("Cannot take the inner product of %s and %s."
                                        % (a.shape, b.shape), len(self.nodes))
        shape = _broadcast(a.shape, b.shape, len(self.nodes))
        return self._record(shape[:-1], "dot", (a, b))

    def norm(self, a):
        """Euclidean norm over the last axis."""
        return self._record(a.shape[:-1], "norm", (a,))

    def concat(self, parts, axis=-1):
        # type: (SAPTape, list, int) -> SAPNode
        """Concatenate nodes along an axis; all other axes must agree."""
        first = parts[0].shape
        axis = axis % len(first)
        total = 0
        for part in parts:
            rest = part.shape[:axis] + part.shape[axis + 1:]
            if len(part.shape) != len(first) or rest != first[:axis] + first[axis + 1:]:
                raise SAPShapeMismatchError("Cannot concatenate %s with %s."
                                            % (first, part.shape), len(self.nodes))
            total += part.shape[axis]
        shape = first[:axis] + (total,) + first[axis + 1:]
        return self._record(shape, "concat", parts, {"axis": axis})

    def gather(self, a, indices, axis=0):
        """Select a list of indices along an axis."""
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        axis = axis % len(a.shape)
        if indices.size and (indices.min() < -a.shape[axis] or indices.max() >= a.shape[axis]):
            raise SAPShapeMismatchError("Gather index out of range for axis %s of %s."
                                        % (axis, a.shape), len(self.nodes))
        shape = a.shape[:axis] + (len(indices),) + a.shape[axis + 1:]
        return self._record(shape, "gather", (a,), {"indices": indices, "axis": axis})

    def reshape(self, a, shape):
        """Change the layout of a node without changing its values."""
        shape = tuple(int(d) for d in shape)
        if int(np.prod(shape)) != int(np.prod(a.shape)):
            raise SAPShapeMismatchError("Cannot reshape %s into %s." % (a.shape, shape),
                                        len(self.nodes))
        return self._record(shape, "reshape", (a,))

    def transpose(self, a):
        """Swap the last two axes."""
        if len(a.shape) < 2:
            raise SAPShapeMismatchError("Cannot transpose a node of shape %s." % (a.shape,),
                                        len(self.nodes))
        return self._record(a.shape[:-2] + (a.shape[-1], a.shape[-2]), "transpose", (a,))

    def step(self, a, threshold):
        """Indicator of `a >= threshold`. Gradients do not flow through this node."""
        return self._record(a.shape, "step", (a,), {"threshold": float(threshold)})

    def softmax(self, a):
        """Normalized exponential over the last axis."""
        return self._record(a.shape, "softmax", (a,))

    def softmax_cross_entropy(self, logits, labels):
        # type: (SAPTape, SAPNode, any) -> SAPNode
        """Mean cross-entropy of an N×K logits node against N integer labels."""
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if len(logits.shape) != 2 or logits.shape[0] != len(labels):
            raise SAPShapeMismatchError("Expected %s labels for logits of shape %s."
                                        % (len(labels), logits.shape), len(self.nodes))
        if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
            raise SAPShapeMismatchError("Label out of range for %s classes." % logits.shape[1],
                                        len(self.nodes))
        return self._record((), "softmax_cross_entropy", (logits,), {"labels": labels})

    def evaluate(self, bindings=None):
        # type: (SAPTape, dict) -> dict
        """Compute every node's value in tape order.

        Arguments:
            bindings (dict): Values for parameters (required) and named constants (optional),
                keyed by name.

        Returns:
            values (dict): A mapping from node id to its value.

        Raises:
            error (SAPUnboundInputError): A parameter has no binding.
            error (SAPShapeMismatchError): A binding does not match its declared shape.
            error (SAPNonFiniteError): A node evaluated to NaN or infinity.
        """
        bindings = bindings or {}
        values = {}
        for node in self.nodes:
            if node.primitive in ("constant", "parameter"):
                if node.name is not None and node.name in bindings:
                    value = np.asarray(bindings[node.name], dtype=np.float64)
                elif node.primitive == "constant":
                    value = node.attrs["value"]
                else:
                    raise SAPUnboundInputError("Parameter '%s' (n%s) is not bound."
                                               % (node.name, node.id))
            else:
                with np.errstate(all="ignore"):
                    value = _FORWARD[node.primitive](node, *[values[p] for p in node.parents])
                value = np.asarray(value, dtype=np.float64)
            if value.shape != node.shape:
                raise SAPShapeMismatchError("Node n%s (%s) produced shape %s, expected %s."
                                            % (node.id, node.primitive, value.shape,
                                               node.shape), node.id)
            if not np.all(np.isfinite(value)):
                raise SAPNonFiniteError("Node n%s (%s) produced a non-finite value."
                                        % (node.id, node.primitive), node.id)
            node.value = value
            values[node.id] = value
        return values

    def backward(self, output, params, values=None):
        # type: (SAPTape, SAPNode, list, dict) -> dict
        """Compute the gradient of a scalar output with respect to a set of parameters.

        Arguments:
            output (SAPNode): The scalar node to differentiate.
            params (list): Parameter nodes or parameter names.
            values (dict): The values from a previous `evaluate` call. Defaults to the values
                stored on the nodes by the last evaluation.

        Returns:
            gradients (dict): A mapping from parameter name to a gradient array of the
                parameter's shape. Parameters the output does not depend on get zeros.

        Raises:
            error (SAPNonScalarOutputError): The output node is not a scalar.
        """
        if int(np.prod(output.shape)) != 1:
            raise SAPNonScalarOutputError("Output n%s has shape %s; expected a scalar."
                                          % (output.id, output.shape))
        if values is None:
            values = dict((node.id, node.value) for node in self.nodes)

        adjoints = {output.id: np.ones(output.shape)}
        for node in reversed(self.nodes[:output.id + 1]):
            grad = adjoints.pop(node.id, None)
            if grad is None or not node.parents:
                if grad is not None:
                    adjoints[node.id] = grad
                continue
            parents = [values[p] for p in node.parents]
            if node.primitive == "concat":
                grads = _back_concat(node, grad, values[node.id], *parents)
            else:
                grads = _BACKWARD[node.primitive](node, grad, *(parents + [values[node.id]]))
            for parent_id, parent_grad in zip(node.parents, grads):
                if parent_id in adjoints:
                    adjoints[parent_id] = adjoints[parent_id] + parent_grad
                else:
                    adjoints[parent_id] = np.array(parent_grad, dtype=np.float64)

        gradients = {}
        for param in params:
            node = param if isinstance(param, SAPNode) else self._names[param]
            grad = adjoints.get(node.id)
            gradients[node.name] = np.zeros(node.shape) if grad is None \
                else np.reshape(grad, node.shape)
        return gradients

    def kink_pattern(self, values, output=None):
        # type: (SAPTape, dict, SAPNode) -> list
        """Get the active side of every non-smooth node for a set of evaluated values.

        `relu` nodes report where their input is positive and `step` nodes where their input
            reaches the threshold. Two evaluations with equal patterns lie on the same smooth
            piece of the graph.

        Arguments:
            values (dict): The values from an `evaluate` call.
            output (SAPNode): Only look at nodes recorded up to this one. Defaults to every
                node.

        Returns:
            pattern (list): One boolean array per `relu` or `step` node, in tape order.
        """
        pattern = []
        last = len(self.nodes) if output is None else output.id + 1
        for node in self.nodes[:last]:
            if node.primitive == "relu":
                pattern.append(values[node.parents[0]] > 0.0)
            elif node.primitive == "step":
                pattern.append(values[node.parents[0]] >= node.attrs["threshold"])
        return pattern

    def parameters(self):
        # type: (SAPTape) -> list
        """Get every parameter node recorded in the tape.

        Returns:
            params (list): The parameter nodes, in tape order.
        """
        return [node for node in self.nodes if node.primitive == "parameter"]


def evaluate(tape, bindings=None):
    # type: (SAPTape, dict) -> dict
    """Evaluate a tape. See `SAPTape.evaluate`."""
    return tape.evaluate(bindings)


def backward(tape, output, params, bindings=None):
    # type: (SAPTape, SAPNode, list, dict) -> dict
    """Evaluate a tape (when bindings are given) and differentiate its output.

    See `SAPTape.backward`.
    """
    values = tape.evaluate(bindings) if bindings is not None else None
    return tape.backward(output, params, values)
