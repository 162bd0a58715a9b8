"""
Reverse-mode automatic differentiation.

Values are float64 numpy arrays wrapped in Var nodes. Every primitive records
its parents and a backward closure; nodes get a monotonically increasing id
when created, so the creation order is the tape and backward() walks it in
reverse. Only first derivatives are supported.

Primitive set: add/sub/neg/mul (with broadcasting), matmul, affine,
activations (relu, leaky_relu, tanh, sigmoid, identity), square, sqrt, sum,
mean, log, concat.
"""

import itertools
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ArgumentError, EvaluationError

ArrayLike = Union[np.ndarray, float, int, Sequence]

_ids = itertools.count()


class Var:
    """A node of the computation tape."""

    __slots__ = ("value", "parents", "backward_fn", "requires_grad", "op", "name", "id")

    def __init__(self, value: ArrayLike, parents: Tuple["Var", ...] = (),
                 backward_fn: Optional[Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]] = None,
                 op: str = "leaf", requires_grad: bool = False, name: Optional[str] = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.op = op
        self.name = name
        self.id = next(_ids)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def label(self) -> str:
        return self.name or f"{self.op}#{self.id}"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Var(op={self.op}, shape={self.shape})"


def variable(value: ArrayLike, name: Optional[str] = None) -> Var:
    """Leaf that gradients are taken with respect to."""
    return Var(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def constant(value: ArrayLike) -> Var:
    return value if isinstance(value, Var) else Var(value, op="const")


def _node(value: np.ndarray, parents: Tuple[Var, ...], backward_fn, op: str) -> Var:
    requires = any(p.requires_grad for p in parents)
    return Var(value, parents if requires else (), backward_fn if requires else None,
               op=op, requires_grad=requires)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ========================================
# ARITHMETIC
# ========================================

def add(a, b) -> Var:
    a, b = constant(a), constant(b)
    try:
        value = a.value + b.value
    except ValueError as e:
        raise ArgumentError(f"Shape mismatch in add: {a.shape} vs {b.shape}") from e
    return _node(value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Var:
    a, b = constant(a), constant(b)
    try:
        value = a.value - b.value
    except ValueError as e:
        raise ArgumentError(f"Shape mismatch in sub: {a.shape} vs {b.shape}") from e
    return _node(value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def neg(a) -> Var:
    a = constant(a)
    return _node(-a.value, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Var:
    a, b = constant(a), constant(b)
    try:
        value = a.value * b.value
    except ValueError as e:
        raise ArgumentError(f"Shape mismatch in mul: {a.shape} vs {b.shape}") from e
    return _node(value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
                 "mul")


def matmul(a, b):
    """
    Matrix product of 2-D operands.

    Plain ndarrays give an ndarray; if either operand is a Var the product is
    recorded on the tape.
    """
    if not isinstance(a, Var) and not isinstance(b, Var):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        _check_matmul(a.shape, b.shape)
        return a @ b
    a, b = constant(a), constant(b)
    _check_matmul(a.shape, b.shape)
    return _node(a.value @ b.value, (a, b),
                 lambda g: (g @ b.value.T, a.value.T @ g), "matmul")


def _check_matmul(shape_a, shape_b) -> None:
    if len(shape_a) != 2 or len(shape_b) != 2 or shape_a[1] != shape_b[0]:
        raise ArgumentError(f"Shape mismatch in matmul: {shape_a} x {shape_b}")


def affine(x, weight, bias) -> Var:
    """Row-batch affine map x W^T + b with W of shape (out, in)."""
    x, weight, bias = constant(x), constant(weight), constant(bias)
    if x.value.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ArgumentError(f"Affine input {x.shape} does not match weight {weight.shape}")
    value = x.value @ weight.value.T + bias.value

    def backward(g):
        return g @ weight.value, g.T @ x.value, g.sum(axis=0)

    return _node(value, (x, weight, bias), backward, "affine")


# ========================================
# ELEMENTWISE
# ========================================

def relu(x) -> Var:
    x = constant(x)
    mask = x.value > 0
    return _node(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x, slope: float = 0.2) -> Var:
    x = constant(x)
    factor = np.where(x.value > 0, 1.0, slope)
    return _node(x.value * factor, (x,), lambda g: (g * factor,), "leaky_relu")


def tanh(x) -> Var:
    x = constant(x)
    out = np.tanh(x.value)
    return _node(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(x) -> Var:
    x = constant(x)
    out = np.empty_like(x.value)
    positive = x.value >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x.value[positive]))
    exp_x = np.exp(x.value[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return _node(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def identity(x) -> Var:
    return constant(x)


def square(x) -> Var:
    x = constant(x)
    return _node(x.value * x.value, (x,), lambda g: (2.0 * g * x.value,), "square")


def sqrt(x) -> Var:
    """Square root; the gradient at 0 is taken as 0."""
    x = constant(x)
    if np.any(x.value < 0):
        raise EvaluationError(f"sqrt of negative value at node '{x.label()}'", node=x.label())
    out = np.sqrt(x.value)

    def backward(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, 0.5 * g / safe, 0.0),)

    return _node(out, (x,), backward, "sqrt")


def log(x) -> Var:
    x = constant(x)
    if np.any(x.value <= 0):
        raise EvaluationError(f"log of non-positive value at node '{x.label()}'", node=x.label())
    return _node(np.log(x.value), (x,), lambda g: (g / x.value,), "log")


# ========================================
# REDUCTIONS AND STRUCTURE
# ========================================

def sum(x, axis: Optional[int] = None) -> Var:  # noqa: A001
    x = constant(x)
    value = x.value.sum(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _node(value, (x,), backward, "sum")


def mean(x, axis: Optional[int] = None) -> Var:
    x = constant(x)
    count = x.value.size if axis is None else x.shape[axis]
    value = x.value.mean(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / count, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis) / count, x.shape).copy(),)

    return _node(value, (x,), backward, "mean")


def concat(parts: Sequence, axis: int = 1) -> Var:
    parts = tuple(constant(p) for p in parts)
    try:
        value = np.concatenate([p.value for p in parts], axis=axis)
    except ValueError as e:
        raise ArgumentError(f"Cannot concatenate shapes {[p.shape for p in parts]}") from e
    splits = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return _node(value, parts, lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


# ========================================
# GRADIENTS
# ========================================

def backward(output: Var, wrt: Sequence[Var]) -> List[np.ndarray]:
    """
    Reverse sweep from a scalar output.

    Args:
        output: Scalar node
        wrt: Leaves to return gradients for

    Returns:
        One gradient array per leaf (zeros for leaves the output does not depend on)
    """
    if output.value.size != 1:
        raise ArgumentError(f"backward() needs a scalar output, got shape {output.shape}")

    grads: Dict[int, np.ndarray] = {}
    if output.requires_grad:
        nodes: Dict[int, Var] = {}
        stack = [output]
        while stack:
            node = stack.pop()
            if node.id in nodes or not node.requires_grad:
                continue
            nodes[node.id] = node
            stack.extend(node.parents)

        grads[output.id] = np.ones_like(output.value)
        for node_id in sorted(nodes, reverse=True):
            node = nodes[node_id]
            g = grads.get(node_id)
            if g is None or node.backward_fn is None:
                continue
            for parent, parent_grad in zip(node.parents, node.backward_fn(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent.id in grads:
                    grads[parent.id] = grads[parent.id] + parent_grad
                else:
                    grads[parent.id] = parent_grad

    return [grads.get(leaf.id, np.zeros_like(leaf.value)).reshape(leaf.shape) for leaf in wrt]


def value_and_grad(f: Callable[..., Var], *at: ArrayLike) -> Tuple[float, List[np.ndarray]]:
    """Evaluate scalar f at the given points and return (value, gradients)."""
    leaves = [variable(a) for a in at]
    out = f(*leaves)
    if not isinstance(out, Var):
        out = constant(out)
    return float(out.value.reshape(-1)[0]), backward(out, leaves)


def grad(f: Callable[..., Var], *at: ArrayLike) -> List[np.ndarray]:
    """Exact reverse-mode gradients of scalar f with respect to each input."""
    return value_and_grad(f, *at)[1]
