"""Tape-based reverse-mode automatic differentiation over dense numpy arrays.

A :class:`Tape` records every operation applied to its tensors; calling
:func:`backward` on a scalar output walks the records in reverse insertion
order once and returns the gradient of every node that depends on a leaf
with ``requires_grad``. Broadcasting is limited to size-1 operands.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, logsumexp as _logsumexp

from gsgw.exceptions.exceptions import InvalidInputError, NumericError, ShapeError

GELU_C = np.sqrt(2.0 / np.pi)
GELU_K = 0.044715

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


@dataclass
class Node:
    """One tape record: op name, input node ids and the vector-Jacobian product."""
    op: str
    inputs: Tuple[int, ...]
    backward: Optional[BackwardFn]
    requires_grad: bool


class Tensor:
    """Immutable array bound to the tape that produced it."""

    __slots__ = ("data", "tape", "node_id", "requires_grad")

    def __init__(self, data: np.ndarray, tape: "Tape", node_id: int, requires_grad: bool):
        self.data = data
        self.tape = tape
        self.node_id = node_id
        self.requires_grad = requires_grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else add_scalar(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else add_scalar(self, -other)

    def __rsub__(self, other):
        return add_scalar(scalar_mul(self, -1.0), other)

    def __mul__(self, other):
        return hadamard(self, other) if isinstance(other, Tensor) else scalar_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other) if isinstance(other, Tensor) else scalar_mul(self, 1.0 / other)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, node={self.node_id}, requires_grad={self.requires_grad})"


class Tape:
    """Append-only record of operations; single-threaded while in use."""

    def __init__(self):
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _new(self, data: np.ndarray, op: str, inputs: Sequence[Tensor], backward: Optional[BackwardFn],
             requires_grad: bool) -> Tensor:
        data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise NumericError(f"{op} produced non-finite values")
        data.setflags(write=False)
        node_id = len(self.nodes)
        self.nodes.append(Node(op, tuple(t.node_id for t in inputs), backward, requires_grad))
        return Tensor(data, self, node_id, requires_grad)

    def leaf(self, array, requires_grad: bool = True) -> Tensor:
        """Register an input array; its gradient is reported by backward."""
        return self._new(np.array(array, dtype=np.float64, copy=True), "leaf", (), None, requires_grad)

    def constant(self, array) -> Tensor:
        return self.leaf(array, requires_grad=False)

    def record(self, op: str, data: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
        """Append an op node; backward maps the output gradient to one gradient per input."""
        for t in inputs:
            if t.tape is not self:
                raise InvalidInputError(f"{op}: operands belong to different tapes")
        requires_grad = any(t.requires_grad for t in inputs)
        return self._new(data, op, inputs, backward if requires_grad else None, requires_grad)


def backward(tape: Tape, output: Tensor) -> Dict[int, np.ndarray]:
    """
    Reverse pass from a scalar output.

    Args:
        tape: Tape holding the forward records
        output: Scalar tensor (size 1)

    Returns:
        Map node id -> gradient of the output with respect to that node

    Raises:
        InvalidInputError: If the output is not a scalar
    """
    if output.size != 1:
        raise InvalidInputError(f"backward needs a scalar output, got shape {output.shape}")
    grads: Dict[int, np.ndarray] = {output.node_id: np.ones(output.shape)}
    for node_id in range(output.node_id, -1, -1):
        node = tape.nodes[node_id]
        if node.backward is None or node_id not in grads:
            continue
        input_grads = node.backward(grads[node_id])
        for input_id, g in zip(node.inputs, input_grads):
            if g is None or not tape.nodes[input_id].requires_grad:
                continue
            if input_id in grads:
                grads[input_id] = grads[input_id] + g
            else:
                grads[input_id] = g
    return grads


def gradient(grads: Dict[int, np.ndarray], tensor: Tensor) -> np.ndarray:
    """Gradient of a tensor from a backward map, zeros when it was not reached."""
    return grads.get(tensor.node_id, np.zeros(tensor.shape))


def value_and_grad(build: Callable[[Tape, Tensor], Tensor], theta: np.ndarray) -> Tuple[float, np.ndarray]:
    """Evaluate build(tape, leaf(theta)) and its gradient with respect to theta."""
    tape = Tape()
    leaf = tape.leaf(theta)
    out = build(tape, leaf)
    grads = backward(tape, out)
    return out.item(), gradient(grads, leaf)


# -- broadcasting helpers -----------------------------------------------------

def _binary_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.full(shape, g.sum())


# -- elementwise binary -------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shape("add", a, b)
    return a.tape.record("add", a.data + b.data, (a, b),
                         lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shape("sub", a, b)
    return a.tape.record("sub", a.data - b.data, (a, b),
                         lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _binary_shape("hadamard", a, b)
    return a.tape.record("hadamard", a.data * b.data, (a, b),
                         lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a: Tensor, b: Tensor) -> Tensor:
    _binary_shape("div", a, b)
    if np.any(b.data == 0.0):
        raise NumericError("div: division by zero")
    out = a.data / b.data
    return a.tape.record("div", out, (a, b),
                         lambda g: (_unbroadcast(g / b.data, a.shape),
                                    _unbroadcast(-g * out / b.data, b.shape)))


def scalar_mul(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return a.tape.record("scalar_mul", a.data * c, (a,), lambda g: (g * c,))


def add_scalar(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return a.tape.record("add_scalar", a.data + c, (a,), lambda g: (g,))


# -- linear algebra and structure --------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a.tape.record("matmul", a.data @ b.data, (a, b),
                         lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got {a.shape}")
    return a.tape.record("transpose", a.data.T, (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: {a.shape} -> {shape}: {exc}") from exc
    return a.tape.record("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate 2-D tensors along an axis."""
    if not tensors:
        raise InvalidInputError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from exc
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return tensors[0].tape.record("concat", out, tuple(tensors),
                                  lambda g: tuple(np.split(g, splits, axis=axis)))


def slice_(a: Tensor, key) -> Tensor:
    """Basic (non-fancy) indexing."""
    out = np.array(a.data[key], copy=True)

    def vjp(g):
        full = np.zeros(a.shape)
        full[key] += g
        return (full,)

    return a.tape.record("slice", out, (a,), vjp)


def sum_(a: Tensor, axis: Optional[int] = None) -> Tensor:
    """Sum of all entries, or over one axis keeping dims."""
    if axis is None:
        return a.tape.record("sum", np.array([[a.data.sum()]]), (a,),
                             lambda g: (np.full(a.shape, g.reshape(-1)[0]),))
    out = a.data.sum(axis=axis, keepdims=True)
    return a.tape.record("sum", out, (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return scalar_mul(sum_(a, axis), 1.0 / count)


# -- elementwise unary --------------------------------------------------------

def square(a: Tensor) -> Tensor:
    return a.tape.record("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data < 0):
        raise NumericError("sqrt of a negative entry")
    out = np.sqrt(a.data)
    return a.tape.record("sqrt", out, (a,), lambda g: (g / (2.0 * out),))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return a.tape.record("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NumericError("log of a nonpositive entry")
    return a.tape.record("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def sin(a: Tensor) -> Tensor:
    return a.tape.record("sin", np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def cos(a: Tensor) -> Tensor:
    return a.tape.record("cos", np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return a.tape.record("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)
    return a.tape.record("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return a.tape.record("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def gelu(a: Tensor) -> Tensor:
    """tanh approximation of GELU with its exact derivative."""
    x = a.data
    inner = GELU_C * (x + GELU_K * x ** 3)
    th = np.tanh(inner)
    out = 0.5 * x * (1.0 + th)

    def vjp(g):
        d_inner = GELU_C * (1.0 + 3.0 * GELU_K * x * x)
        return (g * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * d_inner),)

    return a.tape.record("gelu", out, (a,), vjp)


def row_softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis of a 2-D tensor, max-shifted."""
    if a.data.ndim != 2:
        raise ShapeError(f"row_softmax needs a 2-D tensor, got {a.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return a.tape.record("row_softmax", out, (a,),
                         lambda g: (out * (g - (g * out).sum(axis=1, keepdims=True)),))


def row_logsumexp(a: Tensor) -> Tensor:
    """log-sum-exp over the last axis of a 2-D tensor, kept as an (n, 1) column."""
    if a.data.ndim != 2:
        raise ShapeError(f"row_logsumexp needs a 2-D tensor, got {a.shape}")
    out = _logsumexp(a.data, axis=1, keepdims=True)
    return a.tape.record("row_logsumexp", out, (a,),
                         lambda g: (g * np.exp(a.data - out),))


ACTIVATIONS = {"relu": relu, "gelu": gelu, "tanh": tanh}


# -- finite-difference oracle -------------------------------------------------

def grad_check(
    fn: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    theta: np.ndarray,
    h: float = 1e-5,
) -> float:
    """
    Compare an analytic gradient against central differences.

    Args:
        fn: theta -> (value, gradient)
        theta: Point of evaluation
        h: Step, in [1e-7, 1e-3]

    Returns:
        max_k |analytic_k - fd_k| / (1e-8 + |fd_k|)

    Raises:
        InvalidInputError: If h is out of range
        NumericError: If fn returns a non-finite value
    """
    if not 1e-7 <= h <= 1e-3:
        raise InvalidInputError(f"h must lie in [1e-7, 1e-3], got {h}")
    theta = np.array(theta, dtype=np.float64, copy=True).reshape(-1)
    value, analytic = fn(theta)
    if not np.isfinite(value):
        raise NumericError("grad_check: function value is not finite")
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)

    worst = 0.0
    for k in range(theta.shape[0]):
        plus = theta.copy()
        minus = theta.copy()
        plus[k] += h
        minus[k] -= h
        f_plus = fn(plus)[0]
        f_minus = fn(minus)[0]
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"grad_check: non-finite value at coordinate {k}")
        fd = (f_plus - f_minus) / (2.0 * h)
        worst = max(worst, abs(analytic[k] - fd) / (1e-8 + abs(fd)))
    return float(worst)
