"""Dense 2-D arrays with reverse-mode automatic differentiation.

Every :class:`Tensor` wraps a float64 ``(rows, cols)`` array.  Operations
record their parents together with a vector-Jacobian product, and
:meth:`Tensor.backward` sweeps the recorded tape in reverse topological
order.  The graph is rebuilt on every forward pass.

Broadcasting is limited to 2-D shapes where each axis either matches or
has length one (scalars, rows and columns).
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

#: Lower clamp applied to the arguments of :func:`log` and to the
#: derivative of :func:`sqrt`.
EPS_NUM = 1e-12


def _as_2d(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected at most 2 dimensions, got shape {arr.shape}")
    return arr


def _broadcast_shape(op: str, a: tuple, b: tuple) -> tuple:
    out = []
    for da, db in zip(a, b):
        if da == db or db == 1:
            out.append(da)
        elif da == 1:
            out.append(db)
        else:
            raise ValueError(f"{op}: shape mismatch {a} vs {b}")
    return tuple(out)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad


def _columnwise(fn, x: np.ndarray) -> np.ndarray:
    """Apply a transcendental ufunc one column at a time.

    Vectorised math kernels may round an element differently depending on
    where it sits in the buffer.  Every column has the same length and
    stride, so evaluating per column makes the result independent of the
    column's position (cluster relabelling stays bit-exact).
    """
    if x.shape[1] == 1:
        return fn(x)
    out = np.empty_like(x)
    for j in range(x.shape[1]):
        out[:, j] = fn(x[:, j])
    return out


def _check_finite(op: str, value: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite value produced by {op}")
    return value


class Tensor:
    """A node of the differentiation tape.

    Parameters
    ----------
    value : array_like
        Scalar, 1-D (treated as a row) or 2-D data, stored as float64.
    requires_grad : bool
        Leaves that should receive a gradient after :meth:`backward`.
    """

    __slots__ = ("value", "grad", "requires_grad", "_parents", "op")
    __array_priority__ = 100.0

    def __init__(self, value, requires_grad: bool = False, *, _parents=(), op: str = "leaf"):
        self.value = _as_2d(value)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in _parents)
        self._parents: tuple = tuple(_parents)
        self.op = op

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_op(
        cls,
        op: str,
        value: np.ndarray,
        parents: Sequence[tuple["Tensor", Callable[[np.ndarray], np.ndarray]]],
    ) -> "Tensor":
        """Record a custom operation.

        ``parents`` pairs each input tensor with a function mapping the
        output gradient to that input's gradient contribution.
        """
        value = _check_finite(op, _as_2d(value))
        return cls(value, _parents=parents, op=op)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ValueError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def numpy(self) -> np.ndarray:
        return self.value

    def detach(self) -> "Tensor":
        return Tensor(self.value.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r})"

    # -- backward pass --------------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable node."""
        if self.value.shape != (1, 1):
            raise ValueError(f"backward() needs a scalar root, got shape {self.shape}")
        order = _topological_order(self)
        grads = {id(self): np.ones((1, 1))}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            node.grad = g if node.grad is None else node.grad + g
            for parent, vjp in node._parents:
                if not parent.requires_grad:
                    continue
                contrib = vjp(g)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + contrib
                else:
                    grads[key] = contrib

    # -- operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self, axis: int | None = None) -> "Tensor":
        return tsum(self, axis)

    def mean(self, axis: int | None = None) -> "Tensor":
        return tmean(self, axis)

    def __getitem__(self, key) -> "Tensor":
        return take(self, key)


def _topological_order(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- elementwise binary ops -------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a.shape, b.shape)
    out = a.value + b.value
    return Tensor.from_op(
        "add", out,
        [(a, lambda g: _unbroadcast(g, a.shape)), (b, lambda g: _unbroadcast(g, b.shape))],
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a.shape, b.shape)
    out = a.value - b.value
    return Tensor.from_op(
        "sub", out,
        [(a, lambda g: _unbroadcast(g, a.shape)), (b, lambda g: -_unbroadcast(g, b.shape))],
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a.shape, b.shape)
    av, bv = a.value, b.value
    return Tensor.from_op(
        "mul", av * bv,
        [(a, lambda g: _unbroadcast(g * bv, a.shape)), (b, lambda g: _unbroadcast(g * av, b.shape))],
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a.shape, b.shape)
    av, bv = a.value, b.value
    with np.errstate(divide="ignore", invalid="ignore"):
        out = av / bv
    return Tensor.from_op(
        "div", out,
        [
            (a, lambda g: _unbroadcast(g / bv, a.shape)),
            (b, lambda g: _unbroadcast(-g * av / (bv * bv), b.shape)),
        ],
    )


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return Tensor.from_op(
        "matmul", av @ bv, [(a, lambda g: g @ bv.T), (b, lambda g: av.T @ g)]
    )


# -- elementwise unary ops --------------------------------------------------------


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = _columnwise(np.exp, a.value)
    return Tensor.from_op("exp", out, [(a, lambda g: g * out)])


def log(a, eps: float = EPS_NUM) -> Tensor:
    """Natural log of ``max(a, eps)``; zero derivative where clamped."""
    a = as_tensor(a)
    x = a.value
    live = x > eps
    out = _columnwise(np.log, np.where(live, x, eps))

    def vjp(g):
        return np.where(live, g / np.where(live, x, 1.0), 0.0)

    return Tensor.from_op("log", out, [(a, vjp)])


def sqrt(a, eps: float = EPS_NUM) -> Tensor:
    """Square root of ``max(a, 0)``.

    The derivative is evaluated only where ``a > eps`` and is zero elsewhere,
    so exact zeros (identical distributions, one-hot posteriors) stay finite.
    """
    a = as_tensor(a)
    x = a.value
    out = _columnwise(np.sqrt, np.maximum(x, 0.0))
    live = x > eps

    def vjp(g):
        return np.where(live, 0.5 * g / np.where(live, out, 1.0), 0.0)

    return Tensor.from_op("sqrt", out, [(a, vjp)])


def absolute(a) -> Tensor:
    a = as_tensor(a)
    s = np.sign(a.value)
    return Tensor.from_op("abs", np.abs(a.value), [(a, lambda g: g * s)])


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    x = a.value
    with np.errstate(invalid="ignore", divide="ignore"):
        out = _columnwise(lambda c: c ** exponent, x)
    return Tensor.from_op(
        "pow", out, [(a, lambda g: g * exponent * x ** (exponent - 1.0))]
    )


def square(a) -> Tensor:
    a = as_tensor(a)
    x = a.value
    return Tensor.from_op("square", x * x, [(a, lambda g: 2.0 * g * x)])


def clamp_min(a, lower: float) -> Tensor:
    """``max(a, lower)`` with subgradient 0 on the clamped side."""
    a = as_tensor(a)
    x = a.value
    live = x > lower
    return Tensor.from_op(
        "clamp_min", np.where(live, x, lower), [(a, lambda g: np.where(live, g, 0.0))]
    )


def relu(a) -> Tensor:
    return clamp_min(a, 0.0)


# -- structural ops ---------------------------------------------------------------


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return Tensor.from_op("transpose", a.value.T, [(a, lambda g: g.T)])


def tsum(a, axis: int | None = None) -> Tensor:
    """Global (``axis=None``), per-column (``axis=0``) or per-row (``axis=1``) sum."""
    a = as_tensor(a)
    shape = a.shape
    if axis is None:
        out = a.value.sum().reshape(1, 1)
    elif axis == 0:
        # per column, for the same position-independence as _columnwise
        out = np.array([[a.value[:, j].sum() for j in range(shape[1])]])
    elif axis == 1:
        out = a.value.sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"sum: invalid axis {axis}")
    return Tensor.from_op("sum", out, [(a, lambda g: np.broadcast_to(g, shape).copy())])


def sorted_sum(a, axis: int = 1) -> Tensor:
    """Sum along ``axis`` after sorting the entries.

    The result depends only on the multiset of summed values, so permuting
    the reduced axis gives a bit-identical answer.
    """
    a = as_tensor(a)
    if axis not in (0, 1):
        raise ValueError(f"sorted_sum: invalid axis {axis}")
    shape = a.shape
    out = np.sort(a.value, axis=axis).sum(axis=axis, keepdims=True)
    return Tensor.from_op("sorted_sum", out, [(a, lambda g: np.broadcast_to(g, shape).copy())])


def tmean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    n = a.value.size if axis is None else a.shape[axis]
    return tsum(a, axis) * (1.0 / n)


def take(a, key) -> Tensor:
    """Basic/advanced indexing; the result is always re-shaped to 2-D."""
    a = as_tensor(a)
    raw = a.value[key]
    if raw.ndim == 1:
        # keep the orientation of the selected slice
        if isinstance(key, tuple) and len(key) == 2 and not isinstance(key[1], (slice, list, np.ndarray)):
            out = raw.reshape(-1, 1)
        else:
            out = raw.reshape(1, -1)
    else:
        out = _as_2d(raw)
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        np.add.at(full, key, g.reshape(raw.shape))
        return full

    return Tensor.from_op("take", out, [(a, vjp)])


def softmax(a) -> Tensor:
    """Row-wise softmax."""
    a = as_tensor(a)
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = _columnwise(np.exp, z)
    s = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return s * (g - (g * s).sum(axis=1, keepdims=True))

    return Tensor.from_op("softmax", s, [(a, vjp)])


def concat(tensors: Iterable[Tensor], axis: int) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    values = [t.value for t in ts]
    out = np.concatenate(values, axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in values])
    parents = []
    for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
        if axis == 0:
            parents.append((t, lambda g, lo=lo, hi=hi: g[lo:hi, :]))
        else:
            parents.append((t, lambda g, lo=lo, hi=hi: g[:, lo:hi]))
    return Tensor.from_op("concat", out, parents)
