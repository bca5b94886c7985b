"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

Graphs are built eagerly: every op returns a new Tensor holding the computed
values, references to its parent nodes, and a closure that routes the output
gradient back to those parents. ``backward`` walks the graph once in reverse
topological order and accumulates gradients on every node that requires them.

Only what the model zoo needs is implemented: broadcasting elementwise
arithmetic, (batched) matmul, reductions, concat/slice/reshape, and the
activation set (sigmoid, elu, tanh, exp, log, sqrt, clip, softmax).
"""

from __future__ import annotations

import numpy as np

# Probability clip applied before any log or division on probabilities.
PROB_EPS = 1e-7


class ShapeError(ValueError):
    """Operand shapes cannot be combined; the message names the offending op."""


class GraphError(RuntimeError):
    """Graph misuse: non-scalar loss node, non-finite input, and the like."""


class Tensor:
    """One node of the computation graph.

    ``values`` is always a float64 ndarray. ``grad`` is None until a backward
    pass has reached this node. Constant nodes (requires_grad False and no
    differentiable parents) drop their parent links so dead subgraphs are
    never traversed.
    """

    __slots__ = ("values", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, values, requires_grad=False, name="", _parents=(), _backward=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.name = name
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        if self.requires_grad:
            self._parents = _parents
            self._backward = _backward
        else:
            self._parents = ()
            self._backward = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    def item(self) -> float:
        return float(self.values)

    def detach(self) -> "Tensor":
        """Constant copy of this node's values; gradients do not flow past it."""
        return Tensor(self.values, name=self.name + ".detach")

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, grad={'set' if self.grad is not None else 'unset'}, name={self.name!r})"

    # operator sugar; all real work lives in the module-level ops
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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def input_tensor(values, name="input") -> Tensor:
    """Wrap raw input data, rejecting non-finite values up front."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise GraphError(f"non-finite values in input {name!r}")
    return Tensor(arr, name=name)


def parameter(values, name) -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


def _accumulate(node: Tensor, g: np.ndarray) -> None:
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = np.zeros_like(node.values)
    node.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(op: str, a: Tensor, b: Tensor):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from exc


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    out_values = a.values + b.values

    def _bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return Tensor(out_values, _parents=(a, b), _backward=_bwd)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    out_values = a.values - b.values

    def _bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return Tensor(out_values, _parents=(a, b), _backward=_bwd)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    out_values = a.values * b.values

    def _bwd(g):
        _accumulate(a, _unbroadcast(g * b.values, a.shape))
        _accumulate(b, _unbroadcast(g * a.values, b.shape))

    return Tensor(out_values, _parents=(a, b), _backward=_bwd)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    out_values = a.values / b.values

    def _bwd(g):
        _accumulate(a, _unbroadcast(g / b.values, a.shape))
        _accumulate(b, _unbroadcast(-g * a.values / (b.values * b.values), b.shape))

    return Tensor(out_values, _parents=(a, b), _backward=_bwd)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def _bwd(g):
        _accumulate(a, -g)

    return Tensor(-a.values, _parents=(a,), _backward=_bwd)


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    p = float(p)
    out_values = a.values**p

    def _bwd(g):
        _accumulate(a, g * p * a.values ** (p - 1.0))

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    out_values = a.values @ b.values

    def _bwd(g):
        _accumulate(a, _unbroadcast(g @ np.swapaxes(b.values, -1, -2), a.shape))
        _accumulate(b, _unbroadcast(np.swapaxes(a.values, -1, -2) @ g, b.shape))

    return Tensor(out_values, _parents=(a, b), _backward=_bwd)


def swap_last_axes(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim < 2:
        raise ShapeError(f"swap_last_axes: needs at least 2-D, got {a.shape}")

    def _bwd(g):
        _accumulate(a, np.swapaxes(g, -1, -2))

    return Tensor(np.swapaxes(a.values, -1, -2), _parents=(a,), _backward=_bwd)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old_shape = a.shape

    def _bwd(g):
        _accumulate(a, g.reshape(old_shape))

    return Tensor(a.values.reshape(shape), _parents=(a,), _backward=_bwd)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_values = np.exp(a.values)

    def _bwd(g):
        _accumulate(a, g * out_values)

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.values <= 0.0):
        raise GraphError("log: non-positive input; clip probabilities first")
    out_values = np.log(a.values)

    def _bwd(g):
        _accumulate(a, g / a.values)

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_values = np.sqrt(a.values)

    def _bwd(g):
        _accumulate(a, g * 0.5 / out_values)

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_values = np.tanh(a.values)

    def _bwd(g):
        _accumulate(a, g * (1.0 - out_values * out_values))

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.values
    out_values = np.empty_like(x)
    pos = x >= 0
    out_values[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_values[~pos] = ex / (1.0 + ex)

    def _bwd(g):
        _accumulate(a, g * out_values * (1.0 - out_values))

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def elu(a, alpha: float = 1.0) -> Tensor:
    a = as_tensor(a)
    x = a.values
    neg_mask = x < 0
    out_values = np.where(neg_mask, alpha * (np.exp(np.minimum(x, 0.0)) - 1.0), x)

    def _bwd(g):
        _accumulate(a, g * np.where(neg_mask, out_values + alpha, 1.0))

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient is zero outside the open interval."""
    a = as_tensor(a)
    out_values = np.clip(a.values, lo, hi)
    inside = (a.values > lo) & (a.values < hi)

    def _bwd(g):
        _accumulate(a, g * inside)

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_values = a.values.sum(axis=axis, keepdims=keepdims)

    def _bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape).copy())

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    out_values = a.values.mean(axis=axis, keepdims=keepdims)

    def _bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g / count, a.shape).copy())

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def concat(tensors, axis=1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_values = np.concatenate([t.values for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bwd(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, stop)
            _accumulate(t, g[tuple(idx)])

    return Tensor(out_values, _parents=tuple(tensors), _backward=_bwd)


def slice_axis(a, start: int, stop: int, axis=1) -> Tensor:
    a = as_tensor(a)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def _bwd(g):
        full = np.zeros(a.shape)
        full[idx] = g
        _accumulate(a, full)

    return Tensor(a.values[idx], _parents=(a,), _backward=_bwd)


def softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    shifted = a.values - a.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_values = e / e.sum(axis=axis, keepdims=True)

    def _bwd(g):
        dot = (g * out_values).sum(axis=axis, keepdims=True)
        _accumulate(a, out_values * (g - dot))

    return Tensor(out_values, _parents=(a,), _backward=_bwd)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every differentiable ancestor of a scalar loss.

    Gradients accumulate across calls; zero parameter grads between steps.
    """
    if loss.values.size != 1:
        raise GraphError(f"backward needs a scalar loss node, got shape {loss.shape}")
    if not np.isfinite(loss.values).all():
        raise GraphError("backward on a non-finite loss")
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def gradients(loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Run backward and return a name -> gradient map for the given parameters."""
    for p in params.values():
        p.grad = None
    backward(loss)
    return {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.values))
        for name, p in params.items()
    }
