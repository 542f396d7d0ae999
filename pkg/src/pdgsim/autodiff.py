"""Reverse-mode automatic differentiation over dense float64 matrices.

Every Value wraps a 2-D array. Operations record their parents and a
backward closure; backward() walks the graph once in reverse topological
order and accumulates (+=) into .grad, so shared parameters collect
contributions from every use site. Call zero_grads before each batch.

Double precision throughout: the finite-difference checks at 1e-3
tolerance are unreliable in single precision.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Iterator

import numpy as np


class ShapeError(Exception):
    def __init__(self, expected: str, found: str):
        super().__init__(f"expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class MaskError(Exception):
    pass


class NotScalar(Exception):
    pass


_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording (evaluation mode)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


class Value:
    """A node in the computation graph: a matrix plus an optional
    gradient accumulator and backward provenance."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError("a 2-D matrix", f"ndim={arr.ndim}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Value, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Value(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _accum(value: Value, grad: np.ndarray, owned: bool = False) -> None:
    """Add grad into value.grad. owned=True means the caller created the
    array solely for this call, so the first contribution may keep it
    without a defensive copy."""
    if not value.requires_grad:
        return
    if value.grad is None:
        value.grad = grad if owned else np.array(grad, dtype=np.float64)
    else:
        value.grad += grad


def _make(data: np.ndarray, parents: tuple[Value, ...],
          backward: Callable[[np.ndarray], None]) -> Value:
    out = Value(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def constant(data) -> Value:
    return Value(data, requires_grad=False)


def matmul(a: Value, b: Value) -> Value:
    if a.cols != b.rows:
        raise ShapeError(f"inner dims to agree ({a.shape} @ ?)",
                         f"{b.shape}")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accum(a, g @ b.data.T, owned=True)
        if b.requires_grad:
            _accum(b, a.data.T @ g, owned=True)

    return _make(a.data @ b.data, (a, b), backward)


def add(a: Value, b: Value) -> Value:
    """Elementwise addition; b may be a 1×m row broadcast over a's rows."""
    broadcast = b.rows == 1 and a.rows != 1 and a.cols == b.cols
    if not broadcast and a.shape != b.shape:
        raise ShapeError(f"{a.shape} (or 1×{a.cols} row)", f"{b.shape}")

    def backward(g: np.ndarray) -> None:
        _accum(a, g)
        if b.requires_grad:
            _accum(b, g.sum(axis=0, keepdims=True) if broadcast else g,
                   owned=broadcast)

    return _make(a.data + b.data, (a, b), backward)


def hadamard(a: Value, b: Value) -> Value:
    if a.shape != b.shape:
        raise ShapeError(f"{a.shape}", f"{b.shape}")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accum(a, g * b.data, owned=True)
        if b.requires_grad:
            _accum(b, g * a.data, owned=True)

    return _make(a.data * b.data, (a, b), backward)


def concat_cols(values: Iterable[Value]) -> Value:
    parts = tuple(values)
    if not parts:
        raise ShapeError("at least one matrix", "empty list")
    rows = parts[0].rows
    for p in parts:
        if p.rows != rows:
            raise ShapeError(f"{rows} rows", f"{p.rows} rows")
    offsets = np.cumsum([0] + [p.cols for p in parts])

    def backward(g: np.ndarray) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, g[:, lo:hi])

    return _make(np.hstack([p.data for p in parts]), parts, backward)


def row_slice(a: Value, start: int, stop: int) -> Value:
    if not 0 <= start < stop <= a.rows:
        raise ShapeError(f"row range within 0..{a.rows}", f"[{start}:{stop}]")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[start:stop, :] = g
            _accum(a, full, owned=True)

    return _make(a.data[start:stop, :].copy(), (a,), backward)


def sum_rows(a: Value) -> Value:
    """Sum over rows: n×m -> 1×m."""

    def backward(g: np.ndarray) -> None:
        _accum(a, np.broadcast_to(g, a.shape).copy(), owned=True)

    return _make(a.data.sum(axis=0, keepdims=True), (a,), backward)


def transpose(a: Value) -> Value:
    def backward(g: np.ndarray) -> None:
        _accum(a, g.T)

    return _make(a.data.T.copy(), (a,), backward)


def scale(a: Value, c: float) -> Value:
    def backward(g: np.ndarray) -> None:
        _accum(a, g * c, owned=True)

    return _make(a.data * c, (a,), backward)


def sigmoid(a: Value) -> Value:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g: np.ndarray) -> None:
        _accum(a, g * out * (1.0 - out), owned=True)

    return _make(out, (a,), backward)


def tanh(a: Value) -> Value:
    out = np.tanh(a.data)

    def backward(g: np.ndarray) -> None:
        _accum(a, g * (1.0 - out * out), owned=True)

    return _make(out, (a,), backward)


def leaky_relu(a: Value, slope: float) -> Value:
    # the branch at exactly 0 is the positive one (derivative 1)
    keep = a.data >= 0

    def backward(g: np.ndarray) -> None:
        _accum(a, g * np.where(keep, 1.0, slope), owned=True)

    return _make(np.where(keep, a.data, slope * a.data), (a,), backward)


def masked_row_softmax(scores: Value, mask: np.ndarray) -> Value:
    """Row-wise softmax over entries where mask == 1; masked-out entries
    are exactly 0. Every row must keep at least one entry."""
    if mask.shape != scores.shape:
        raise ShapeError(f"mask {scores.shape}", f"{mask.shape}")
    keep = mask > 0
    if not keep.any(axis=1).all():
        bad = int(np.flatnonzero(~keep.any(axis=1))[0])
        raise MaskError(f"mask row {bad} is all-zero")
    shifted = np.where(keep, scores.data, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        dot = (g * out).sum(axis=1, keepdims=True)
        _accum(scores, out * (g - dot), owned=True)

    return _make(out, (scores,), backward)


def log(a: Value) -> Value:
    out = np.log(a.data)

    def backward(g: np.ndarray) -> None:
        _accum(a, g / a.data, owned=True)

    return _make(out, (a,), backward)


def clamp(a: Value, lo: float, hi: float) -> Value:
    """Clamp values into [lo, hi]. The gradient passes straight through:
    the clamp only guards log() at saturation, and a zeroed gradient
    there would freeze confidently-wrong predictions."""

    def backward(g: np.ndarray) -> None:
        _accum(a, g)

    return _make(np.clip(a.data, lo, hi), (a,), backward)


def _topo_order(root: Value) -> list[Value]:
    order: list[Value] = []
    visited: set[int] = {id(root)}
    stack: list[tuple[Value, "object"]] = [(root, iter(root._parents))]
    while stack:
        node, parents = stack[-1]
        descended = False
        for parent in parents:  # resumes where the last visit left off
            if id(parent) not in visited:
                visited.add(id(parent))
                stack.append((parent, iter(parent._parents)))
                descended = True
                break
        if not descended:
            stack.pop()
            order.append(node)
    return order


def backward(loss: Value, params: "ParamStore | None" = None
             ) -> dict[str, np.ndarray] | None:
    """Reverse accumulation from a scalar loss. If a ParamStore is given,
    returns {name: gradient}, with zeros for parameters off the graph."""
    if loss.shape != (1, 1):
        raise NotScalar(f"loss must be 1x1, got {loss.shape}")
    loss.grad = np.ones((1, 1))
    for node in reversed(_topo_order(loss)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    if params is None:
        return None
    out: dict[str, np.ndarray] = {}
    for name, p in params.items():
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        out[name] = p.grad
    return out


class ParamStore:
    """Insertion-ordered collection of trainable Values; the stable
    iteration order keeps optimizer updates reproducible."""

    def __init__(self) -> None:
        self._store: dict[str, Value] = {}

    def add(self, name: str, data) -> Value:
        if name in self._store:
            raise ValueError(f"duplicate parameter {name!r}")
        value = data if isinstance(data, Value) else Value(data)
        value.requires_grad = True
        self._store[name] = value
        return value

    def __getitem__(self, name: str) -> Value:
        return self._store[name]

    def __contains__(self, name: str) -> bool:
        return name in self._store

    def __len__(self) -> int:
        return len(self._store)

    def names(self) -> list[str]:
        return list(self._store)

    def items(self) -> list[tuple[str, Value]]:
        return list(self._store.items())

    def zero_grads(self) -> None:
        for p in self._store.values():
            p.grad = np.zeros_like(p.data)


def grad_check(f: Callable[[], Value], params: ParamStore,
               h: float = 1e-4) -> float:
    """Compare reverse-mode gradients of f against central finite
    differences entry by entry; returns the max relative error with a
    max(|a|, |b|, 1e-8) denominator."""
    params.zero_grads()
    backward(f(), params)
    analytic = {name: p.grad.copy() for name, p in params.items()}
    worst = 0.0
    for name, p in params.items():
        for idx in np.ndindex(*p.data.shape):
            saved = p.data[idx]
            p.data[idx] = saved + h
            f_plus = float(f().data[0, 0])
            p.data[idx] = saved - h
            f_minus = float(f().data[0, 0])
            p.data[idx] = saved
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(analytic[name][idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
