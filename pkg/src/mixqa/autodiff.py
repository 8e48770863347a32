"""Reverse-mode automatic differentiation over dense float64 arrays.

A small define-by-run tape: every operation returns a new `Tensor` node
holding a closure that routes the output gradient back to its inputs.
Values are always `numpy.float64`; shapes are 0-d scalars, 1-d vectors or
2-d matrices. There is no implicit broadcasting beyond what individual
ops document.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """A node in the computation graph wrapping an ndarray."""

    __slots__ = ("values", "grad", "parents", "_push", "requires_grad")

    def __init__(
        self,
        values,
        parents: tuple = (),
        push: Callable[[np.ndarray], None] | None = None,
        requires_grad: bool | None = None,
    ):
        self.values = np.asarray(values, dtype=np.float64)
        self.parents = parents
        self._push = push
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def item(self) -> float:
        return float(self.values)

    def accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def backward(self) -> None:
        """Backpropagate from a scalar output through the whole graph."""
        if self.values.size != 1:
            raise ValueError(f"backward() needs a scalar output, got shape {self.shape}")
        order = _topo_order(self)
        self.accumulate(np.ones_like(self.values))
        for node in reversed(order):
            if node._push is not None and node.grad is not None:
                node._push(node.grad)
                if not isinstance(node, Parameter):
                    node.grad = None  # free intermediate buffers

    # light sugar; heavy lifting stays in the module-level ops
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """Trainable leaf tensor with a persistent gradient buffer and Adam state."""

    __slots__ = ("name", "m", "v", "step_count")

    def __init__(self, name: str, values):
        super().__init__(values, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.values)
        self.m = np.zeros_like(self.values)
        self.v = np.zeros_like(self.values)
        self.step_count = 0

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


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
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


def _shape_error(op: str, *shapes) -> ValueError:
    return ValueError(f"{op}: incompatible shapes {' and '.join(str(s) for s in shapes)}")


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape and a.values.size != 1 and b.values.size != 1:
        raise _shape_error("add", a.shape, b.shape)
    out_values = a.values + b.values

    def push(g):
        a.accumulate(g if a.shape == out_values.shape else g.sum())
        b.accumulate(g if b.shape == out_values.shape else g.sum())

    return Tensor(out_values, (a, b), push)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; one operand may be a scalar tensor."""
    if a.shape != b.shape and a.values.size != 1 and b.values.size != 1:
        raise _shape_error("mul", a.shape, b.shape)
    out_values = a.values * b.values

    def push(g):
        ga = g * b.values
        gb = g * a.values
        a.accumulate(ga if a.shape == out_values.shape else ga.sum())
        b.accumulate(gb if b.shape == out_values.shape else gb.sum())

    return Tensor(out_values, (a, b), push)


def scale(a: Tensor, c: float) -> Tensor:
    def push(g):
        a.accumulate(g * c)

    return Tensor(a.values * c, (a,), push)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product with numpy semantics for 1-d and 2-d operands."""
    av, bv = a.values, b.values
    if av.ndim == 0 or bv.ndim == 0:
        raise _shape_error("matmul", a.shape, b.shape)
    if av.shape[-1] != bv.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)
    out_values = av @ bv

    def push(g):
        if av.ndim == 1 and bv.ndim == 1:  # dot product, g scalar
            a.accumulate(g * bv)
            b.accumulate(g * av)
        elif av.ndim == 2 and bv.ndim == 2:
            a.accumulate(g @ bv.T)
            b.accumulate(av.T @ g)
        elif av.ndim == 2 and bv.ndim == 1:
            a.accumulate(np.outer(g, bv))
            b.accumulate(av.T @ g)
        else:  # 1-d @ 2-d
            a.accumulate(bv @ g)
            b.accumulate(np.outer(av, g))

    return Tensor(out_values, (a, b), push)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 1 or b.values.ndim != 1:
        raise _shape_error("dot", a.shape, b.shape)
    return matmul(a, b)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ValueError("concat: empty input")
    out_values = np.concatenate([p.values for p in parts], axis=axis)
    sizes = [p.values.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def push(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            p.accumulate(g[lo:hi] if axis == 0 else g[:, lo:hi])

    return Tensor(out_values, tuple(parts), push)


def stack_scalars(parts: Sequence[Tensor]) -> Tensor:
    out_values = np.array([float(p.values) for p in parts])

    def push(g):
        for i, p in enumerate(parts):
            p.accumulate(np.asarray(g[i]))

    return Tensor(out_values, tuple(parts), push)


def rowsum(a: Tensor) -> Tensor:
    """Sum each row of a matrix, returning a vector."""
    if a.values.ndim != 2:
        raise _shape_error("rowsum", a.shape)
    out_values = a.values.sum(axis=1)

    def push(g):
        a.accumulate(np.repeat(g[:, None], a.values.shape[1], axis=1))

    return Tensor(out_values, (a,), push)


def colsum(a: Tensor) -> Tensor:
    if a.values.ndim != 2:
        raise _shape_error("colsum", a.shape)
    out_values = a.values.sum(axis=0)

    def push(g):
        a.accumulate(np.repeat(g[None, :], a.values.shape[0], axis=0))

    return Tensor(out_values, (a,), push)


def sum_all(a: Tensor) -> Tensor:
    def push(g):
        a.accumulate(np.full_like(a.values, float(g)))

    return Tensor(a.values.sum(), (a,), push)


def take_row(a: Tensor, i: int) -> Tensor:
    if a.values.ndim != 2:
        raise _shape_error("take_row", a.shape)

    def push(g):
        buf = np.zeros_like(a.values)
        buf[i] = g
        a.accumulate(buf)

    return Tensor(a.values[i], (a,), push)


def gather_rows(table: Tensor, idx: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Row lookup `table[idx]`; rows where ``mask`` is 0 come out as zeros.

    The mask also silences the corresponding gradient rows, so masked
    positions never touch the table.
    """
    idx = np.asarray(idx, dtype=np.intp)
    out_values = table.values[idx]
    if mask is not None:
        out_values = out_values * mask[:, None]

    def push(g):
        if not table.requires_grad:
            return
        gm = g if mask is None else g * mask[:, None]
        if table.grad is None:
            table.grad = np.zeros_like(table.values)
        np.add.at(table.grad, idx, gm)

    return Tensor(out_values, (table,), push)


def gather_sum(x: Tensor, idx: np.ndarray) -> Tensor:
    """Sum of selected entries of a vector; empty selections give 0."""
    if x.values.ndim != 1:
        raise _shape_error("gather_sum", x.shape)
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size == 0:
        return constant(0.0)

    def push(g):
        gx = np.zeros_like(x.values)
        np.add.at(gx, idx, float(g))
        x.accumulate(gx)

    return Tensor(x.values[idx].sum(), (x,), push)


def reciprocal(a: Tensor) -> Tensor:
    out_values = 1.0 / a.values

    def push(g):
        a.accumulate(-g * out_values * out_values)

    return Tensor(out_values, (a,), push)


def scatter_sum(x: Tensor, slots: np.ndarray, n: int) -> Tensor:
    """Sum entries of a vector into ``n`` buckets; slot -1 entries are dropped."""
    if x.values.ndim != 1:
        raise _shape_error("scatter_sum", x.shape)
    slots = np.asarray(slots, dtype=np.intp)
    valid = slots >= 0
    out_values = np.zeros(n)
    np.add.at(out_values, slots[valid], x.values[valid])

    def push(g):
        gx = np.zeros_like(x.values)
        gx[valid] = g[slots[valid]]
        x.accumulate(gx)

    return Tensor(out_values, (x,), push)


# ---------------------------------------------------------------------------
# nonlinearities


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    out_values = _sigmoid(a.values)

    def push(g):
        a.accumulate(g * out_values * (1.0 - out_values))

    return Tensor(out_values, (a,), push)


def tanh(a: Tensor) -> Tensor:
    out_values = np.tanh(a.values)

    def push(g):
        a.accumulate(g * (1.0 - out_values * out_values))

    return Tensor(out_values, (a,), push)


def softmax(a: Tensor) -> Tensor:
    """Stable softmax of a vector (max-subtracted before exponentiation)."""
    if a.values.ndim != 1 or a.values.size == 0:
        raise ValueError(f"softmax: need a non-empty vector, got shape {a.shape}")
    z = a.values - a.values.max()
    e = np.exp(z)
    out_values = e / e.sum()

    def push(g):
        inner = g - float(g @ out_values)
        a.accumulate(out_values * inner)

    return Tensor(out_values, (a,), push)


def log(a: Tensor, floor: float = 0.0) -> Tensor:
    """Natural log; values at or below ``floor`` are clamped and get zero gradient."""
    v = a.values
    clamped = np.maximum(v, floor) if floor > 0.0 else v
    out_values = np.log(clamped)

    def push(g):
        gx = g / clamped
        if floor > 0.0:
            gx = np.where(v > floor, gx, 0.0)
        a.accumulate(gx)

    return Tensor(out_values, (a,), push)


def power_int(a: Tensor, d: int) -> Tensor:
    if d < 1:
        raise ValueError(f"power_int: exponent must be >= 1, got {d}")
    out_values = a.values**d

    def push(g):
        a.accumulate(g * d * a.values ** (d - 1))

    return Tensor(out_values, (a,), push)


def max_reduce(a: Tensor) -> Tensor:
    """Maximum entry of a vector; gradient flows to the first argmax."""
    if a.values.ndim != 1 or a.values.size == 0:
        raise ValueError(f"max_reduce: need a non-empty vector, got shape {a.shape}")
    k = int(np.argmax(a.values))

    def push(g):
        buf = np.zeros_like(a.values)
        buf[k] = g
        a.accumulate(buf)

    return Tensor(a.values[k], (a,), push)


def l2_normalize(a: Tensor) -> Tensor:
    """x / ||x||, with a zero-norm input mapped to the zero vector."""
    if a.values.ndim != 1:
        raise _shape_error("l2_normalize", a.shape)
    norm = float(np.linalg.norm(a.values))
    if norm == 0.0:
        return Tensor(np.zeros_like(a.values), (a,), lambda g: None)
    out_values = a.values / norm

    def push(g):
        a.accumulate((g - out_values * float(out_values @ g)) / norm)

    return Tensor(out_values, (a,), push)


def l2_normalize_rows(a: Tensor) -> Tensor:
    """Row-wise L2 normalization of a matrix; zero rows stay zero."""
    if a.values.ndim != 2:
        raise _shape_error("l2_normalize_rows", a.shape)
    norms = np.linalg.norm(a.values, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    out_values = a.values / safe[:, None]

    def push(g):
        proj = (out_values * g).sum(axis=1)
        gx = (g - out_values * proj[:, None]) / safe[:, None]
        gx[norms == 0.0] = 0.0
        a.accumulate(gx)

    return Tensor(out_values, (a,), push)


def bce_with_logit(z: Tensor, target: float) -> Tensor:
    """Binary cross entropy on a scalar logit, computed in a stable form."""
    zv = float(z.values)
    out = max(zv, 0.0) - zv * target + np.log1p(np.exp(-abs(zv)))

    def push(g):
        z.accumulate(np.asarray(float(g) * (_sigmoid(np.asarray(zv)) - target)))

    return Tensor(out, (z,), push)


def collect_parameters(objs: Iterable) -> list[Parameter]:
    """Flatten Parameters out of a mix of Parameters and objects with .parameters()."""
    out: list[Parameter] = []
    for obj in objs:
        if isinstance(obj, Parameter):
            out.append(obj)
        else:
            out.extend(obj.parameters())
    return out
