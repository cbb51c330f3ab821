"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records its inputs and a backward closure when any input
requires gradients; ``backward`` replays the closures in reverse topological
order. Broadcasting is restricted to scalar-with-tensor; anything else needs
an explicit ``reshape``/``broadcast_to``, which keeps every backward rule a
direct transcription of its forward definition.

Gradient policy: each ``backward`` call first clears ``grad`` on the reachable
subgraph, then accumulates, so a graph may be differentiated repeatedly
without stale accumulation. Evaluation is deterministic: identical inputs
produce bit-identical values and gradients.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import erf

from ..errors import ShapeError, UsageError

_ids = itertools.count()


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "parents", "_vjp", "tape_id")

    def __init__(self, data, requires_grad=False, op="leaf", parents=()):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = op
        self.parents = tuple(parents)
        self._vjp = None
        self.tape_id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, op="detach")

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # Operator sugar; every route goes through the module-level ops below.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)

    def backward(self):
        backward(self)


def _lift(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def constant(data) -> Tensor:
    return _lift(data)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True, op="param")


def _node(data, op, parents, vjp) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires, op=op, parents=parents if requires else ())
    if requires:
        out._vjp = vjp
    return out


def _topo(root: Tensor) -> list[Tensor]:
    order = []
    seen = set()
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
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar; populates ``grad`` on reachable tensors."""
    if loss.data.shape != ():
        raise UsageError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        raise UsageError("loss is not connected to any tensor that requires grad")
    order = _topo(loss)
    for node in order:
        node.grad = np.zeros_like(node.data)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._vjp is not None:
            node._vjp(node.grad)


def gradients(loss: Tensor, wrt) -> list[np.ndarray]:
    """Backward plus gradient collection for a list of tensors."""
    backward(loss)
    out = []
    for t in wrt:
        out.append(np.zeros_like(t.data) if t.grad is None else t.grad)
    return out


def first_nonfinite(root: Tensor) -> Tensor | None:
    """Earliest-recorded tensor under ``root`` holding a NaN/Inf, if any."""
    nodes = []
    seen = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        stack.extend(node.parents)
    for node in sorted(nodes, key=lambda n: n.tape_id):
        if not np.all(np.isfinite(node.data)):
            return node
    return None


def _binary_shapes(a: Tensor, b: Tensor, op: str):
    if a.data.shape == b.data.shape:
        return
    if a.data.shape == () or b.data.shape == ():
        return
    raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ (only scalar-with-tensor broadcast is allowed)")


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    if shape == ():
        return np.asarray(grad.sum())
    return grad


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "add")

    def vjp(g):
        if a.requires_grad:
            a.grad += _reduce_to(g, a.data.shape)
        if b.requires_grad:
            b.grad += _reduce_to(g, b.data.shape)

    return _node(a.data + b.data, "add", (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "sub")

    def vjp(g):
        if a.requires_grad:
            a.grad += _reduce_to(g, a.data.shape)
        if b.requires_grad:
            b.grad -= _reduce_to(g, b.data.shape)

    return _node(a.data - b.data, "sub", (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "mul")

    def vjp(g):
        if a.requires_grad:
            a.grad += _reduce_to(g * b.data, a.data.shape)
        if b.requires_grad:
            b.grad += _reduce_to(g * a.data, b.data.shape)

    return _node(a.data * b.data, "mul", (a, b), vjp)


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "div")

    def vjp(g):
        if a.requires_grad:
            a.grad += _reduce_to(g / b.data, a.data.shape)
        if b.requires_grad:
            b.grad += _reduce_to(-g * a.data / (b.data * b.data), b.data.shape)

    return _node(a.data / b.data, "div", (a, b), vjp)


def neg(a) -> Tensor:
    a = _lift(a)

    def vjp(g):
        if a.requires_grad:
            a.grad -= g

    return _node(-a.data, "neg", (a,), vjp)


def matmul(a, b) -> Tensor:
    """Matrix product; leading batch dims must match, or the right side is 2-D."""
    a, b = _lift(a), _lift(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ, {a.data.shape} @ {b.data.shape}")
    if b.data.ndim > 2 and a.data.shape[:-2] != b.data.shape[:-2]:
        raise ShapeError(f"matmul: batch dims differ, {a.data.shape} @ {b.data.shape}")

    def vjp(g):
        if a.requires_grad:
            a.grad += g @ np.swapaxes(b.data, -1, -2)
        if b.requires_grad:
            if b.data.ndim == 2:
                a2 = a.data.reshape(-1, a.data.shape[-1])
                g2 = g.reshape(-1, g.shape[-1])
                b.grad += a2.T @ g2
            else:
                b.grad += np.swapaxes(a.data, -1, -2) @ g

    return _node(a.data @ b.data, "matmul", (a, b), vjp)


def exp(a) -> Tensor:
    a = _lift(a)
    out_data = np.exp(a.data)

    def vjp(g):
        if a.requires_grad:
            a.grad += g * out_data

    return _node(out_data, "exp", (a,), vjp)


def sqrt(a) -> Tensor:
    a = _lift(a)
    out_data = np.sqrt(a.data)

    def vjp(g):
        if a.requires_grad:
            a.grad += g * (0.5 / out_data)

    return _node(out_data, "sqrt", (a,), vjp)


def relu(a) -> Tensor:
    a = _lift(a)

    def vjp(g):
        if a.requires_grad:
            a.grad += g * (a.data > 0.0)

    return _node(np.maximum(a.data, 0.0), "relu", (a,), vjp)


_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(a) -> Tensor:
    """Exact Gaussian error linear unit, x * Phi(x)."""
    a = _lift(a)
    cdf = 0.5 * (1.0 + erf(a.data / _SQRT2))

    def vjp(g):
        if a.requires_grad:
            pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.data * a.data)
            a.grad += g * (cdf + a.data * pdf)

    return _node(a.data * cdf, "gelu", (a,), vjp)


def softmax(a, axis=-1) -> Tensor:
    a = _lift(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g):
        if a.requires_grad:
            inner = np.sum(g * out_data, axis=axis, keepdims=True)
            a.grad += out_data * (g - inner)

    return _node(out_data, "softmax", (a,), vjp)


def layer_norm(a, axis=-1, eps=1e-5) -> Tensor:
    """Normalize to zero mean / unit variance along ``axis`` (no affine part)."""
    a = _lift(a)
    mean_ = np.mean(a.data, axis=axis, keepdims=True)
    centered = a.data - mean_
    var = np.mean(centered * centered, axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def vjp(g):
        if a.requires_grad:
            gm = np.mean(g, axis=axis, keepdims=True)
            gx = np.mean(g * xhat, axis=axis, keepdims=True)
            a.grad += inv_std * (g - gm - xhat * gx)

    return _node(xhat, "layer_norm", (a,), vjp)


def concat(tensors, axis=0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    if not tensors:
        raise UsageError("concat requires at least one tensor")
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(start, stop)
                t.grad += g[tuple(index)]

    return _node(np.concatenate([t.data for t in tensors], axis=axis), "concat", tuple(tensors), vjp)


def stack(tensors, axis=0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    expanded = [reshape(t, t.data.shape[:axis] + (1,) + t.data.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


def slice_(a, key) -> Tensor:
    """Basic indexing (ints/slices); gradient scatters back into a zero tensor."""
    a = _lift(a)

    def vjp(g):
        if a.requires_grad:
            scat = np.zeros_like(a.data)
            scat[key] = g
            a.grad += scat

    return _node(a.data[key], "slice", (a,), vjp)


def reshape(a, shape) -> Tensor:
    a = _lift(a)
    old = a.data.shape

    def vjp(g):
        if a.requires_grad:
            a.grad += g.reshape(old)

    return _node(a.data.reshape(shape), "reshape", (a,), vjp)


def swapaxes(a, ax1, ax2) -> Tensor:
    a = _lift(a)

    def vjp(g):
        if a.requires_grad:
            a.grad += np.swapaxes(g, ax1, ax2)

    return _node(np.swapaxes(a.data, ax1, ax2), "swapaxes", (a,), vjp)


def broadcast_to(a, shape) -> Tensor:
    """Explicit broadcast; gradient sums over the expanded axes."""
    a = _lift(a)
    shape = tuple(shape)
    old = a.data.shape
    try:
        out_data = np.broadcast_to(a.data, shape)
    except ValueError as e:
        raise ShapeError(f"broadcast_to: cannot broadcast {old} to {shape}") from e
    pad = len(shape) - len(old)
    summed_axes = tuple(range(pad)) + tuple(
        pad + i for i, (o, n) in enumerate(zip(old, shape[pad:])) if o == 1 and n != 1
    )

    def vjp(g):
        if a.requires_grad:
            red = g.sum(axis=summed_axes, keepdims=False) if summed_axes else g
            a.grad += red.reshape(old)

    return _node(out_data, "broadcast_to", (a,), vjp)


def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(a, axis=None) -> Tensor:
    a = _lift(a)
    axes = _normalize_axes(axis, a.data.ndim)

    def vjp(g):
        if a.requires_grad:
            ge = np.expand_dims(g, axes) if axes else g
            a.grad += np.broadcast_to(ge, a.data.shape)

    return _node(a.data.sum(axis=axes if axes else None), "sum", (a,), vjp)


def mean(a, axis=None) -> Tensor:
    a = _lift(a)
    axes = _normalize_axes(axis, a.data.ndim)
    count = int(np.prod([a.data.shape[ax] for ax in axes])) if axes else a.data.size

    def vjp(g):
        if a.requires_grad:
            ge = np.expand_dims(g, axes) if axes else g
            a.grad += np.broadcast_to(ge, a.data.shape) / count

    return _node(a.data.mean(axis=axes if axes else None), "mean", (a,), vjp)


def squared_error(a, b) -> Tensor:
    """Scalar sum of squared differences."""
    a, b = _lift(a), _lift(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"squared_error: shapes {a.data.shape} and {b.data.shape} differ")
    diff = a.data - b.data

    def vjp(g):
        if a.requires_grad:
            a.grad += g * 2.0 * diff
        if b.requires_grad:
            b.grad -= g * 2.0 * diff

    return _node(np.asarray((diff * diff).sum()), "squared_error", (a, b), vjp)


def min_select(a, axis=0) -> Tensor:
    """Minimum along ``axis``; gradient flows only to the selected entries.

    Ties resolve to the lowest index, so selection is deterministic.
    """
    a = _lift(a)
    axis = axis % a.data.ndim
    idx = np.argmin(a.data, axis=axis)
    out_data = np.min(a.data, axis=axis)

    def vjp(g):
        if a.requires_grad:
            scat = np.zeros_like(a.data)
            np.put_along_axis(scat, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
            a.grad += scat

    out = _node(out_data, "min_select", (a,), vjp)
    return out


def max_select(a, axis=0) -> Tensor:
    """Maximum along ``axis``; mirror of :func:`min_select`."""
    a = _lift(a)
    axis = axis % a.data.ndim
    idx = np.argmax(a.data, axis=axis)
    out_data = np.max(a.data, axis=axis)

    def vjp(g):
        if a.requires_grad:
            scat = np.zeros_like(a.data)
            np.put_along_axis(scat, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
            a.grad += scat

    return _node(out_data, "max_select", (a,), vjp)


def take(a, indices, axis=0) -> Tensor:
    """Integer-array gather along one axis; scatter-add on the way back."""
    a = _lift(a)
    indices = np.asarray(indices, dtype=np.int64)
    axis = axis % a.data.ndim

    def vjp(g):
        if a.requires_grad:
            scat = np.zeros_like(a.data)
            moved_scat = np.moveaxis(scat, axis, 0)
            g_front = np.moveaxis(g, tuple(range(axis, axis + indices.ndim)), tuple(range(indices.ndim)))
            np.add.at(moved_scat, indices.reshape(-1), g_front.reshape((-1,) + moved_scat.shape[1:]))
            a.grad += scat

    return _node(np.take(a.data, indices, axis=axis), "take", (a,), vjp)


def gather_rows(table, indices) -> Tensor:
    """Row lookup ``table[indices]`` for a 2-D table; unreferenced rows get zero grad."""
    table = _lift(table)
    if table.data.ndim != 2:
        raise ShapeError(f"gather_rows: table must be 2-D, got {table.data.shape}")
    indices = np.asarray(indices, dtype=np.int64)

    def vjp(g):
        if table.requires_grad:
            scat = np.zeros_like(table.data)
            np.add.at(scat, indices.reshape(-1), g.reshape(-1, table.data.shape[1]))
            table.grad += scat

    return _node(table.data[indices], "gather_rows", (table,), vjp)


def cumsum(a, axis=0) -> Tensor:
    a = _lift(a)
    axis = axis % a.data.ndim

    def vjp(g):
        if a.requires_grad:
            flipped = np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis)
            a.grad += flipped

    return _node(np.cumsum(a.data, axis=axis), "cumsum", (a,), vjp)


def multi_head_attention(q, k, v, wq, wk, wv, wo, heads: int) -> Tensor:
    """Projected multi-head scaled dot-product attention.

    ``q``/``k``/``v`` are (..., T, d) token stacks with identical leading dims;
    the four weights are (d, d). Composite of the primitives above, so its
    gradient needs no dedicated rule.
    """
    d = q.data.shape[-1]
    if d % heads != 0:
        raise ShapeError(f"attention width {d} not divisible by {heads} heads")
    dh = d // heads

    def split_heads(x):
        t = x.data.shape[-2]
        lead = x.data.shape[:-2]
        x = reshape(x, lead + (t, heads, dh))
        return swapaxes(x, -3, -2)  # (..., heads, T, dh)

    qh = split_heads(matmul(q, wq))
    kh = split_heads(matmul(k, wk))
    vh = split_heads(matmul(v, wv))
    scores = mul(matmul(qh, swapaxes(kh, -1, -2)), 1.0 / math.sqrt(dh))
    attn = softmax(scores, axis=-1)
    ctx = matmul(attn, vh)  # (..., heads, Tq, dh)
    ctx = swapaxes(ctx, -3, -2)
    lead = ctx.data.shape[:-3]
    tq = ctx.data.shape[-3]
    merged = reshape(ctx, lead + (tq, d))
    return matmul(merged, wo)
