"""Dense-tensor math with reverse-mode automatic differentiation.

Every operation the detector needs is implemented as a primitive with an
analytic backward rule.  There is no implicit broadcasting: operands of
elementwise ops must have identical shapes, and any broadcast has to be
spelled out with :func:`broadcast_to` so the backward rule of every node
stays shape-local.

Gradients accumulate across repeated ``backward`` calls; call
``zero_grad`` on the leaves between training steps.
"""

from __future__ import annotations

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an operation."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {self.shapes}")


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=DTYPE)
    return arr


class Tensor:
    """A dense n-dimensional array participating in a differentiation graph."""

    __slots__ = ("data", "requires_grad", "grad", "_op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape)
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Detached value (a copy; mutating it does not touch the graph)."""
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f", op={self._op}" if self._op != "leaf" else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # -- graph plumbing ------------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar loss to all requires_grad leaves."""
        if self.data.size != 1:
            raise ShapeError("backward: loss must be scalar", self.shape)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return shift(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return shift(self, -float(other))

    def __rsub__(self, other):
        return shift(neg(self), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def _make(data: np.ndarray, op: str, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._op = op
        out._parents = parents
        out._backward = backward
    return out


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


# -- elementwise primitives --------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _make(a.data + b.data, "add", (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return _make(a.data - b.data, "sub", (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _make(a.data * b.data, "mul", (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("div", a, b)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g / b.data)
        if b.requires_grad:
            b._accumulate(-g * a.data / (b.data * b.data))

    return _make(a.data / b.data, "div", (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        a._accumulate(-g)

    return _make(-a.data, "neg", (a,), bwd)


def scale(a: Tensor, s: float) -> Tensor:
    def bwd(g):
        a._accumulate(g * s)

    return _make(a.data * s, "scale", (a,), bwd)


def shift(a: Tensor, s: float) -> Tensor:
    def bwd(g):
        a._accumulate(g)

    return _make(a.data + s, "shift", (a,), bwd)


def relu(a: Tensor) -> Tensor:
    def bwd(g):
        a._accumulate(g * (a.data > 0))

    return _make(np.maximum(a.data, 0.0), "relu", (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        a._accumulate(g * y * (1.0 - y))

    return _make(y, "sigmoid", (a,), bwd)


def log(a: Tensor) -> Tensor:
    def bwd(g):
        a._accumulate(g / a.data)

    return _make(np.log(a.data), "log", (a,), bwd)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)

    def bwd(g):
        a._accumulate(g * y)

    return _make(y, "exp", (a,), bwd)


def abs_(a: Tensor) -> Tensor:
    def bwd(g):
        a._accumulate(g * np.sign(a.data))

    return _make(np.abs(a.data), "abs", (a,), bwd)


def inverse_sigmoid(a: Tensor, clamp_eps: float = 1e-5) -> Tensor:
    """Logit with the input clamped into [clamp_eps, 1-clamp_eps] first.

    The clamp keeps refinement finite at segment boundaries; outside the
    clamp range the derivative is zero.
    """
    xc = np.clip(a.data, clamp_eps, 1.0 - clamp_eps)
    inside = (a.data > clamp_eps) & (a.data < 1.0 - clamp_eps)

    def bwd(g):
        a._accumulate(g * inside / (xc * (1.0 - xc)))

    return _make(np.log(xc / (1.0 - xc)), "inverse_sigmoid", (a,), bwd)


# -- shape primitives --------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in (shape if isinstance(shape, (tuple, list)) else (shape,)))

    def bwd(g):
        a._accumulate(g.reshape(a.shape))

    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape) from None
    return _make(data, "reshape", (a,), bwd)


def transpose(a: Tensor, axes=None) -> Tensor:
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.data.ndim)))
    inv = np.argsort(axes)

    def bwd(g):
        a._accumulate(np.transpose(g, inv))

    return _make(np.transpose(a.data, axes), "transpose", (a,), bwd)


def broadcast_to(a: Tensor, shape) -> Tensor:
    """Explicit broadcast; backward sums over the expanded axes."""
    shape = tuple(int(s) for s in shape)
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError("broadcast_to", a.shape, shape) from None

    def bwd(g):
        extra = g.ndim - a.data.ndim
        if extra:
            g = g.sum(axis=tuple(range(extra)))
        keep = tuple(i for i, s in enumerate(a.shape) if s == 1 and g.shape[i] != 1)
        if keep:
            g = g.sum(axis=keep, keepdims=True)
        a._accumulate(g)

    return _make(np.ascontiguousarray(data), "broadcast_to", (a,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[t.shape for t in tensors]) from None
    return _make(data, "concat", tuple(tensors), bwd)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis; backward zero-pads."""
    if start < 0 or start + length > a.shape[axis]:
        raise ShapeError(f"narrow(axis={axis}, start={start}, length={length})", a.shape)
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        a._accumulate(full)

    return _make(a.data[idx].copy(), "narrow", (a,), bwd)


# -- contractions ------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _make(a.data @ b.data, "matmul", (a, b), bwd)


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix multiply over matching leading batch axes."""
    if (
        a.data.ndim != 3
        or b.data.ndim != 3
        or a.shape[0] != b.shape[0]
        or a.shape[2] != b.shape[1]
    ):
        raise ShapeError("bmm", a.shape, b.shape)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.transpose(0, 2, 1))
        if b.requires_grad:
            b._accumulate(a.data.transpose(0, 2, 1) @ g)

    return _make(a.data @ b.data, "bmm", (a, b), bwd)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def bwd(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g.reshape((1,) * a.data.ndim), a.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

    return _make(a.data.sum(axis=axis, keepdims=keepdims), "sum", (a,), bwd)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]
    return scale(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- normalizations ----------------------------------------------------------

def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"softmax(axis={axis})", a.shape)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        a._accumulate((g - (g * y).sum(axis=axis, keepdims=True)) * y)

    return _make(y, "softmax", (a,), bwd)


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean and unit variance (no affine)."""
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (a.data - mu) * inv

    def bwd(g):
        gm = g.mean(axis=-1, keepdims=True)
        gym = (g * y).mean(axis=-1, keepdims=True)
        a._accumulate((g - gm - y * gym) * inv)

    return _make(y, "layer_norm", (a,), bwd)


# -- fractional-coordinate sampling ------------------------------------------

def interp_rows(x: Tensor, u: Tensor, lo=None, hi=None) -> Tensor:
    """Linearly interpolate rows of ``x`` at fractional row coordinates ``u``.

    ``out[i] = (1-f)*x[floor(u_i)] + f*x[floor(u_i)+1]`` with rows outside the
    valid range contributing zero vectors.  ``lo``/``hi`` (inclusive, default
    the whole of ``x``) restrict the valid row range per sample, which lets a
    batch of sequences share one row-stacked buffer without bleeding across
    sequence boundaries.  Gradients flow to both the rows of ``x`` and to the
    coordinates ``u`` (slope = upper row minus lower row).
    """
    if x.data.ndim != 2 or u.data.ndim != 1:
        raise ShapeError("interp_rows", x.shape, u.shape)
    n_rows = x.shape[0]
    lo_arr = np.zeros(u.shape, dtype=np.int64) if lo is None else np.broadcast_to(
        np.asarray(lo, dtype=np.int64), u.shape
    )
    hi_arr = np.full(u.shape, n_rows - 1, dtype=np.int64) if hi is None else np.broadcast_to(
        np.asarray(hi, dtype=np.int64), u.shape
    )

    i0 = np.floor(u.data).astype(np.int64)
    f = u.data - i0
    i1 = i0 + 1
    v0 = (i0 >= lo_arr) & (i0 <= hi_arr)
    v1 = (i1 >= lo_arr) & (i1 <= hi_arr)
    c0 = np.clip(i0, 0, n_rows - 1)
    c1 = np.clip(i1, 0, n_rows - 1)
    r0 = x.data[c0] * v0[:, None]
    r1 = x.data[c1] * v1[:, None]
    out = (1.0 - f)[:, None] * r0 + f[:, None] * r1

    def bwd(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, c0[v0], (1.0 - f)[v0, None] * g[v0])
            np.add.at(gx, c1[v1], f[v1, None] * g[v1])
            x._accumulate(gx)
        if u.requires_grad:
            u._accumulate((g * (r1 - r0)).sum(axis=1))

    return _make(out, "interp_rows", (x, u), bwd)
