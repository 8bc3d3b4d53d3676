"""A small eager reverse-mode autodiff engine on numpy arrays.

Operations always compute eagerly. When a :class:`Tape` is active and an input
requires gradients, the operation is also recorded on the tape together with
its vector-Jacobian product; :meth:`Tape.gradient` replays the records in
reverse. Outside a tape nothing is recorded, which keeps evaluation cheap.

    >>> w = Tensor([0.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = sigmoid(w).sum()
    >>> float(tape.gradient(loss, [w])[0][0])
    0.25
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_ACTIVE: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "__weakref__")
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: str = "", dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, grad={self.requires_grad})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __matmul__(self, o):
        return matmul(self, o)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple
    vjp: object


@dataclass
class Tape:
    """Ordered record of primitive applications; inputs always precede outputs."""

    nodes: list = field(default_factory=list)

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def gradient(self, loss: Tensor, params) -> list[np.ndarray]:
        """Gradients of scalar ``loss`` w.r.t. each tensor in ``params``."""
        if loss.data.size != 1:
            raise ValueError("backward needs a scalar loss")
        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
        return [grads.get(id(p), np.zeros_like(p.data)) for p in params]


def backward(tape: Tape, loss: Tensor, params) -> list[np.ndarray]:
    return tape.gradient(loss, params)


def _t(x, like=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _record(out_data, inputs, vjp) -> Tensor:
    needs = any(isinstance(i, Tensor) and i.requires_grad for i in inputs)
    out = Tensor(out_data, requires_grad=needs and bool(_ACTIVE))
    if out.requires_grad:
        _ACTIVE[-1].nodes.append(_Node(out, tuple(inputs), vjp))
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a = _t(a, b if isinstance(b, Tensor) else None)
    b = _t(b, a)
    return _record(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a = _t(a, b if isinstance(b, Tensor) else None)
    b = _t(b, a)
    return _record(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product with broadcasting."""
    a = _t(a, b if isinstance(b, Tensor) else None)
    b = _t(b, a)
    return _record(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


hadamard = mul


def div(a, b) -> Tensor:
    a = _t(a, b if isinstance(b, Tensor) else None)
    b = _t(b, a)
    if np.any(b.data == 0):
        raise FloatingPointError("division by zero")
    out = a.data / b.data
    return _record(out, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)))


def scalar_mul(a, c: float) -> Tensor:
    a = _t(a)
    return _record(a.data * c, (a,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    if a.shape[-1] != b.shape[0 if b.ndim == 1 else -2]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def vjp(g):
        if b.ndim == 1:
            return np.multiply.outer(g, b.data), np.tensordot(g, a.data, axes=(range(g.ndim), range(g.ndim)))
        ga = g @ np.swapaxes(b.data, -1, -2) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return _record(a.data @ b.data, (a, b), vjp)


def transpose(a, axes=None) -> Tensor:
    a = _t(a)
    if axes is None:
        axes = tuple(range(a.ndim))[::-1]
    inv = np.argsort(axes)
    return _record(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def swapaxes(a, i, j) -> Tensor:
    axes = list(range(a.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return transpose(a, tuple(axes))


def reshape(a, shape) -> Tensor:
    a = _t(a)
    old = a.shape
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors, axis=-1) -> Tensor:
    ts = [_t(x) for x in tensors]
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]
    return _record(np.concatenate([t.data for t in ts], axis=axis), tuple(ts),
                   lambda g: tuple(np.split(g, splits, axis=axis)))


def getitem(a, idx) -> Tensor:
    """Basic slicing (``slice`` primitive)."""
    a = _t(a)

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _record(a.data[idx], (a,), vjp)


def sigmoid(a) -> Tensor:
    a = _t(a)
    x = a.data
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0, e) / (1.0 + e)
    return _record(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = _t(a)
    out = np.tanh(a.data)
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


def exp(a) -> Tensor:
    a = _t(a)
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = _t(a)
    if np.any(a.data <= 0):
        raise FloatingPointError("log of a non-positive value")
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def abs_(a) -> Tensor:
    """|x| with subgradient sign(0) = 0."""
    a = _t(a)
    return _record(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clamp(a, lo=None, hi=None) -> Tensor:
    """Clip into [lo, hi]; gradient passes only where the input is inside."""
    a = _t(a)
    out = np.clip(a.data, lo, hi)
    inside = np.ones(a.shape, dtype=bool)
    if lo is not None:
        inside &= a.data >= lo
    if hi is not None:
        inside &= a.data <= hi
    return _record(out, (a,), lambda g: (g * inside,))


def clamp_min(a, lo) -> Tensor:
    return clamp(a, lo, None)


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def reduce_sum(a, axis=None, keepdims=False) -> Tensor:
    a = _t(a)
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(out, (a,), vjp)


def reduce_mean(a, axis=None, keepdims=False) -> Tensor:
    a = _t(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    return scalar_mul(reduce_sum(a, axis, keepdims), 1.0 / count)


def reduce_var(a, axis=None, keepdims=False, ddof: int = 1) -> Tensor:
    a = _t(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    mu = a.data.mean(axis=axes, keepdims=True)
    centred = a.data - mu
    out = (centred**2).sum(axis=axes, keepdims=keepdims) / (count - ddof)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (g * 2.0 * centred / (count - ddof),)

    return _record(out, (a,), vjp)


def gather_min(a, index, pad_mask=None) -> Tensor:
    """``min`` of ``a[..., index[i, :]]`` over the last axis of ``index``.

    ``pad_mask`` marks valid entries of ``index``; padded entries are ignored.
    The gradient flows to the (first) arg-min of each group.
    """
    a = _t(a)
    vals = a.data[..., index]  # (..., m, w)
    if pad_mask is not None:
        vals = np.where(pad_mask, vals, np.inf)
    arg = np.argmin(vals, axis=-1)
    out = np.take_along_axis(vals, arg[..., None], axis=-1)[..., 0]
    src = index[np.arange(index.shape[0]), arg]  # (..., m) column of the minimum

    def vjp(g):
        full = np.zeros_like(a.data)
        lead = full.reshape(-1, a.shape[-1])
        np.add.at(lead, (np.arange(lead.shape[0])[:, None], src.reshape(lead.shape[0], -1)),
                  g.reshape(lead.shape[0], -1))
        return (full,)

    return _record(out, (a,), vjp)


PRIMITIVES = {
    "matmul": matmul, "add": add, "sub": sub, "hadamard": mul, "concat": concat,
    "slice": getitem, "sigmoid": sigmoid, "tanh": tanh, "exp": exp, "log": log,
    "abs": abs_, "scalar-mul": scalar_mul, "reduce-mean": reduce_mean,
    "reduce-var": reduce_var, "clamp-min": clamp_min, "clamp": clamp, "div": div,
    "reduce-sum": reduce_sum, "transpose": transpose, "reshape": reshape,
    "gather-min": gather_min,
}


def primitive_forward(name: str, *inputs, **kwargs) -> Tensor:
    try:
        fn = PRIMITIVES[name]
    except KeyError:
        raise ValueError(f"unknown primitive {name!r}") from None
    return fn(*inputs, **kwargs)


# --------------------------------------------------------------------------
# checking and optimisation
# --------------------------------------------------------------------------

def grad_check(f, theta, eps: float = 1e-5, coords=None) -> float:
    """Max over coordinates of |analytic - central difference| / max(1, |analytic|).

    ``f`` maps a Tensor to a scalar Tensor; ``theta`` is evaluated in float64.
    ``coords`` restricts the check to a subset of flat indices.
    """
    base = np.array(theta.data if isinstance(theta, Tensor) else theta, dtype=np.float64)
    x = Tensor(base.copy(), requires_grad=True)
    with Tape() as tape:
        loss = f(x)
    analytic = tape.gradient(loss, [x])[0].ravel()
    flat = base.ravel()
    idx = range(flat.size) if coords is None else coords
    worst = 0.0
    for i in idx:
        old = flat[i]
        flat[i] = old + eps
        fp = float(f(Tensor(base.copy())).data)
        flat[i] = old - eps
        fm = float(f(Tensor(base.copy())).data)
        flat[i] = old
        numeric = (fp - fm) / (2 * eps)
        worst = max(worst, abs(analytic[i] - numeric) / max(1.0, abs(analytic[i])))
    return worst


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState) -> AdamState:
    """One in-place Adam update with bias correction."""
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise ValueError("one gradient per parameter expected")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        g = g.astype(p.data.dtype, copy=False)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data -= update.astype(p.data.dtype, copy=False)
    return state


@dataclass
class PlateauState:
    lr: float = 1e-3
    factor: float = 0.1
    patience: int = 10
    min_delta: float = 1e-4
    floor: float = 1e-6
    best: float = math.inf
    bad_epochs: int = 0


def reduce_on_plateau(state: PlateauState, metric: float) -> float:
    """Update ``state`` with one epoch metric (lower is better); returns the new lr."""
    if not 0 < state.factor < 1 or state.patience < 1:
        raise ValueError("factor must lie in (0, 1) and patience be >= 1")
    if metric < state.best - state.min_delta:
        state.best = metric
        state.bad_epochs = 0
    else:
        state.bad_epochs += 1
        if state.bad_epochs >= state.patience:
            state.lr = max(state.floor, state.lr * state.factor)
            state.bad_epochs = 0
    return state.lr
