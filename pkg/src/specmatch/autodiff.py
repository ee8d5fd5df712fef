"""Minimal reverse-mode differentiation over numpy arrays.

Operations on :class:`Tensor` values that require gradients append a record
to their :class:`Tape`; :meth:`Tape.backward` replays the records in reverse
and accumulates adjoints. Everything is float64 and the accumulation order is
the reverse of recording order, so gradients are bit-reproducible.
"""

from __future__ import annotations

import numpy as np


class Tape:
    def __init__(self):
        self.records = []

    def __len__(self):
        return len(self.records)

    def record(self, out: "Tensor", inputs, backward):
        self.records.append((out, inputs, backward))

    def leaf(self, data, name=None) -> "Tensor":
        return Tensor(data, tape=self, requires_grad=True, name=name)

    def constant(self, data) -> "Tensor":
        return Tensor(data, tape=self, requires_grad=False)

    def backward(self, output: "Tensor", seed=1.0):
        """Accumulate d(output)/d(x) into ``x.grad`` for every recorded tensor."""
        for out, inputs, _ in self.records:
            out.grad = None
            for x in inputs:
                x.grad = None
        output.grad = np.broadcast_to(np.asarray(seed, dtype=np.float64), output.data.shape).copy()
        for out, inputs, backward in reversed(self.records):
            if out.grad is None:
                continue
            contribs = backward(out.grad)
            for x, g in zip(inputs, contribs):
                if g is None or not x.requires_grad:
                    continue
                g = _unbroadcast(g, x.data.shape)
                if x.grad is None:
                    x.grad = g.copy()
                else:
                    x.grad = x.grad + g
        return output


def _unbroadcast(g, shape):
    g = np.asarray(g, dtype=np.float64)
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, tape=None, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def T(self):
        return transpose(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other, self.tape)))

    def __rsub__(self, other):
        return add(as_tensor(other, self.tape), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return take(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)


def as_tensor(x, tape=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, tape=tape, requires_grad=False)


def _result(data, inputs, backward) -> Tensor:
    tape = next((x.tape for x in inputs if x.tape is not None), None)
    needs = any(x.requires_grad for x in inputs)
    out = Tensor(data, tape=tape, requires_grad=needs)
    if needs:
        if tape is None:
            raise RuntimeError("gradient-carrying tensor has no tape")
        tape.record(out, inputs, backward)
    return out


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def neg(a) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _result(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def power(a, p: float) -> Tensor:
    ad = a.data
    return _result(ad**p, (a,), lambda g: (g * p * ad ** (p - 1),))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _result(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def spmm(m, x) -> Tensor:
    """``m @ x`` for a constant (possibly scipy.sparse) matrix ``m``."""
    x = as_tensor(x)
    mt = m.T
    out = np.asarray(m @ x.data)
    return _result(out, (x,), lambda g: (np.asarray(mt @ g),))


def transpose(a) -> Tensor:
    return _result(a.data.T, (a,), lambda g: (g.T,))


def tsum(a, axis=None, keepdims=False) -> Tensor:
    shape = a.data.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def relu(a) -> Tensor:
    mask = a.data > 0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    ad = a.data
    return _result(np.log(ad), (a,), lambda g: (g / ad,))


def logsumexp(a, axis: int, mask=None) -> Tensor:
    """Stable log-sum-exp along ``axis``; entries where ``mask`` is False are excluded."""
    x = a.data
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    out = (np.log(s) + m).squeeze(axis)
    soft = e / s

    def backward(g):
        return (np.expand_dims(g, axis) * soft,)

    return _result(out, (a,), backward)


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def reshape(a, shape) -> Tensor:
    old = a.data.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def take(a, idx) -> Tensor:
    shape = a.data.shape

    def backward(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _result(a.data[idx], (a,), backward)


def row_normalize(a, min_norm: float = 1e-12) -> Tensor:
    """Divide each row by its Euclidean norm (exact quotient-rule backward)."""
    x = a.data
    norms = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    if np.any(norms < min_norm):
        bad = int(np.flatnonzero(norms[:, 0] < min_norm)[0])
        raise DegenerateEmbeddingError(f"row {bad} has norm below {min_norm:g}")
    y = x / norms

    def backward(g):
        dot = np.sum(g * y, axis=1, keepdims=True)
        return ((g - y * dot) / norms,)

    return _result(y, (a,), backward)


def inv_sqrt_or_zero(a) -> Tensor:
    """Elementwise ``x**-0.5`` with the convention ``0 -> 0``."""
    x = a.data
    pos = x > 0
    out = np.zeros_like(x)
    out[pos] = x[pos] ** -0.5

    def backward(g):
        gx = np.zeros_like(x)
        gx[pos] = -0.5 * g[pos] * x[pos] ** -1.5
        return (gx,)

    return _result(out, (a,), backward)


class DegenerateEmbeddingError(ValueError):
    pass
