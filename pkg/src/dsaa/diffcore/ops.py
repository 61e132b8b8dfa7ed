"""Differentiable ops: pointwise math, reductions, shape ops, conv2d and
its transpose.

Python-number operands stay raw scalars (keeps float32 graphs float32
under NEP 50 promotion); numpy-array operands are treated as constants
unless wrapped in a Tensor. Gather/scatter style ops live in geom.py.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, make_node, _OPS


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    shape = tuple(shape)
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _raw(x):
    return x.data if isinstance(x, Tensor) else x


def _expit(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------- arithmetic

def add(a, b):
    ad, bd = _raw(a), _raw(b)
    out = ad + bd

    def bw(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if isinstance(b, Tensor) and b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return make_node(out, (a, b), bw, "add")


def sub(a, b):
    ad, bd = _raw(a), _raw(b)
    out = ad - bd

    def bw(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if isinstance(b, Tensor) and b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.shape))

    return make_node(out, (a, b), bw, "sub")


def neg(a):
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(-g)

    return make_node(-a.data, (a,), bw, "neg")


def mul(a, b):
    ad, bd = _raw(a), _raw(b)
    out = ad * bd

    def bw(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * bd, a.shape))
        if isinstance(b, Tensor) and b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * ad, b.shape))

    return make_node(out, (a, b), bw, "mul")


def reciprocal(a):
    """1/a. Caller guarantees a is bounded away from zero."""
    y = 1.0 / a.data

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(-g * y * y)

    return make_node(y, (a,), bw, "reciprocal")


def matmul(a, b):
    ad, bd = _raw(a), _raw(b)
    out = ad @ bd

    def bw(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a.accumulate_grad(_unbroadcast(g @ bd.swapaxes(-1, -2), a.shape))
        if isinstance(b, Tensor) and b.requires_grad:
            b.accumulate_grad(_unbroadcast(ad.swapaxes(-1, -2) @ g, b.shape))

    return make_node(out, (a, b), bw, "matmul")


def pow_const(a, p: float):
    """a**p for constant p >= 1 (zeros in a are fine for p >= 1)."""
    d = a.data
    y = d ** p

    def bw(g):
        if a.requires_grad:
            if p == 1.0:
                a.accumulate_grad(g)
            else:
                base = np.where(d == 0.0, 0.0, d ** (p - 1.0))
                a.accumulate_grad(g * p * base)

    return make_node(y, (a,), bw, "pow_const")


def sqrt(a):
    y = np.sqrt(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * 0.5 / y)

    return make_node(y, (a,), bw, "sqrt")


# ---------------------------------------------------------------- pointwise

def exp(a):
    y = np.exp(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * y)

    return make_node(y, (a,), bw, "exp")


def log(a):
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g / a.data)

    return make_node(np.log(a.data), (a,), bw, "log")


def sin(a):
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * np.cos(a.data))

    return make_node(np.sin(a.data), (a,), bw, "sin")


def cos(a):
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(-g * np.sin(a.data))

    return make_node(np.cos(a.data), (a,), bw, "cos")


def tanh(a):
    y = np.tanh(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - y * y))

    return make_node(y, (a,), bw, "tanh")


def relu(a):
    d = a.data
    y = np.maximum(d, 0.0)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * (d > 0.0))

    return make_node(y, (a,), bw, "relu")


def leaky_relu(a, alpha: float = 0.1):
    d = a.data
    y = np.where(d > 0.0, d, alpha * d)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * np.where(d > 0.0, 1.0, alpha))

    return make_node(y, (a,), bw, "leaky_relu")


def softplus(a):
    d = a.data
    y = np.logaddexp(np.zeros((), dtype=d.dtype), d)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * _expit(d))

    return make_node(y, (a,), bw, "softplus")


def sigmoid(a):
    y = _expit(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * y * (1.0 - y))

    return make_node(y, (a,), bw, "sigmoid")


def minimum(a, b):
    """Elementwise min; on ties the gradient goes to the first argument."""
    ad, bd = _raw(a), _raw(b)
    take_a = ad <= bd
    out = np.where(take_a, ad, bd)

    def bw(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * take_a, a.shape))
        if isinstance(b, Tensor) and b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * ~take_a, b.shape))

    return make_node(out, (a, b), bw, "minimum")


def maximum(a, b):
    """Elementwise max; on ties the gradient goes to the first argument."""
    ad, bd = _raw(a), _raw(b)
    take_a = ad >= bd
    out = np.where(take_a, ad, bd)

    def bw(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * take_a, a.shape))
        if isinstance(b, Tensor) and b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * ~take_a, b.shape))

    return make_node(out, (a, b), bw, "maximum")


def clamp(a, lo: float, hi: float):
    """Clip to [lo, hi]; zero subgradient on the saturated set."""
    d = a.data
    y = np.clip(d, lo, hi)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * ((d > lo) & (d < hi)))

    return make_node(y, (a,), bw, "clamp")


# ---------------------------------------------------------------- reductions

def sum_(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.accumulate_grad(np.broadcast_to(g, a.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate_grad(np.broadcast_to(g, a.shape).copy())

    return make_node(out, (a,), bw, "sum")


def mean_(a, axis=None, keepdims=False):
    out = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.data.size if axis is None else a.data.size // out.size

    def bw(g):
        if not a.requires_grad:
            return
        g = g / n
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate_grad(np.broadcast_to(g, a.shape).copy())

    return make_node(out, (a,), bw, "mean")


# ---------------------------------------------------------------- shape ops

def reshape(a, shape):
    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.shape))

    return make_node(a.data.reshape(shape), (a,), bw, "reshape")


def transpose(a, axes=None):
    def bw(g):
        if a.requires_grad:
            inv = None if axes is None else tuple(np.argsort(axes))
            a.accumulate_grad(np.transpose(g, inv))

    return make_node(np.transpose(a.data, axes), (a,), bw, "transpose")


def broadcast_to(a, shape):
    out = np.broadcast_to(a.data, shape).copy()

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))

    return make_node(out, (a,), bw, "broadcast_to")


def concat(tensors, axis=0):
    tensors = list(tensors)
    out = np.concatenate([_raw(t) for t in tensors], axis=axis)
    sizes = [(_raw(t)).shape[axis] for t in tensors]

    def bw(g):
        ofs = 0
        for t, s in zip(tensors, sizes):
            if isinstance(t, Tensor) and t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(ofs, ofs + s)
                t.accumulate_grad(g[tuple(sl)])
            ofs += s

    return make_node(out, tuple(tensors), bw, "concat")


def stack(tensors, axis=0):
    tensors = list(tensors)
    out = np.stack([_raw(t) for t in tensors], axis=axis)

    def bw(g):
        for i, t in enumerate(tensors):
            if isinstance(t, Tensor) and t.requires_grad:
                t.accumulate_grad(np.take(g, i, axis=axis))

    return make_node(out, tuple(tensors), bw, "stack")


def getitem(a, idx):
    out = a.data[idx]

    def bw(g):
        if a.requires_grad:
            dz = np.zeros_like(a.data)
            np.add.at(dz, idx, g)
            a.accumulate_grad(dz)

    return make_node(out, (a,), bw, "getitem")


# ------------------------------------------------------------- convolutions

def conv2d(x, w, b=None, stride: int = 1, padding: int = 0):
    """x [N,Ci,H,W], w [Co,Ci,kh,kw], b [Co] or None. Plain cross-correlation."""
    xd, wd = x.data, w.data
    N, Ci, H, W = xd.shape
    Co, Ci2, kh, kw = wd.shape
    assert Ci == Ci2, (Ci, Ci2)
    s, p = stride, padding
    xp = np.pad(xd, ((0, 0), (0, 0), (p, p), (p, p))) if p else xd
    Ho = (H + 2 * p - kh) // s + 1
    Wo = (W + 2 * p - kw) // s + 1

    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::s, ::s]                      # [N,Ci,Ho,Wo,kh,kw]
    col = win.transpose(0, 2, 3, 1, 4, 5).reshape(N * Ho * Wo, Ci * kh * kw)
    w2 = wd.reshape(Co, Ci * kh * kw)
    out2 = col @ w2.T
    if b is not None:
        out2 = out2 + b.data
    out = out2.reshape(N, Ho, Wo, Co).transpose(0, 3, 1, 2)

    def bw(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(N * Ho * Wo, Co)
        if b is not None and b.requires_grad:
            b.accumulate_grad(g2.sum(axis=0))
        if w.requires_grad:
            w.accumulate_grad((g2.T @ col).reshape(wd.shape))
        if x.requires_grad:
            dcol = (g2 @ w2).reshape(N, Ho, Wo, Ci, kh, kw)
            dxp = np.zeros_like(xp)
            for u in range(kh):
                for v in range(kw):
                    dxp[:, :, u:u + s * Ho:s, v:v + s * Wo:s] += \
                        dcol[:, :, :, :, u, v].transpose(0, 3, 1, 2)
            x.accumulate_grad(dxp[:, :, p:p + H, p:p + W] if p else dxp)

    parents = (x, w) if b is None else (x, w, b)
    return make_node(out, parents, bw, "conv2d")


def conv_transpose2d(x, w, b=None, stride: int = 2, padding: int = 1):
    """Adjoint of conv2d. x [N,Ci,H,W], w [Ci,Co,kh,kw].

    With kh=kw=4, stride=2, padding=1 this is an exact 2x upsampler.
    """
    xd, wd = x.data, w.data
    N, Ci, H, W = xd.shape
    Ci2, Co, kh, kw = wd.shape
    assert Ci == Ci2, (Ci, Ci2)
    s, p = stride, padding
    Hf = (H - 1) * s + kh
    Wf = (W - 1) * s + kw

    xw = np.tensordot(xd, wd, axes=([1], [0]))     # [N,H,W,Co,kh,kw]
    yf = np.zeros((N, Co, Hf, Wf), dtype=xd.dtype)
    for u in range(kh):
        for v in range(kw):
            yf[:, :, u:u + s * (H - 1) + 1:s, v:v + s * (W - 1) + 1:s] += \
                xw[:, :, :, :, u, v].transpose(0, 3, 1, 2)
    out = yf[:, :, p:Hf - p, p:Wf - p] if p else yf
    if b is not None:
        out = out + b.data[None, :, None, None]

    def bw(g):
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2, 3)))
        gf = np.zeros((N, Co, Hf, Wf), dtype=g.dtype)
        if p:
            gf[:, :, p:Hf - p, p:Wf - p] = g
        else:
            gf = g
        dxw = np.empty((N, H, W, Co, kh, kw), dtype=g.dtype)
        for u in range(kh):
            for v in range(kw):
                dxw[:, :, :, :, u, v] = \
                    gf[:, :, u:u + s * (H - 1) + 1:s, v:v + s * (W - 1) + 1:s].transpose(0, 2, 3, 1)
        if x.requires_grad:
            dx = np.tensordot(dxw, wd, axes=([3, 4, 5], [1, 2, 3]))   # [N,H,W,Ci]
            x.accumulate_grad(dx.transpose(0, 3, 1, 2))
        if w.requires_grad:
            xt = xd.transpose(0, 2, 3, 1)
            dw = np.tensordot(xt, dxw, axes=([0, 1, 2], [0, 1, 2]))   # [Ci,Co,kh,kw]
            w.accumulate_grad(dw)

    parents = (x, w) if b is None else (x, w, b)
    return make_node(out, parents, bw, "conv_transpose2d")


def linear(x, w, b=None):
    """x [.., din] @ w [din, dout] (+ b [dout])."""
    y = matmul(x, w)
    return add(y, b) if b is not None else y


_OPS.update({
    "add": add, "sub": sub, "mul": mul, "neg": neg, "matmul": matmul,
    "getitem": getitem, "reshape": reshape, "transpose": transpose,
    "sum": sum_, "mean": mean_,
})
