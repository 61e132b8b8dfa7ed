"""Gather/scatter style differentiable ops used by the geometry pipeline:
bilinear texture sampling, windowed scatter-add (rasterizer accumulation),
blend-skinning application, and small interpolation-matrix upsamplers.

All scatter paths go through np.add.at, which applies updates in index
order, so repeated runs are bit-identical.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, make_node
from . import ops


def texture_sample(tex: Tensor, uv):
    """Bilinear sample of tex [C,H,W] at uv [M,2] in [0,1]^2.

    Texel centers sit at ((j+0.5)/W, (i+0.5)/H); coordinates clamp to the
    border. Returns [M,C]. Differentiable in both tex and uv (uv gradient
    is zero where the clamp saturates).
    """
    uvd = uv.data if isinstance(uv, Tensor) else np.asarray(uv)
    C, H, W = tex.shape
    px = uvd[:, 0] * W - 0.5
    py = uvd[:, 1] * H - 0.5
    pxc = np.clip(px, 0.0, W - 1.0)
    pyc = np.clip(py, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(pxc).astype(np.intp), W - 2)
    y0 = np.minimum(np.floor(pyc).astype(np.intp), H - 2)
    wx = (pxc - x0).astype(tex.dtype)
    wy = (pyc - y0).astype(tex.dtype)

    td = tex.data
    t00 = td[:, y0, x0]        # [C,M]
    t01 = td[:, y0, x0 + 1]
    t10 = td[:, y0 + 1, x0]
    t11 = td[:, y0 + 1, x0 + 1]
    top = t00 + wx * (t01 - t00)
    bot = t10 + wx * (t11 - t10)
    out = (top + wy * (bot - top)).T   # [M,C]

    def bw(g):
        gT = g.T                       # [C,M]
        if tex.requires_grad:
            w00 = (1 - wy) * (1 - wx)
            w01 = (1 - wy) * wx
            w10 = wy * (1 - wx)
            w11 = wy * wx
            dt = np.zeros((H * W, C), dtype=td.dtype)
            np.add.at(dt, y0 * W + x0, g * w00[:, None])
            np.add.at(dt, y0 * W + x0 + 1, g * w01[:, None])
            np.add.at(dt, (y0 + 1) * W + x0, g * w10[:, None])
            np.add.at(dt, (y0 + 1) * W + x0 + 1, g * w11[:, None])
            tex.accumulate_grad(dt.T.reshape(C, H, W))
        if isinstance(uv, Tensor) and uv.requires_grad:
            dpx = ((1 - wy) * (t01 - t00) + wy * (t11 - t10)) * gT
            dpy = ((bot - top)) * gT
            in_x = (px > 0.0) & (px < W - 1.0)
            in_y = (py > 0.0) & (py < H - 1.0)
            duv = np.stack([dpx.sum(axis=0) * W * in_x,
                            dpy.sum(axis=0) * H * in_y], axis=1)
            uv.accumulate_grad(duv.astype(uvd.dtype))

    return make_node(out, (tex, uv), bw, "texture_sample")


def window_indices(oy: np.ndarray, ox: np.ndarray, Ky: int, Kx: int, H: int, W: int):
    """Per-window pixel coordinates: (rows, cols, valid), each [..,Ky,Kx],
    for windows whose top-left corners sit at (oy, ox)."""
    ys = oy[..., None, None] + np.arange(Ky, dtype=np.intp)[:, None]
    xs = ox[..., None, None] + np.arange(Kx, dtype=np.intp)[None, :]
    ys, xs = np.broadcast_arrays(ys, xs)
    valid = (ys >= 0) & (ys < H) & (xs >= 0) & (xs < W)
    return ys, xs, valid


def scatter_add_window(vals: Tensor, oy: np.ndarray, ox: np.ndarray, H: int, W: int):
    """Scatter KyxKx windows into an [N,H,W] canvas.

    vals [N,F,Ky,Kx]; window f of batch n covers rows oy[n,f]..oy[n,f]+Ky-1
    and columns ox[n,f]..; out-of-canvas texels are dropped. Backward is a
    plain gather of the same windows.
    """
    N, F, Ky, Kx = vals.shape
    ys, xs, valid = window_indices(oy, ox, Ky, Kx, H, W)
    flat = np.where(valid, ys * W + xs, 0)
    nidx = np.broadcast_to(np.arange(N, dtype=np.intp)[:, None, None, None], flat.shape)

    out = np.zeros((N, H * W), dtype=vals.dtype)
    np.add.at(out, (nidx[valid], flat[valid]), vals.data[valid])

    def bw(g):
        if vals.requires_grad:
            gf = g.reshape(N, H * W)
            dv = gf[nidx, flat] * valid
            vals.accumulate_grad(dv)

    return make_node(out.reshape(N, H, W), (vals,), bw, "scatter_add_window")


def lbs_apply(weights: np.ndarray, transforms: Tensor, verts):
    """Apply blended transforms: out_v = sum_j w[v,j] (R_j x_v + t_j).

    weights [V,J] is a constant; transforms [J,3,4] and verts [V,3] may
    carry gradients. The per-vertex blended matrix M_v = sum_j w[v,j] T_j
    is formed once; backward distributes through it analytically.
    """
    wd = np.asarray(weights)
    Td = transforms.data
    xd = verts.data if isinstance(verts, Tensor) else np.asarray(verts)
    M = np.tensordot(wd, Td, axes=([1], [0]))          # [V,3,4]
    out = np.einsum("vrc,vc->vr", M[:, :, :3], xd) + M[:, :, 3]

    def bw(g):
        if isinstance(verts, Tensor) and verts.requires_grad:
            verts.accumulate_grad(np.einsum("vrc,vr->vc", M[:, :, :3], g))
        if transforms.requires_grad:
            hom = np.concatenate([xd, np.ones((xd.shape[0], 1), dtype=xd.dtype)], axis=1)
            outer = g[:, :, None] * hom[:, None, :]    # [V,3,4]
            transforms.accumulate_grad(np.tensordot(wd, outer, axes=([0], [0])))

    return make_node(out, (transforms, verts), bw, "lbs_apply")


_INTERP_CACHE: dict = {}


def _interp_matrix(n_out: int, n_in: int, dtype, mode: str) -> np.ndarray:
    key = (n_out, n_in, np.dtype(dtype).str, mode)
    if key not in _INTERP_CACHE:
        M = np.zeros((n_out, n_in), dtype=dtype)
        for i in range(n_out):
            s = (i + 0.5) * n_in / n_out - 0.5
            s = min(max(s, 0.0), n_in - 1.0)
            if mode == "nearest":
                M[i, int(round(s))] = 1.0
            else:
                i0 = min(int(np.floor(s)), max(n_in - 2, 0))
                t = s - i0
                M[i, i0] += 1.0 - t
                if n_in > 1:
                    M[i, i0 + 1] += t
        _INTERP_CACHE[key] = M
    return _INTERP_CACHE[key]


def upsample2d(x: Tensor, factor: int, mode: str = "bilinear"):
    """Upsample [..,H,W] by an integer factor via two constant interpolation
    matmuls (half-texel aligned, clamped at the border)."""
    H, W = x.shape[-2], x.shape[-1]
    Mr = _interp_matrix(H * factor, H, x.dtype, mode)
    Mc = _interp_matrix(W * factor, W, x.dtype, mode)
    y = ops.matmul(Mr, x)              # [..,H*f,W]
    return ops.matmul(y, Mc.T)         # [..,H*f,W*f]
