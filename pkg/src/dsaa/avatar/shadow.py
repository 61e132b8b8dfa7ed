"""Quasi-shadow branch: ambient occlusion in, multiplicative texture gain
out. Depth-2 encoder-decoder with one skip; never supervised directly,
it trains through the image loss alone."""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc

__all__ = ["ShadowNet"]


class ShadowNet:
    """Maps a [1,res,res] AO map to a gain map of the same resolution,
    bounded to (0, 2] by a doubled sigmoid head. Zero parameters give a
    unit gain exactly."""

    def __init__(self, store: dc.ParamStore, prefix: str, res: int,
                 width: int, rng: np.random.Generator, dtype):
        if res < 4 or res % 2:
            raise ValueError("shadow resolution must be even and >= 4")
        self.res = res
        self._dt = dtype

        def conv(name, co, ci, k):
            w = store.add(f"{prefix}/{name}/w",
                          (rng.normal(size=(co, ci, k, k))
                           / np.sqrt(ci * k * k)).astype(dtype))
            b = store.add(f"{prefix}/{name}/b", np.zeros(co, dtype=dtype))
            return w, b

        self.w0, self.b0 = conv("c0", width, 1, 3)
        self.w1, self.b1 = conv("down", 2 * width, width, 3)
        self.w2 = store.add(f"{prefix}/up/w",
                            (rng.normal(size=(2 * width, width, 4, 4))
                             / np.sqrt(2 * width * 4.0)).astype(dtype))
        self.b2 = store.add(f"{prefix}/up/b", np.zeros(width, dtype=dtype))
        self.w3, self.b3 = conv("c3", width, 2 * width, 3)
        self.w4, self.b4 = conv("out", 1, width, 1)

    def __call__(self, ao) -> dc.Tensor:
        raw = ao.data if isinstance(ao, dc.Tensor) else np.asarray(ao)
        if raw.shape == (self.res, self.res):
            raw = raw[None]
        if raw.shape != (1, self.res, self.res):
            raise ValueError(
                f"AO map must be [1,{self.res},{self.res}], got {np.shape(ao)}")
        if not np.isfinite(raw).all():
            raise ValueError("AO map has non-finite entries")
        x = dc.Tensor(raw.astype(self._dt).reshape(1, 1, self.res, self.res))
        s = dc.leaky_relu(dc.conv2d(x, self.w0, self.b0, padding=1))
        d = dc.leaky_relu(dc.conv2d(s, self.w1, self.b1, stride=2, padding=1))
        u = dc.leaky_relu(dc.conv_transpose2d(d, self.w2, self.b2))
        h = dc.leaky_relu(dc.conv2d(dc.concat([u, s], axis=1),
                                    self.w3, self.b3, padding=1))
        g = dc.mul(dc.sigmoid(dc.conv2d(h, self.w4, self.b4)), 2.0)
        return dc.reshape(g, (1, self.res, self.res))
