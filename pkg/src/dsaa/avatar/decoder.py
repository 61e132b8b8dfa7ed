"""Signal-conditioned decoder: tiled latent bottleneck, two upsampling
stages, localized-embedding concat, then a geometry head and a texture
branch, plus the architecture-derived influence footprints."""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from ..conditioning import tile2d

__all__ = ["AvatarDecoder", "displacement_footprint", "texture_footprint"]


class AvatarDecoder:
    """z is broadcast over a (geo_res/4)^2 bottleneck and upsampled twice;
    pose/face embeddings join at geo_res where a 3x3 trunk mixes them. The
    geometry head is 1x1 (displacement map at geo_res); the texture branch
    upsamples once more, takes the tiled view vector, and ends in a
    sigmoid so texels stay in (0, 1)."""

    def __init__(self, store: dc.ParamStore, prefix: str, config,
                 rng: np.random.Generator):
        dt = config.np_dtype
        dz, wg = config.d_z, config.width_geo
        wt, ec = config.width_tex, config.embed_channels

        def deconv(name, ci, co):
            w = store.add(f"{prefix}/{name}/w",
                          (rng.normal(size=(ci, co, 4, 4))
                           / np.sqrt(ci * 4.0)).astype(dt))
            b = store.add(f"{prefix}/{name}/b", np.zeros(co, dtype=dt))
            return w, b

        def conv(name, co, ci, k):
            w = store.add(f"{prefix}/{name}/w",
                          (rng.normal(size=(co, ci, k, k))
                           / np.sqrt(ci * k * k)).astype(dt))
            b = store.add(f"{prefix}/{name}/b", np.zeros(co, dtype=dt))
            return w, b

        self.w_up1, self.b_up1 = deconv("up1", dz, wg)
        self.w_up2, self.b_up2 = deconv("up2", wg, wg)
        self.w_trunk, self.b_trunk = conv("trunk", wg, wg + 2 * ec, 3)
        self.w_geo, self.b_geo = conv("geo", 3, wg, 1)
        self.w_texup, self.b_texup = deconv("texup", wg, wt)
        self.w_tex1, self.b_tex1 = conv("tex1", wt, wt + 3, 3)
        self.w_tex2, self.b_tex2 = conv("tex2", 3, wt, 1)
        self._dt = dt
        self._bottleneck = config.geo_res // 4
        self._geo_res = config.geo_res
        self._tex_res = config.tex_res

    def __call__(self, z: dc.Tensor, e_pose: dc.Tensor, e_face: dc.Tensor,
                 view: np.ndarray):
        g, gr, tr = self._bottleneck, self._geo_res, self._tex_res
        zm = dc.reshape(tile2d(z, g, g), (1, z.data.shape[0], g, g))
        x = dc.leaky_relu(dc.conv_transpose2d(zm, self.w_up1, self.b_up1))
        x = dc.leaky_relu(dc.conv_transpose2d(x, self.w_up2, self.b_up2))
        ep = dc.reshape(e_pose, (1,) + tuple(e_pose.shape))
        ef = dc.reshape(e_face, (1,) + tuple(e_face.shape))
        trunk = dc.leaky_relu(dc.conv2d(dc.concat([x, ep, ef], axis=1),
                                        self.w_trunk, self.b_trunk, padding=1))
        disp = dc.reshape(dc.conv2d(trunk, self.w_geo, self.b_geo), (3, gr, gr))

        tx = dc.leaky_relu(dc.conv_transpose2d(trunk, self.w_texup, self.b_texup))
        vmap = np.broadcast_to(
            np.asarray(view, dtype=self._dt)[None, :, None, None],
            (1, 3, tr, tr)).copy()
        tx = dc.concat([tx, dc.Tensor(vmap)], axis=1)
        tx = dc.leaky_relu(dc.conv2d(tx, self.w_tex1, self.b_tex1, padding=1))
        tex = dc.sigmoid(dc.conv2d(tx, self.w_tex2, self.b_tex2))
        return disp, dc.reshape(tex, (3, tr, tr))


def _grow(mask: np.ndarray) -> np.ndarray:
    """One texel of 8-neighborhood dilation (a 3x3 conv's reach)."""
    m = np.asarray(mask).astype(bool)
    out = m.copy()
    h, w = m.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            src = m[max(0, -di): h - max(0, di), max(0, -dj): w - max(0, dj)]
            out[max(0, di): h - max(0, -di), max(0, dj): w - max(0, -dj)] |= src
    return out


def displacement_footprint(mask) -> np.ndarray:
    """Displacement texels a mask channel can reach: the 3x3 trunk conv
    grows it by one texel and the 1x1 geometry head adds nothing."""
    return _grow(mask)


def texture_footprint(mask) -> np.ndarray:
    """Texture pixels a mask channel can reach: one texel for the trunk,
    then the 4/2/1 transposed conv sends texel i to rows 2i-1..2i+2, then
    one more pixel for the 3x3 tail. Outside this set the texture is
    bitwise independent of the signal scalar."""
    m = _grow(mask)
    h, w = m.shape
    up = np.zeros((2 * h, 2 * w), dtype=bool)
    ii, jj = np.nonzero(m)
    for di in (-1, 0, 1, 2):
        for dj in (-1, 0, 1, 2):
            r, c = 2 * ii + di, 2 * jj + dj
            ok = (r >= 0) & (r < 2 * h) & (c >= 0) & (c < 2 * w)
            up[r[ok], c[ok]] = True
    return _grow(up)
