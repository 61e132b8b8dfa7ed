"""Location-dependent compression of masked, tiled driving signals."""

import numpy as np

from .. import diffcore as dc
from .masks import InfluenceMask
from .signal import tile2d

__all__ = ["LocalizedProjector", "localized_encode"]


class LocalizedProjector:
    """Two 1x1 layers with per-texel (untied) biases over masked tilings.

    Weights are shared across texels; only the biases vary spatially, so a
    signal scalar can reach a texel solely through its own mask channel.
    The output is re-masked by the channel union, which keeps texels no
    scalar influences at exactly zero.
    """

    def __init__(self, store: dc.ParamStore, prefix: str, masks: InfluenceMask,
                 hidden: int = 16, out_channels: int = 8,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        if rng is None:
            rng = np.random.default_rng(0)
        data = masks.data if isinstance(masks, InfluenceMask) else np.asarray(masks)
        n, h, w = data.shape
        self.grid = (h, w)
        self.n_signal = n
        self._mask = data.astype(dtype)
        self._union = data.any(axis=0).astype(dtype)[None]
        self.w1 = store.add(f"{prefix}/w1",
                            (rng.normal(size=(hidden, n)) / np.sqrt(n)).astype(dtype))
        self.b1 = store.add(f"{prefix}/b1", np.zeros((hidden, h, w), dtype=dtype))
        self.w2 = store.add(f"{prefix}/w2",
                            (rng.normal(size=(out_channels, hidden)) / np.sqrt(hidden)).astype(dtype))
        self.b2 = store.add(f"{prefix}/b2", np.zeros((out_channels, h, w), dtype=dtype))

    def __call__(self, x) -> dc.Tensor:
        if not isinstance(x, dc.Tensor):
            x = dc.Tensor(np.asarray(x))
        if x.data.shape != (self.n_signal,):
            raise ValueError(
                f"signal length {x.data.shape} does not match mask channels "
                f"({self.n_signal})")
        h, w = self.grid
        masked = dc.mul(tile2d(x, h, w), self._mask)
        z1 = dc.reshape(dc.matmul(self.w1, dc.reshape(masked, (self.n_signal, h * w))),
                        (self.w1.data.shape[0], h, w)) + self.b1
        a1 = dc.tanh(z1)
        z2 = dc.reshape(dc.matmul(self.w2, dc.reshape(a1, (a1.data.shape[0], h * w))),
                        (self.w2.data.shape[0], h, w)) + self.b2
        return dc.mul(z2, self._union)


def localized_encode(signal, masks: InfluenceMask, proj_pose: LocalizedProjector,
                     proj_face: LocalizedProjector):
    """Embed pose and face scalars through their localized projectors."""
    if proj_pose.n_signal != masks.n_pose or proj_face.n_signal != masks.n_face:
        raise ValueError("projector channel counts do not match masks")
    return proj_pose(signal.theta), proj_face(signal.face)
