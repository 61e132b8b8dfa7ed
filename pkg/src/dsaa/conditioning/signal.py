"""Driving-signal container and spatial tiling."""

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc

__all__ = ["DrivingSignal", "tile2d"]


@dataclass(frozen=True)
class DrivingSignal:
    """Pose scalars, facial code, and a unit view direction."""

    theta: np.ndarray
    face: np.ndarray
    view: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        face = np.asarray(self.face, dtype=np.float64)
        view = np.asarray(self.view, dtype=np.float64)
        for arr, label in ((theta, "theta"), (face, "face"), (view, "view")):
            if arr.ndim != 1:
                raise ValueError(f"{label} must be a flat vector")
            if not np.isfinite(arr).all():
                raise ValueError(f"{label} has non-finite entries")
        if view.shape != (3,) or abs(np.linalg.norm(view) - 1.0) > 1e-6:
            raise ValueError("view must be a unit 3-vector")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "face", face)
        object.__setattr__(self, "view", view)

    def scalars(self) -> np.ndarray:
        """Maskable scalars, pose first then face (view stays global)."""
        return np.concatenate([self.theta, self.face])


def tile2d(x, h: int, w: int):
    """Repeat a length-N vector over an h*w grid -> [N,h,w].

    Tensor inputs stay on the tape; plain arrays come back as arrays.
    """
    if isinstance(x, dc.Tensor):
        n = x.data.shape[0]
        return dc.broadcast_to(dc.reshape(x, (n, 1, 1)), (n, h, w))
    x = np.asarray(x)
    return np.broadcast_to(x[:, None, None], (x.shape[0], h, w)).copy()
