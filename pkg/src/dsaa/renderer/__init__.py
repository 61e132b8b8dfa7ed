"""Differentiable soft rasterization and inverse-rendering losses."""

from .camera import Camera, look_at, project
from .raster import RasterConfig, RenderTarget, rasterize
from .losses import LossWeights, losses, l1_sum, l2_sum

__all__ = ["Camera", "look_at", "project", "RasterConfig", "RenderTarget",
           "rasterize", "LossWeights", "losses", "l1_sum", "l2_sum"]
