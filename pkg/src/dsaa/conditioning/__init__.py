"""Spatially localized driving-signal conditioning."""

from .signal import DrivingSignal, tile2d
from .masks import InfluenceMask, build_masks, save_masks, load_masks
from .encode import LocalizedProjector, localized_encode
from .heatmap import influence_heatmap

__all__ = [
    "DrivingSignal", "tile2d",
    "InfluenceMask", "build_masks", "save_masks", "load_masks",
    "LocalizedProjector", "localized_encode",
    "influence_heatmap",
]
