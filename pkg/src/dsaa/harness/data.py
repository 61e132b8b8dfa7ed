"""Training-side dataset access.

Wraps a generated dataset directory with everything the trainer and the
evaluators need per frame: ground-truth images/masks/mesh, the unposed
position map that feeds the geometry encoder, and a cached
ambient-occlusion map. AO is computed from the skinned template at the
frame's pose (no corrective displacement), so it is a function of the
driving signal alone and is equally available for novel frames at
animation time. The per-frame maps are cached on disk next to the
dataset (one container per resolution) because they are pure functions
of the manifest.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from ..body import (TemplateMesh, build_atlas, forward_kinematics, lbs_apply,
                    lbs_unpose, load_mesh, load_skeleton, render_position_map)
from ..conditioning import DrivingSignal
from ..occlusion import AOSamplerConfig, compute_ao
from ..renderer import Camera
from ..synthdata import load_frame, load_manifest, scene_cameras

__all__ = ["FrameBundle", "TrainData"]


@dataclass(frozen=True)
class FrameBundle:
    """One frame, in the layout the training loop consumes."""

    id: str
    theta: np.ndarray      # [3J]
    face: np.ndarray       # [n_face]
    u: float
    verts: np.ndarray      # [V,3] registered posed mesh
    images: np.ndarray     # [n_cam,3,H,W] float32
    masks: np.ndarray      # [n_cam,H,W] float32


class TrainData:
    """Manifest-backed frame source with RAM caches for derived inputs.

    geo_res fixes the encoder position-map grid, ao_res the shadow input
    grid; both default to the standard model sizes.
    """

    def __init__(self, dataset_root, geo_res: int = 32, ao_res: int = 16,
                 ao_rays: int = 64):
        self.root = Path(dataset_root)
        self.manifest = load_manifest(self.root)
        self.spec = self.manifest.spec
        self.template = load_mesh(self.root / "template.obj",
                                  self.root / "template.weights")
        self.skeleton = load_skeleton(self.root / "skeleton.txt")
        self.cameras: list[Camera] = scene_cameras(self.spec)
        self.geo_res = int(geo_res)
        self.ao_res = int(ao_res)
        self.ao_config = AOSamplerConfig(rays=ao_rays)
        self._atlas = build_atlas(self.template.uvs, self.template.faces,
                                  self.geo_res, self.geo_res)
        self._frames: dict[str, FrameBundle] = {}
        self._pos_maps: dict[str, np.ndarray] = {}
        self._ao: dict[str, np.ndarray] = {}
        self._ao_dirty = False

    # ------------------------------------------------------------- frames

    def ids(self, group=None, split=None) -> list[str]:
        return self.manifest.ids(group=group, split=split)

    def train_ids(self) -> list[str]:
        """Frames used for fitting: the train split, or every standard
        frame when the dataset was never split."""
        ids = self.manifest.ids(group="standard", split="train")
        return ids if ids else self.manifest.ids(group="standard")

    def frame(self, frame_id: str) -> FrameBundle:
        if frame_id not in self._frames:
            rec = load_frame(self.manifest, frame_id)
            self._frames[frame_id] = FrameBundle(
                id=rec.id, theta=rec.theta, face=rec.face, u=float(rec.u),
                verts=rec.verts,
                images=np.stack(rec.images).astype(np.float32),
                masks=np.stack(rec.masks).astype(np.float32))
        return self._frames[frame_id]

    def signal(self, frame_id: str, cam: int) -> DrivingSignal:
        fr = self.frame(frame_id)
        # camera forward axis (world->cam rotation row 2) as the view code
        return DrivingSignal(theta=fr.theta, face=fr.face,
                             view=self.cameras[cam].rot[2])

    def scalars(self, frame_id: str) -> np.ndarray:
        fr = self.frame(frame_id)
        return np.concatenate([fr.theta, fr.face])

    # --------------------------------------------------- derived model inputs

    def pos_map(self, frame_id: str) -> np.ndarray:
        """Unposed ground-truth geometry resampled on the atlas, [3,g,g]."""
        if frame_id not in self._pos_maps:
            fr = self.frame(frame_id)
            tf = forward_kinematics(self.skeleton, fr.theta)
            canonical = lbs_unpose(fr.verts, tf, self.template.weights)
            pm, _ = render_position_map(canonical, self.template.faces,
                                        self._atlas)
            self._pos_maps[frame_id] = pm
        return self._pos_maps[frame_id]

    def ao(self, frame_id: str) -> np.ndarray:
        """Shadow-branch input [1,R,R]: template-at-pose visibility, with
        texels outside the atlas treated as unoccluded."""
        if not self._ao and self._ao_path().exists():
            for k, v in dc.load_arrays(self._ao_path()).items():
                self._ao[k] = v
        if frame_id not in self._ao:
            fr = self.frame(frame_id)
            tf = forward_kinematics(self.skeleton, fr.theta)
            posed = lbs_apply(self.template.verts, tf, self.template.weights)
            mesh = TemplateMesh(posed, self.template.faces, self.template.uvs,
                                self.template.weights)
            amap = compute_ao(mesh, self.ao_config, self.ao_res)
            self._ao[frame_id] = np.where(amap.valid, amap.values,
                                          1.0).astype(np.float32)
            self._ao_dirty = True
        return self._ao[frame_id][None]

    def _ao_path(self) -> Path:
        return self.root / f"ao{self.ao_res}.dsaa1"

    def flush_ao(self) -> None:
        """Persist newly computed AO maps (atomic rewrite, sorted keys)."""
        if not self._ao_dirty:
            return
        tmp = self._ao_path().with_suffix(".tmp")
        dc.save_arrays(tmp, {k: self._ao[k] for k in sorted(self._ao)})
        os.replace(tmp, self._ao_path())
        self._ao_dirty = False

    def ensure_ao(self, frame_ids) -> None:
        """Compute-and-persist AO for `frame_ids` ahead of the loop."""
        for fid in frame_ids:
            self.ao(fid)
        self.flush_ao()
