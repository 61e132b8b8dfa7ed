"""Inverse-rendering losses and their schedule.

All reductions are sums; the weights absorb scale. Phase 1 supervises
geometry only (L_G + L_lap against the registered mesh), phase 2 runs the
image losses, keeps L_lap by default as a smoothness regularizer, and
drops L_G. The KL / disentanglement / perturbation terms are composed by
the trainer, which owns those submodules.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .. import diffcore as dc
from ..body import TemplateMesh, mesh_laplacian
from .raster import RenderTarget


@dataclass(frozen=True)
class LossWeights:
    lam_img: float = 1.0
    lam_mask: float = 0.5
    lam_lap: float = 10.0
    lam_geom: float = 1.0
    lam_kl: float = 1e-3
    lam_dis: float = 0.1
    lam_pc: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0.0:
                raise ValueError(f"{f.name} must be nonnegative")
        if self.lam_img <= 0.0:
            raise ValueError("lam_img must be positive")


def l1_sum(a: dc.Tensor, b) -> dc.Tensor:
    """Sum of absolute differences; |x| built as relu(x) + relu(-x)."""
    d = dc.sub(a, b)
    return dc.add(dc.sum_(dc.relu(d)), dc.sum_(dc.relu(dc.neg(d))))


def l2_sum(a: dc.Tensor, b) -> dc.Tensor:
    d = dc.sub(a, b)
    return dc.sum_(dc.mul(d, d))


def losses(render: RenderTarget | None, gt_image, gt_mask,
           pred_verts: dc.Tensor | None, gt_verts,
           template: TemplateMesh, weights: LossWeights, phase: int,
           retain_lap: bool = True):
    """Composite loss for one frame/view. Returns (total Tensor, parts).

    phase 1: lam_geom*L_G + lam_lap*L_lap, render may be None.
    phase 2: lam_img*L_I + lam_mask*L_M (+ lam_lap*L_lap if retain_lap).
    parts maps component name -> float value (unweighted).
    """
    if phase not in (1, 2):
        raise ValueError(f"phase must be 1 or 2, got {phase}")
    parts: dict[str, float] = {}
    total = None

    def acc(term, lam):
        nonlocal total
        scaled = dc.mul(term, lam)
        total = scaled if total is None else dc.add(total, scaled)
        return term

    if phase == 1:
        if pred_verts is None:
            raise ValueError("phase 1 needs predicted vertices")
        lg = acc(l2_sum(pred_verts, np.asarray(gt_verts, dtype=pred_verts.dtype)),
                 weights.lam_geom)
        ll = acc(_lap_term(template, pred_verts, gt_verts), weights.lam_lap)
        parts["geom"] = float(lg.data)
        parts["lap"] = float(ll.data)
        return total, parts

    if render is None:
        raise ValueError("phase 2 needs a render")
    gt_image = np.asarray(gt_image, dtype=render.image.dtype)
    gt_mask = np.asarray(gt_mask, dtype=render.mask.dtype)
    if render.image.shape != gt_image.shape:
        raise ValueError(f"image shape mismatch: {render.image.shape} vs {gt_image.shape}")
    if render.mask.shape != gt_mask.shape:
        raise ValueError(f"mask shape mismatch: {render.mask.shape} vs {gt_mask.shape}")
    li = acc(l1_sum(render.image, gt_image), weights.lam_img)
    lm = acc(l2_sum(render.mask, gt_mask), weights.lam_mask)
    parts["img"] = float(li.data)
    parts["mask"] = float(lm.data)
    if retain_lap:
        if pred_verts is None:
            raise ValueError("retain_lap needs predicted vertices")
        ll = acc(_lap_term(template, pred_verts, gt_verts), weights.lam_lap)
        parts["lap"] = float(ll.data)
    return total, parts


def _lap_term(template: TemplateMesh, pred_verts: dc.Tensor, gt_verts) -> dc.Tensor:
    la = mesh_laplacian(template, pred_verts)
    lb = mesh_laplacian(template, np.asarray(gt_verts, dtype=pred_verts.dtype))
    return l2_sum(la, lb)
