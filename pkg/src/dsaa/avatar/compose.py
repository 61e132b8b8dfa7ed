"""Composition into the final avatar: corrective displacement sampled at
vertex UVs, blend skinning, and gain-modulated texture."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc
from ..body import (Skeleton, TemplateMesh, fk_transforms_tensor,
                    forward_kinematics, lbs_apply, lbs_apply_tensor)

__all__ = ["AvatarOutput", "apply_gain", "compose"]


@dataclass
class AvatarOutput:
    displacement: dc.Tensor    # [3,Hg,Wg] corrective field in UV space
    canonical: dc.Tensor       # [V,3] template plus sampled corrective
    posed: dc.Tensor           # [V,3] after blend skinning
    texture: dc.Tensor         # [3,Ht,Wt] decoded, pre-gain
    gain: dc.Tensor            # [1,Ht/4,Wt/4] quasi-shadow gain
    final: dc.Tensor           # [3,Ht,Wt] gain-modulated, clamped to [0,1]


def apply_gain(texture: dc.Tensor, gain: dc.Tensor, clamp: bool = True) -> dc.Tensor:
    """Multiply a texture by its bilinearly upsampled quarter-res gain."""
    _, H, W = texture.shape
    if H % 4 or W % 4 or tuple(gain.shape) != (1, H // 4, W // 4):
        raise ValueError(f"gain must be [1,{H // 4},{W // 4}] for a "
                         f"{H}x{W} texture, got {tuple(gain.shape)}")
    out = dc.mul(texture, dc.upsample2d(gain, 4))
    return dc.clamp(out, 0.0, 1.0) if clamp else out


def compose(theta, displacement, texture, gain, template: TemplateMesh,
            skeleton: Skeleton) -> AvatarOutput:
    """Build the posed, shaded avatar; differentiable end to end.

    theta may be a Tensor (gradients flow through forward kinematics) or a
    plain array. The corrective is additive, so zero displacement leaves
    exactly the skinned template.
    """
    disp = displacement if isinstance(displacement, dc.Tensor) \
        else dc.Tensor(np.asarray(displacement))
    tex = texture if isinstance(texture, dc.Tensor) \
        else dc.Tensor(np.asarray(texture))
    gn = gain if isinstance(gain, dc.Tensor) else dc.Tensor(np.asarray(gain))

    corrective = dc.texture_sample(disp, template.uvs)            # [V,3]
    canonical = dc.add(corrective, template.verts.astype(disp.dtype))
    if isinstance(theta, dc.Tensor):
        transforms = fk_transforms_tensor(skeleton, theta)
        posed = lbs_apply_tensor(canonical, transforms,
                                 template.weights.astype(disp.dtype))
    else:
        theta = np.asarray(theta, dtype=np.float64)
        posed = lbs_apply(canonical, forward_kinematics(skeleton, theta),
                          template.weights)
    if not np.isfinite(posed.data).all():
        raise ValueError("composed geometry has non-finite vertices")
    return AvatarOutput(disp, canonical, posed, tex, gn, apply_gain(tex, gn))
