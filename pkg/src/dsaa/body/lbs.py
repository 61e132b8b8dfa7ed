"""Linear blend skinning: posing and exact unposing."""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from .skeleton import JointTransforms


def _check_shapes(verts, transforms: JointTransforms, weights):
    V = verts.shape[0]
    J = transforms.rot.shape[0]
    if verts.shape != (V, 3):
        raise ValueError(f"vertices must be [V,3], got {verts.shape}")
    if weights.shape != (V, J):
        raise ValueError(f"weights must be [{V},{J}], got {weights.shape}")


def lbs_apply(verts, transforms: JointTransforms, weights: np.ndarray):
    """Pose vertices: x_v -> sum_j w_vj (R_j x_v + t_j).

    verts may be a numpy array (fast path) or a Tensor; with a Tensor the
    result is differentiable w.r.t. the vertices. For theta gradients build
    the transforms with fk_transforms_tensor and call lbs_apply_tensor.
    """
    vd = verts.data if isinstance(verts, dc.Tensor) else np.asarray(verts)
    _check_shapes(vd, transforms, weights)
    if isinstance(verts, dc.Tensor):
        T = dc.Tensor(transforms.as_mat34().astype(verts.dtype))
        return dc.lbs_apply(weights.astype(verts.dtype), T, verts)
    M = np.tensordot(weights, transforms.as_mat34(), axes=([1], [0]))
    return np.einsum("vrc,vc->vr", M[:, :, :3], vd) + M[:, :, 3]


def lbs_apply_tensor(verts, transforms_34: dc.Tensor, weights: np.ndarray):
    """Differentiable posing with transforms as a [J,3,4] Tensor."""
    return dc.lbs_apply(weights, transforms_34, verts)


def lbs_unpose(posed: np.ndarray, transforms: JointTransforms, weights: np.ndarray):
    """Exact inverse of lbs_apply via per-vertex inversion of the blended
    transform. Raises on near-singular blends (condition number > 1e8),
    naming the first offending vertex."""
    posed = np.asarray(posed, dtype=np.float64)
    _check_shapes(posed, transforms, weights)
    M = np.tensordot(weights, transforms.as_mat34(), axes=([1], [0]))   # [V,3,4]
    A = M[:, :, :3]
    sv = np.linalg.svd(A, compute_uv=False)
    cond = sv[:, 0] / np.maximum(sv[:, -1], 1e-300)
    bad = np.nonzero(cond > 1e8)[0]
    if bad.size:
        v = int(bad[0])
        raise ValueError(f"singular blended transform at vertex {v} "
                         f"(condition number {cond[v]:.3e})")
    return np.linalg.solve(A, (posed - M[:, :, 3])[:, :, None])[:, :, 0]
