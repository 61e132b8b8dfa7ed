"""Template mesh container and the uniform graph Laplacian."""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc


class TemplateMesh:
    """Canonical-pose mesh with per-vertex UVs and skinning weights.

    Treat as immutable after construction; derived operators (adjacency,
    Laplacian matrix) are cached on first use.
    """

    def __init__(self, verts: np.ndarray, faces: np.ndarray,
                 uvs: np.ndarray, weights: np.ndarray):
        self.verts = np.asarray(verts, dtype=np.float64)
        self.faces = np.asarray(faces, dtype=np.intp)
        self.uvs = np.asarray(uvs, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        V = self.verts.shape[0]
        if self.verts.ndim != 2 or self.verts.shape[1] != 3:
            raise ValueError("verts must be [V,3]")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be [F,3]")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= V):
            raise ValueError("faces index out-of-range vertices")
        if self.uvs.shape != (V, 2):
            raise ValueError("uvs must be [V,2]")
        if self.uvs.min() < 0.0 or self.uvs.max() > 1.0:
            raise ValueError("uvs must lie in the unit square")
        if self.weights.ndim != 2 or self.weights.shape[0] != V:
            raise ValueError("weights must be [V,J]")
        if self.weights.min() < -1e-12:
            raise ValueError("negative skinning weight")
        rowsum = self.weights.sum(axis=1)
        if np.max(np.abs(rowsum - 1.0)) > 1e-9:
            raise ValueError("skinning weight rows must sum to 1")
        self._nbr = None

    @property
    def vertex_count(self) -> int:
        return self.verts.shape[0]

    @property
    def joint_count(self) -> int:
        return self.weights.shape[1]

    def neighbor_table(self):
        """(indices [V,Dmax], inv_degree [V]): 1-ring neighbors, rows padded
        with the vertex's own index so padded differences vanish exactly."""
        if self._nbr is None:
            V = self.vertex_count
            adj = [set() for _ in range(V)]
            for a, b, c in self.faces:
                adj[a].update((b, c))
                adj[b].update((a, c))
                adj[c].update((a, b))
            degs = np.array([len(nb) for nb in adj])
            if (degs == 0).any():
                v = int(np.nonzero(degs == 0)[0][0])
                raise ValueError(f"vertex {v} is isolated (no neighbors)")
            dmax = int(degs.max())
            idx = np.empty((V, dmax), dtype=np.intp)
            for v, nb in enumerate(adj):
                row = sorted(nb)
                idx[v, :len(row)] = row
                idx[v, len(row):] = v
            self._nbr = (idx, 1.0 / degs)
        return self._nbr


def mesh_laplacian(mesh: TemplateMesh, verts=None):
    """Differential coordinates L(x)_i = x_i - mean of 1-ring neighbors,
    computed as -mean of neighbor differences (x_u - x_i). The difference
    form annihilates constants bitwise, so exactly-representable
    translations leave the result bit-identical.

    verts defaults to the template's own vertices; pass a Tensor [V,3] for
    a differentiable result.
    """
    idx, inv_deg = mesh.neighbor_table()
    if verts is None:
        verts = mesh.verts
    if isinstance(verts, dc.Tensor):
        scale = inv_deg[:, None].astype(verts.dtype)
        nbrs = dc.getitem(verts, idx)                  # [V,Dmax,3]
        diffs = dc.sub(nbrs, dc.reshape(verts, (verts.shape[0], 1, 3)))
        return dc.mul(dc.neg(dc.sum_(diffs, axis=1)), scale)
    v = np.asarray(verts)
    diffs = v[idx] - v[:, None, :]
    return -(diffs.sum(axis=1)) * inv_deg[:, None].astype(v.dtype)


def laplacian_loss(mesh: TemplateMesh, verts_a, verts_b):
    """Squared L2 between differential coordinates of two vertex sets."""
    da = mesh_laplacian(mesh, verts_a)
    db = mesh_laplacian(mesh, verts_b)
    if isinstance(da, dc.Tensor) or isinstance(db, dc.Tensor):
        d = dc.sub(da, db)
        return dc.sum_(dc.mul(d, d))
    d = da - db
    return float((d * d).sum())
