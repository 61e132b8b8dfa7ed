"""Region-of-influence masks derived from LBS skinning weights.

A joint's mask marks texels whose UV cell receives a vertex carrying at
least tau of that joint's weight; the owning face's corners count as well,
so large triangles do not punch holes in their own region. One texel of
dilation closes seams between adjacent cells. All three rotation scalars
of a joint share its mask; face channels reuse the head joint's region.
"""

from dataclasses import dataclass

import numpy as np

from .. import imgio
from ..body import Skeleton, TemplateMesh, build_atlas

__all__ = ["InfluenceMask", "build_masks", "save_masks", "load_masks"]


@dataclass(frozen=True)
class InfluenceMask:
    data: np.ndarray          # [N,h,w] uint8, entries in {0,1}
    names: tuple

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.uint8)
        if data.ndim != 3:
            raise ValueError("mask tensor must be [N,h,w]")
        if not np.isin(data, (0, 1)).all():
            raise ValueError("mask entries must be binary")
        if len(self.names) != data.shape[0]:
            raise ValueError("one name per channel required")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n_pose(self) -> int:
        return sum(1 for n in self.names if n.startswith("pose:"))

    @property
    def n_face(self) -> int:
        return sum(1 for n in self.names if n.startswith("face:"))

    def pose(self) -> np.ndarray:
        return self.data[: self.n_pose]

    def face(self) -> np.ndarray:
        return self.data[self.n_pose: self.n_pose + self.n_face]

    def union(self) -> np.ndarray:
        return self.data.any(axis=0)


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    h, w = mask.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            src = mask[max(0, -di): h - max(0, di), max(0, -dj): w - max(0, dj)]
            out[max(0, di): h - max(0, -di), max(0, dj): w - max(0, -dj)] |= src
    return out


def build_masks(template: TemplateMesh, skeleton: Skeleton, height: int,
                width: int, tau: float = 0.05, n_face: int = 4,
                head_joint: str = "head", atlas=None) -> InfluenceMask:
    """Binary per-scalar influence channels on a height*width UV grid."""
    if atlas is None:
        atlas = build_atlas(template.uvs, template.faces, height, width)
    J = skeleton.joint_count
    if template.weights.shape[1] != J:
        raise ValueError("weight columns must match joint count")

    peak = np.zeros((J, height, width))
    iv = np.clip((template.uvs[:, 1] * height).astype(int), 0, height - 1)
    ju = np.clip((template.uvs[:, 0] * width).astype(int), 0, width - 1)
    for j in range(J):
        np.maximum.at(peak[j], (iv, ju), template.weights[:, j])

    ti, tj = np.nonzero(atlas.valid)
    corner = template.faces[atlas.face_idx[ti, tj]]     # [T,3]
    for j in range(J):
        for k in range(3):
            np.maximum.at(peak[j], (ti, tj), template.weights[corner[:, k], j])

    joint_mask = np.zeros((J, height, width), dtype=np.uint8)
    for j in range(J):
        m = _dilate((peak[j] >= tau).astype(np.uint8))
        if not m.any():
            raise ValueError(
                f"joint {skeleton.names[j]!r} has no texel above tau={tau}")
        joint_mask[j] = m

    if n_face > 0 and head_joint not in skeleton.names:
        raise ValueError(f"skeleton has no joint named {head_joint!r}")

    channels, names = [], []
    for j, name in enumerate(skeleton.names):
        for axis in ("rx", "ry", "rz"):
            channels.append(joint_mask[j])
            names.append(f"pose:{name}:{axis}")
    if n_face > 0:
        head = joint_mask[skeleton.names.index(head_joint)]
        for k in range(n_face):
            channels.append(head)
            names.append(f"face:{k}")
    return InfluenceMask(np.stack(channels), tuple(names))


def save_masks(masks: InfluenceMask, prefix) -> None:
    """PBM stack `<prefix>_NNN.pbm` plus `<prefix>_index.txt`."""
    prefix = str(prefix)
    with open(f"{prefix}_index.txt", "w") as f:
        for k, name in enumerate(masks.names):
            imgio.write_pbm(f"{prefix}_{k:03d}.pbm", masks.data[k])
            f.write(f"{k:03d} {name}\n")


def load_masks(prefix) -> InfluenceMask:
    prefix = str(prefix)
    names, channels = [], []
    with open(f"{prefix}_index.txt") as f:
        for line in f:
            idx, name = line.split(maxsplit=1)
            channels.append(imgio.read_pbm(f"{prefix}_{idx}.pbm"))
            names.append(name.strip())
    return InfluenceMask(np.stack(channels), tuple(names))
