"""Skeleton, forward kinematics, and the pose DOF map.

Joints are topologically sorted (parent before child). Pose vectors hold
XYZ intrinsic Euler angles in radians, 3 per joint, so theta has length
3J and theta[3j:3j+3] belongs to joint j. Joint transforms returned by
forward kinematics are rest-relative: identity at theta = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import diffcore as dc


def euler_xyz(angles: np.ndarray) -> np.ndarray:
    """[...,3] angles -> [...,3,3] rotation, R = Rx @ Ry @ Rz (intrinsic XYZ)."""
    ax, ay, az = angles[..., 0], angles[..., 1], angles[..., 2]
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    R = np.empty(angles.shape[:-1] + (3, 3), dtype=angles.dtype)
    R[..., 0, 0] = cy * cz
    R[..., 0, 1] = -cy * sz
    R[..., 0, 2] = sy
    R[..., 1, 0] = cx * sz + sx * sy * cz
    R[..., 1, 1] = cx * cz - sx * sy * sz
    R[..., 1, 2] = -sx * cy
    R[..., 2, 0] = sx * sz - cx * sy * cz
    R[..., 2, 1] = sx * cz + cx * sy * sz
    R[..., 2, 2] = cx * cy
    return R


@dataclass(frozen=True)
class Skeleton:
    names: tuple
    parents: np.ndarray          # [J] int, -1 for the root
    rest_rot: np.ndarray         # [J,3,3]
    rest_t: np.ndarray           # [J,3]
    # rest-pose world transforms, filled in __post_init__
    rest_world_rot: np.ndarray = field(init=False, repr=False)
    rest_world_t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        J = len(self.names)
        parents = np.asarray(self.parents, dtype=int)
        if parents.shape != (J,) or self.rest_rot.shape != (J, 3, 3) or self.rest_t.shape != (J, 3):
            raise ValueError("inconsistent skeleton arrays")
        for j, p in enumerate(parents):
            if not (p < j):
                raise ValueError(f"joint {j} has parent {p}; joints must be topologically sorted")
        for j in range(J):
            R = self.rest_rot[j]
            if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
                raise ValueError(f"rest rotation of joint {j} is not orthonormal")
        wr = np.empty((J, 3, 3))
        wt = np.empty((J, 3))
        for j in range(J):
            p = parents[j]
            if p < 0:
                wr[j], wt[j] = self.rest_rot[j], self.rest_t[j]
            else:
                wr[j] = wr[p] @ self.rest_rot[j]
                wt[j] = wr[p] @ self.rest_t[j] + wt[p]
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "rest_world_rot", wr)
        object.__setattr__(self, "rest_world_t", wt)

    @property
    def joint_count(self) -> int:
        return len(self.names)

    @property
    def dof(self) -> int:
        return 3 * len(self.names)


@dataclass(frozen=True)
class JointTransforms:
    """Rest-relative world transforms: x -> R_j x + t_j."""
    rot: np.ndarray              # [J,3,3]
    t: np.ndarray                # [J,3]

    def as_mat34(self) -> np.ndarray:
        return np.concatenate([self.rot, self.t[:, :, None]], axis=2)


def forward_kinematics(skel: Skeleton, theta: np.ndarray) -> JointTransforms:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (skel.dof,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({skel.dof},)")
    J = skel.joint_count
    Rl = euler_xyz(theta.reshape(J, 3))
    wr = np.empty((J, 3, 3))
    wt = np.empty((J, 3))
    for j in range(J):
        R = skel.rest_rot[j] @ Rl[j]
        p = skel.parents[j]
        if p < 0:
            wr[j], wt[j] = R, skel.rest_t[j]
        else:
            wr[j] = wr[p] @ R
            wt[j] = wr[p] @ skel.rest_t[j] + wt[p]
    # rest-relative: S_j = A_j(theta) o A_j(0)^{-1}
    R0, t0 = skel.rest_world_rot, skel.rest_world_t
    S_R = wr @ R0.transpose(0, 2, 1)
    S_t = wt - np.einsum("jrc,jc->jr", S_R, t0)
    return JointTransforms(S_R, S_t)


def _rot_axis_tensor(c, s, axis: int):
    """3x3 rotation Tensor about a coordinate axis from scalar cos/sin Tensors."""
    one, zero = 1.0, 0.0
    if axis == 0:
        rows = [dc.stack([one, zero, zero]),
                dc.stack([zero, c, dc.neg(s)]),
                dc.stack([zero, s, c])]
    elif axis == 1:
        rows = [dc.stack([c, zero, s]),
                dc.stack([zero, one, zero]),
                dc.stack([dc.neg(s), zero, c])]
    else:
        rows = [dc.stack([c, dc.neg(s), zero]),
                dc.stack([s, c, zero]),
                dc.stack([zero, zero, one])]
    return dc.stack(rows)


def fk_transforms_tensor(skel: Skeleton, theta: dc.Tensor) -> dc.Tensor:
    """Differentiable forward kinematics: theta [3J] -> [J,3,4] rest-relative
    transforms. Builds the same chain as forward_kinematics out of tape ops,
    so gradients w.r.t. theta come from the graph. Slow path, used by
    gradient checks and any theta-sensitive objective."""
    if theta.shape != (skel.dof,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({skel.dof},)")
    J = skel.joint_count
    world_R: list = [None] * J
    world_t: list = [None] * J
    for j in range(J):
        a = dc.getitem(theta, slice(3 * j, 3 * j + 3))
        R = None
        for axis in range(3):
            ang = dc.getitem(a, axis)
            Rax = _rot_axis_tensor(dc.cos(ang), dc.sin(ang), axis)
            R = Rax if R is None else dc.matmul(R, Rax)
        R = dc.matmul(dc.Tensor(skel.rest_rot[j]), R)
        t = dc.Tensor(skel.rest_t[j].reshape(3, 1))
        p = skel.parents[j]
        if p < 0:
            world_R[j], world_t[j] = R, t
        else:
            world_R[j] = dc.matmul(world_R[p], R)
            world_t[j] = dc.add(dc.matmul(world_R[p], t), world_t[p])
    mats = []
    R0, t0 = skel.rest_world_rot, skel.rest_world_t
    for j in range(J):
        S_R = dc.matmul(world_R[j], dc.Tensor(R0[j].T))
        S_t = dc.sub(world_t[j], dc.matmul(S_R, dc.Tensor(t0[j].reshape(3, 1))))
        mats.append(dc.concat([S_R, S_t], axis=1))
    return dc.stack(mats)       # [J,3,4]


def save_skeleton(path, skel: Skeleton) -> None:
    """One joint per line: name, parent index, rest rotation row-major (9
    floats), rest translation (3 floats)."""
    with open(path, "w") as f:
        for j in range(skel.joint_count):
            nums = list(skel.rest_rot[j].reshape(-1)) + list(skel.rest_t[j])
            f.write(" ".join([skel.names[j], str(int(skel.parents[j]))]
                             + [f"{x:.17g}" for x in nums]) + "\n")


def load_skeleton(path) -> Skeleton:
    names, parents, rots, ts = [], [], [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 14:
                raise ValueError(f"skeleton line needs 14 fields, got {len(parts)}")
            names.append(parts[0])
            parents.append(int(parts[1]))
            nums = np.array([float(x) for x in parts[2:]])
            rots.append(nums[:9].reshape(3, 3))
            ts.append(nums[9:])
    return Skeleton(tuple(names), np.array(parents), np.array(rots), np.array(ts))
