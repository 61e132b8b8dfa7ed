"""Articulation oracles: FK geometry, LBS contracts, Laplacian, atlas."""

import numpy as np
import numpy.testing as npt
import pytest

from dsaa import body, diffcore as dc


def chain_skeleton(offsets):
    """Straight chain, each joint offset from its parent, identity rest rot."""
    J = len(offsets)
    return body.Skeleton(
        names=tuple(f"j{i}" for i in range(J)),
        parents=np.arange(-1, J - 1),
        rest_rot=np.tile(np.eye(3), (J, 1, 1)),
        rest_t=np.asarray(offsets, dtype=np.float64),
    )


def two_bone():
    return chain_skeleton([(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)])


# ------------------------------------------------------------------ FK

def test_fk_rest_pose_is_identity():
    sk = chain_skeleton([(0, 0, 0), (1, 0, 0), (0.5, 0.2, 0)])
    tf = body.forward_kinematics(sk, np.zeros(sk.dof))
    for j in range(3):
        npt.assert_allclose(tf.rot[j], np.eye(3), atol=1e-15)
        npt.assert_allclose(tf.t[j], 0.0, atol=1e-15)


def test_fk_two_bone_90deg():
    sk = two_bone()
    theta = np.zeros(6)
    theta[2] = np.pi / 2          # root z rotation
    tf = body.forward_kinematics(sk, theta)
    # child rest world position (1,0,0) swings to (0,1,0)
    p = tf.rot[1] @ np.array([1.0, 0.0, 0.0]) + tf.t[1]
    npt.assert_allclose(p, [0.0, 1.0, 0.0], atol=1e-12)


def test_fk_leaf_rotation_leaves_ancestors():
    sk = chain_skeleton([(0, 0, 0), (1, 0, 0), (1, 0, 0)])
    base = body.forward_kinematics(sk, np.zeros(9))
    theta = np.zeros(9)
    theta[6:9] = [0.3, -0.7, 1.1]  # leaf only
    tf = body.forward_kinematics(sk, theta)
    for j in (0, 1):
        npt.assert_array_equal(tf.rot[j], base.rot[j])
        npt.assert_array_equal(tf.t[j], base.t[j])


def test_fk_rejects_wrong_length():
    with pytest.raises(ValueError, match="theta"):
        body.forward_kinematics(two_bone(), np.zeros(5))


def test_fk_tensor_matches_numpy():
    sk = chain_skeleton([(0, 0, 0), (0.6, 0.1, 0), (0.8, 0, 0.2)])
    r = np.random.default_rng(0)
    theta = r.uniform(-1.2, 1.2, sk.dof)
    tf = body.forward_kinematics(sk, theta)
    T = body.fk_transforms_tensor(sk, dc.Tensor(theta))
    npt.assert_allclose(T.data, tf.as_mat34(), atol=1e-12)


# ------------------------------------------------------------------ LBS

def random_rig(seed=0, V=40):
    r = np.random.default_rng(seed)
    sk = chain_skeleton([(0, 0, 0), (0.5, 0, 0), (0.5, 0, 0), (0, 0.4, 0)])
    verts = r.normal(size=(V, 3))
    w = r.random(size=(V, 4)) + 1e-3
    w /= w.sum(axis=1, keepdims=True)
    return sk, verts, w


def test_lbs_identity_transforms():
    sk, verts, w = random_rig(1)
    tf = body.forward_kinematics(sk, np.zeros(sk.dof))
    npt.assert_allclose(body.lbs_apply(verts, tf, w), verts, atol=1e-12)


def test_lbs_unit_weight_follows_joint():
    sk, verts, w = random_rig(2, V=5)
    w1 = np.zeros_like(w)
    w1[:, 2] = 1.0
    r = np.random.default_rng(3)
    theta = r.uniform(-1.0, 1.0, sk.dof)
    tf = body.forward_kinematics(sk, theta)
    posed = body.lbs_apply(verts, tf, w1)
    expect = verts @ tf.rot[2].T + tf.t[2]
    npt.assert_allclose(posed, expect, atol=1e-12)


def test_lbs_half_half_translations():
    sk = two_bone()
    tf = body.JointTransforms(np.tile(np.eye(3), (2, 1, 1)),
                              np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]))
    verts = np.array([[0.3, 0.4, 0.5]])
    w = np.array([[0.5, 0.5]])
    posed = body.lbs_apply(verts, tf, w)
    npt.assert_allclose(posed, verts + np.array([0.5, 1.0, 0.0]), atol=1e-15)


def test_lbs_shape_mismatch_errors():
    sk, verts, w = random_rig(4)
    tf = body.forward_kinematics(sk, np.zeros(sk.dof))
    with pytest.raises(ValueError):
        body.lbs_apply(verts, tf, w[:, :3])


def test_unpose_identity_pose():
    sk, verts, w = random_rig(5)
    tf = body.forward_kinematics(sk, np.zeros(sk.dof))
    npt.assert_allclose(body.lbs_unpose(verts, tf, w), verts, atol=1e-12)


def test_unpose_roundtrip():
    sk, verts, w = random_rig(6)
    r = np.random.default_rng(7)
    theta = r.uniform(-1.2, 1.2, sk.dof)
    tf = body.forward_kinematics(sk, theta)
    posed = body.lbs_apply(verts, tf, w)
    back = body.lbs_unpose(posed, tf, w)
    assert np.max(np.abs(back - verts)) < 1e-9


def test_unpose_candy_wrapper_is_singular():
    sk = chain_skeleton([(0, 0, 0), (0, 0, 0)])
    theta = np.zeros(6)
    theta[3] = np.pi                 # child twisted 180 degrees about x
    tf = body.forward_kinematics(sk, theta)
    verts = np.array([[0.0, 0.5, 0.0]])
    w = np.array([[0.5, 0.5]])
    with pytest.raises(ValueError, match="vertex 0"):
        body.lbs_unpose(verts, tf, w)


def test_rigid_equivariance_via_root():
    sk, verts, w = random_rig(8)
    r = np.random.default_rng(9)
    theta0 = r.uniform(-1.0, 1.0, sk.dof)
    theta0[:3] = 0.0
    root = np.array([0.4, -0.9, 1.1])
    theta1 = theta0.copy()
    theta1[:3] = root
    base = body.lbs_apply(verts, body.forward_kinematics(sk, theta0), w)
    posed = body.lbs_apply(verts, body.forward_kinematics(sk, theta1), w)
    G = body.euler_xyz(root)         # root sits at the origin
    npt.assert_allclose(posed, base @ G.T, atol=1e-9)


def test_lbs_theta_gradients_fd():
    sk = chain_skeleton([(0, 0, 0), (0.7, 0, 0)])
    r = np.random.default_rng(10)
    verts = r.normal(size=(6, 3))
    w = r.random(size=(6, 2))
    w /= w.sum(axis=1, keepdims=True)
    probe = r.normal(size=(6, 3))
    theta = r.uniform(-1.0, 1.0, sk.dof)

    def loss(th):
        T = body.fk_transforms_tensor(sk, th)
        posed = body.lbs_apply_tensor(dc.Tensor(verts), T, w)
        return dc.sum_(dc.mul(posed, probe))

    assert dc.gradcheck(loss, [theta]) < 1e-4


def test_lbs_vertex_gradients_fd():
    sk, verts, w = random_rig(11, V=6)
    theta = np.random.default_rng(12).uniform(-1.0, 1.0, sk.dof)
    tf = body.forward_kinematics(sk, theta)
    probe = np.random.default_rng(13).normal(size=(6, 3))

    def loss(v):
        return dc.sum_(dc.mul(body.lbs_apply(v, tf, w), probe))

    assert dc.gradcheck(loss, [verts]) < 1e-4


# ------------------------------------------------------------- Laplacian

def grid_mesh(n=5):
    """Regular planar grid with a consistent diagonal split."""
    idx = lambda i, j: i * n + j
    verts = np.array([[j, i, 0.0] for i in range(n) for j in range(n)])
    faces = []
    for i in range(n - 1):
        for j in range(n - 1):
            faces.append([idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)])
            faces.append([idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)])
    uvs = np.array([[j / (n - 1), i / (n - 1)] for i in range(n) for j in range(n)])
    w = np.ones((n * n, 1))
    return body.TemplateMesh(verts, np.array(faces), uvs, w)


def test_laplacian_zero_on_grid_interior():
    mesh = grid_mesh()
    L = body.mesh_laplacian(mesh)
    center = 2 * 5 + 2
    npt.assert_allclose(L[center], 0.0, atol=1e-12)


def test_laplacian_loss_identical_meshes():
    mesh = grid_mesh()
    assert body.laplacian_loss(mesh, mesh.verts, mesh.verts.copy()) == 0.0


def test_laplacian_translation_invariance_exact():
    mesh = grid_mesh()
    c = np.array([3.25, -1.5, 0.125])    # exactly representable shifts
    La = body.mesh_laplacian(mesh, mesh.verts)
    Lb = body.mesh_laplacian(mesh, mesh.verts + c)
    npt.assert_array_equal(La, Lb)


def test_laplacian_isolated_vertex_errors():
    verts = np.zeros((4, 3))
    verts[:, 0] = np.arange(4)
    faces = np.array([[0, 1, 2]])        # vertex 3 isolated
    uvs = np.zeros((4, 2))
    w = np.ones((4, 1))
    mesh = body.TemplateMesh(verts, faces, uvs, w)
    with pytest.raises(ValueError, match="isolated"):
        body.mesh_laplacian(mesh)


def test_laplacian_differentiable_fd():
    mesh = grid_mesh(4)
    probe = np.random.default_rng(14).normal(size=mesh.verts.shape)

    def loss(v):
        return dc.sum_(dc.mul(body.mesh_laplacian(mesh, v), probe))

    assert dc.gradcheck(loss, [mesh.verts]) < 1e-4


# ----------------------------------------------------------------- atlas

def test_position_map_centroid_texel():
    uvs = np.array([[0.125, 0.125], [0.625, 0.125], [0.375, 0.875]])
    faces = np.array([[0, 1, 2]])
    verts = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 1.0], [1.0, 3.0, -1.0]])
    atlas = body.build_atlas(uvs, faces, 12, 12)
    pos, valid = body.render_position_map(verts, faces, atlas)
    # UV centroid (0.375, 0.375) is exactly the center of texel (4,4)
    assert valid[4, 4]
    npt.assert_allclose(pos[:, 4, 4], verts.mean(axis=0), atol=1e-12)
    # uncovered texels are zero sentinels
    assert not valid[0, 11] and pos[:, 0, 11].sum() == 0.0


def test_position_map_translation():
    uvs = np.array([[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]])
    faces = np.array([[0, 1, 2]])
    r = np.random.default_rng(15)
    verts = r.normal(size=(3, 3))
    atlas = body.build_atlas(uvs, faces, 16, 16)
    p0, valid = body.render_position_map(verts, faces, atlas)
    c = np.array([0.5, -2.0, 1.25])
    p1, _ = body.render_position_map(verts + c, faces, atlas)
    shift = p1[:, valid] - p0[:, valid]
    npt.assert_allclose(shift, np.broadcast_to(c[:, None], shift.shape), atol=1e-12)


def test_atlas_rejects_overlap():
    uvs = np.array([[0.1, 0.1], [0.9, 0.1], [0.5, 0.9],
                    [0.1, 0.15], [0.9, 0.15], [0.5, 0.95]])
    faces = np.array([[0, 1, 2], [3, 4, 5]])
    with pytest.raises(ValueError, match="injective"):
        body.build_atlas(uvs, faces, 16, 16)


def test_atlas_allows_shared_edges():
    uvs = np.array([[0.05, 0.05], [0.95, 0.05], [0.95, 0.95], [0.05, 0.95]])
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    atlas = body.build_atlas(uvs, faces, 16, 16)
    assert atlas.coverage > 0.5


def test_atlas_resolution_floor():
    uvs = np.array([[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]])
    with pytest.raises(ValueError, match="resolution"):
        body.build_atlas(uvs, np.array([[0, 1, 2]]), 4, 4)


# -------------------------------------------------------------------- I/O

def test_obj_weights_skeleton_roundtrip(tmp_path):
    mesh = grid_mesh(3)
    body.save_mesh(tmp_path / "m.obj", tmp_path / "m.weights", mesh)
    back = body.load_mesh(tmp_path / "m.obj", tmp_path / "m.weights")
    npt.assert_array_equal(back.verts, mesh.verts)
    npt.assert_array_equal(back.faces, mesh.faces)
    npt.assert_array_equal(back.uvs, mesh.uvs)
    npt.assert_array_equal(back.weights, mesh.weights)

    sk = chain_skeleton([(0, 0, 0), (0.5, 0.25, 0), (1.0 / 3.0, 0, 0.1)])
    body.save_skeleton(tmp_path / "sk.txt", sk)
    sk2 = body.load_skeleton(tmp_path / "sk.txt")
    assert sk2.names == sk.names
    npt.assert_array_equal(sk2.parents, sk.parents)
    npt.assert_array_equal(sk2.rest_rot, sk.rest_rot)
    npt.assert_array_equal(sk2.rest_t, sk.rest_t)


def test_obj_rejects_mismatched_vt(tmp_path):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/2 2/1 3/3\n")
    with pytest.raises(ValueError, match="v/vt"):
        body.load_obj(p)


def test_mesh_validation():
    verts = np.zeros((3, 3))
    faces = np.array([[0, 1, 2]])
    uvs = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    good_w = np.ones((3, 1))
    body.TemplateMesh(verts, faces, uvs, good_w)
    with pytest.raises(ValueError, match="sum to 1"):
        body.TemplateMesh(verts, faces, uvs, np.full((3, 1), 0.5))
    with pytest.raises(ValueError, match="unit square"):
        body.TemplateMesh(verts, faces, uvs * 2.0, good_w)
    with pytest.raises(ValueError, match="out-of-range"):
        body.TemplateMesh(verts, np.array([[0, 1, 5]]), uvs, good_w)
