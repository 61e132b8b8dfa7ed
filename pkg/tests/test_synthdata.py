import dataclasses
from pathlib import Path

import numpy as np
import pytest

import dsaa.synthdata as sd
from dsaa.body import build_atlas
from dsaa.conditioning import build_masks
from dsaa.imgio import write_pgm, write_ppm


@pytest.fixture(scope="module")
def figure():
    return sd.build_figure()


@pytest.fixture(scope="module")
def small_spec(figure):
    # 32px images keep dataset-level tests quick; geometry is unchanged
    return sd.SceneSpec(figure=figure, image_size=32)


@pytest.fixture(scope="module")
def small_dataset(small_spec, tmp_path_factory):
    root = tmp_path_factory.mktemp("data") / "set"
    manifest = sd.generate_dataset(small_spec, root, 6, seed=5)
    return manifest


# ---------------------------------------------------------------- figure

def test_figure_shape_and_rig(figure):
    tpl, skel = figure.template, figure.skeleton
    assert 500 <= tpl.verts.shape[0] <= 700
    assert len(skel.names) == 11
    assert {"root", "spine", "head"} <= set(skel.names)
    # every joint rigidly owns some surface
    np.testing.assert_array_equal(tpl.weights.max(axis=0), np.ones(11))
    assert figure.island_of.shape == (tpl.verts.shape[0],)
    assert set(figure.island_of) == set(range(len(figure.island_names)))
    assert figure.head_island in figure.island_names
    assert figure.head_island not in figure.clothed
    # islands are disjoint rectangles
    rects = [figure.islands[n] for n in figure.island_names]
    for i, a in enumerate(rects):
        for b in rects[i + 1:]:
            assert a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1]
    # vertex UVs actually sit inside their island
    for vi, isl in enumerate(figure.island_of):
        u0, v0, u1, v1 = figure.islands[figure.island_names[isl]]
        u, v = tpl.uvs[vi]
        assert u0 - 1e-12 <= u <= u1 + 1e-12
        assert v0 - 1e-12 <= v <= v1 + 1e-12


def test_figure_deterministic(figure):
    again = sd.build_figure()
    np.testing.assert_array_equal(figure.template.verts, again.template.verts)
    np.testing.assert_array_equal(figure.template.weights, again.template.weights)
    assert sd.figure_bytes(figure) == sd.figure_bytes(again)


def test_figure_atlas_coverage(figure):
    for size in (32, 64):
        atlas = build_atlas(figure.template.uvs, figure.template.faces, size, size)
        assert 0.5 <= atlas.coverage <= 1.0


def test_figure_mask_areas(figure):
    masks = build_masks(figure.template, figure.skeleton, 32, 32,
                        tau=0.05, n_face=4, head_joint="head")
    area = {n: float(m.sum()) for n, m in zip(masks.names, masks.data)}
    # distal joints influence less surface than the root
    for joint in ("elbow_l", "elbow_r", "knee_l", "knee_r"):
        assert area[f"pose:{joint}:rx"] < area["pose:root:rx"]
    # face channels live on the head island (plus the 1-texel dilation)
    u0, v0, u1, v1 = figure.islands[figure.head_island]
    face = np.array(masks.face())
    ii, jj = np.nonzero(face.max(axis=0) > 0)
    cu, cv = (jj + 0.5) / 32, (ii + 0.5) / 32
    pad = 2.0 / 32
    assert np.all((cu > u0 - pad) & (cu < u1 + pad)
                  & (cv > v0 - pad) & (cv < v1 + pad))


# ------------------------------------------------------------------ scene

def test_scene_spec_validation(figure):
    with pytest.raises(ValueError):
        sd.SceneSpec(figure=figure, pose_range=(0.3,) * 10)
    with pytest.raises(ValueError):  # range times margin exceeds the cap
        sd.SceneSpec(figure=figure, pose_range=(1.1,) * 11)
    with pytest.raises(ValueError):
        sd.SceneSpec(figure=figure, novel_margin=1.0)
    with pytest.raises(ValueError):
        sd.SceneSpec(figure=figure, rho_spurious=1.5)
    with pytest.raises(ValueError):
        sd.SceneSpec(figure=figure, corr_scalar=33)
    with pytest.raises(ValueError):
        sd.SceneSpec(figure=figure, n_cameras=0)


def test_scene_cameras(small_spec):
    cams = sd.scene_cameras(small_spec)
    assert len(cams) == small_spec.n_cameras
    assert cams[0].cx == small_spec.image_size / 2.0
    # the figure is visible from every ring camera
    theta = np.zeros(33)
    _, posed = sd.frame_mesh(small_spec, theta, 0.5)
    _, masks = sd.render_views(small_spec, posed,
                               sd.frame_texture(small_spec, 0.5, np.zeros(4)))
    for m in masks:
        assert m.sum() > 0.02 * m.size


def test_sampler_theta_u_independent(small_spec):
    n = 1000
    thetas = np.empty((n, 33))
    us = np.empty(n)
    for i in range(n):
        thetas[i], _, us[i] = sd.sample_frame(small_spec, f"{i:06d}", 2)
    r = np.repeat(np.asarray(small_spec.pose_range), 3)
    assert np.all(np.abs(thetas) <= r)
    assert np.all((us >= 0.0) & (us <= 1.0))
    corr = np.corrcoef(thetas.T, us)[-1, :-1]
    assert np.abs(corr).max() < 0.08


def test_inject_correlation_zero_is_bitwise_identity(small_spec):
    coupled = sd.inject_correlation(small_spec, 0.0)
    for i in range(50):
        a = sd.sample_frame(small_spec, f"{i:06d}", 7)
        b = sd.sample_frame(coupled, f"{i:06d}", 7)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        assert a[2] == b[2]


def test_inject_correlation_one_is_deterministic(small_spec):
    coupled = sd.inject_correlation(small_spec, 1.0)
    r = np.repeat(np.asarray(small_spec.pose_range), 3)
    for i in range(20):
        theta, _, u = sd.sample_frame(coupled, f"{i:06d}", 7)
        assert u == theta[coupled.corr_scalar] / (2 * r[coupled.corr_scalar]) + 0.5


def test_inject_correlation_strength(small_spec):
    coupled = sd.inject_correlation(small_spec, 0.9)
    n = 1000
    tk = np.empty(n)
    us = np.empty(n)
    for i in range(n):
        theta, _, us[i] = sd.sample_frame(coupled, f"{i:06d}", 2)
        tk[i] = theta[coupled.corr_scalar]
    assert 0.85 <= np.corrcoef(tk, us)[0, 1] <= 0.95
    with pytest.raises(ValueError):
        sd.inject_correlation(small_spec, -0.1)
    with pytest.raises(ValueError):
        sd.inject_correlation(small_spec, 1.1)


# ------------------------------------------------------- wrinkles, texture

def test_wrinkle_support(small_spec):
    fig = small_spec.figure
    clothed = np.isin(fig.island_of,
                      [fig.island_names.index(n) for n in fig.clothed])
    d0 = sd.wrinkle_displacement(small_spec, 0.0)
    d1 = sd.wrinkle_displacement(small_spec, 1.0)
    assert np.all(d0[~clothed] == 0.0) and np.all(d1[~clothed] == 0.0)
    assert np.abs(d1 - d0).max() > 0.5 * small_spec.wrinkle_amp
    # posed meshes at equal pose differ exactly on the wrinkle support
    theta, _, _ = sd.sample_frame(small_spec, "000000", 0)
    _, p0 = sd.frame_mesh(small_spec, theta, 0.0)
    _, p1 = sd.frame_mesh(small_spec, theta, 1.0)
    diff = np.abs(p1 - p0).sum(axis=1)
    assert np.all(diff[~clothed] == 0.0)
    assert np.count_nonzero(diff[clothed]) > 0.9 * clothed.sum()


def test_texture_regions(small_spec):
    fig = small_spec.figure
    face = np.array([0.5, -0.3, 0.8, -0.1])
    t0 = sd.frame_texture(small_spec, 0.0, face)
    t1 = sd.frame_texture(small_spec, 1.0, face)
    size = small_spec.tex_size
    centers = (np.arange(size) + 0.5) / size
    cu, cv = np.meshgrid(centers, centers, indexing="xy")

    def rect_mask(name):
        u0, v0, u1, v1 = fig.islands[name]
        return (cu >= u0) & (cu <= u1) & (cv >= v0) & (cv <= v1)

    clothed = np.zeros((size, size), dtype=bool)
    for name in fig.clothed:
        clothed |= rect_mask(name)
    d_u = np.abs(t1 - t0).max(axis=0)
    assert np.all(d_u[~clothed] == 0.0)  # head and gaps ignore u
    assert d_u[clothed].mean() > 0.05
    # face vector only touches the head island
    t2 = sd.frame_texture(small_spec, 0.0, -face)
    d_f = np.abs(t2 - t0).max(axis=0)
    assert np.all(d_f[~rect_mask(fig.head_island)] == 0.0)
    assert d_f.max() > 0.05
    for t in (t0, t1, t2):
        assert t.min() >= 0.0 and t.max() <= 1.0
    with pytest.raises(ValueError):
        sd.frame_texture(small_spec, 0.0, np.zeros(3))


# ----------------------------------------------------------------- dataset

def test_generate_dataset_deterministic(small_spec, small_dataset, tmp_path):
    other = tmp_path / "again"
    sd.generate_dataset(small_spec, other, 6, seed=5)
    base = Path(small_dataset.root)
    rel = sorted(p.relative_to(base) for p in base.rglob("*") if p.is_file())
    assert rel == sorted(p.relative_to(other) for p in other.rglob("*")
                         if p.is_file())
    for p in rel:
        assert (base / p).read_bytes() == (other / p).read_bytes(), p


def test_dataset_layout_and_manifest(small_dataset):
    root = Path(small_dataset.root)
    assert (root / "manifest.txt").exists()
    frame = root / "frames" / "000000"
    for name in ("theta.txt", "f.txt", "u.txt", "mesh.obj"):
        assert (frame / name).exists()
    for k in range(small_dataset.spec.n_cameras):
        assert (frame / f"cam{k}.ppm").exists()
        assert (frame / f"cam{k}_mask.pgm").exists()
    assert len((frame / "theta.txt").read_text().splitlines()) == 33
    loaded = sd.load_manifest(root)
    assert loaded.spec_hash == small_dataset.spec_hash
    assert [e.id for e in loaded.frames] == [e.id for e in small_dataset.frames]
    rec = sd.load_frame(loaded, "000003")
    want = sd.sample_frame(loaded.spec, "000003", loaded.spec.seed)
    np.testing.assert_array_equal(rec.theta, want[0])
    np.testing.assert_array_equal(rec.face, want[1])
    assert rec.u == want[2]
    assert rec.verts.shape == loaded.spec.figure.template.verts.shape
    assert rec.images[0].shape == (3, 32, 32)


def test_manifest_tamper_detected(small_dataset, tmp_path):
    root = Path(small_dataset.root)
    copy = tmp_path / "tampered"
    copy.mkdir()
    text = (root / "manifest.txt").read_text()
    (copy / "manifest.txt").write_text(
        text.replace("spec.stripe_amp = 0.35", "spec.stripe_amp = 0.36"))
    with pytest.raises(ValueError, match="hash"):
        sd.load_manifest(copy)
    (copy / "manifest.txt").write_text(text + "bogus = 1\n")
    with pytest.raises(ValueError, match="unknown manifest keys"):
        sd.load_manifest(copy)


def test_generate_dataset_validates(small_spec, tmp_path):
    with pytest.raises(ValueError):
        sd.generate_dataset(small_spec, tmp_path / "x", 1)


def test_registration_bit_exact(figure, tmp_path):
    # re-rendering the stored mesh with the regenerated texture must
    # quantize to exactly the bytes on disk, for every frame and camera
    spec = sd.SceneSpec(figure=figure)
    manifest = sd.generate_dataset(spec, tmp_path / "set", 2, seed=3)
    for fid in manifest.ids():
        rec = sd.load_frame(manifest, fid)
        tex = sd.frame_texture(spec, rec.u, rec.face)
        images, masks = sd.render_views(spec, rec.verts, tex)
        for k in range(spec.n_cameras):
            write_ppm(tmp_path / "re.ppm", images[k])
            write_pgm(tmp_path / "re.pgm", masks[k])
            stored = manifest.root / "frames" / fid / f"cam{k}.ppm"
            assert (tmp_path / "re.ppm").read_bytes() == stored.read_bytes()
            stored = manifest.root / "frames" / fid / f"cam{k}_mask.pgm"
            assert (tmp_path / "re.pgm").read_bytes() == stored.read_bytes()


def test_hidden_factor_changes_images_locally(figure):
    spec = sd.SceneSpec(figure=figure)
    theta, face, _ = sd.sample_frame(spec, "000000", 0)
    _, p0 = sd.frame_mesh(spec, theta, 0.0)
    _, p1 = sd.frame_mesh(spec, theta, 1.0)
    i0, m0 = sd.render_views(spec, p0, sd.frame_texture(spec, 0.0, face))
    i1, m1 = sd.render_views(spec, p1, sd.frame_texture(spec, 1.0, face))
    for a, b, ma, mb in zip(i0, i1, m0, m1):
        assert np.abs(a - b).mean() > 0.01
        # away from both silhouettes the stored-precision images agree
        off = (ma == 0.0) & (mb == 0.0)
        qa = np.round(np.clip(a, 0.0, 1.0) * 255.0)
        qb = np.round(np.clip(b, 0.0, 1.0) * 255.0)
        np.testing.assert_array_equal(qa[:, off], qb[:, off])


def test_split_dataset(small_spec, tmp_path):
    manifest = sd.generate_dataset(small_spec, tmp_path / "set", 20, seed=1)
    split = sd.split_dataset(manifest, 0.2, seed=9)
    train = split.ids(split="train")
    test_std = split.ids(group="standard", split="test")
    novel = split.ids(group="novel")
    assert len(test_std) == 4 and len(train) == 16 and len(novel) == 4
    assert not set(train) & set(test_std)
    limit = np.repeat(np.asarray(small_spec.pose_range), 3)
    seen_beyond = False
    for fid in novel:
        rec = sd.load_frame(split, fid)
        assert np.all(np.abs(rec.theta) <= limit * small_spec.novel_margin)
        seen_beyond |= bool(np.any(np.abs(rec.theta) > limit))
        assert (Path(split.root) / "frames" / fid / "cam0.ppm").exists()
    assert seen_beyond
    # the rewritten manifest reloads to the same split
    reloaded = sd.load_manifest(split.root)
    assert reloaded.test_fraction == 0.2 and reloaded.split_seed == 9
    assert reloaded.ids(split="train") == train
    assert reloaded.ids(group="novel") == novel
    # splitting again with the same seed reproduces the manifest bytes
    text = (Path(split.root) / "manifest.txt").read_bytes()
    sd.split_dataset(manifest, 0.2, seed=9)
    assert (Path(split.root) / "manifest.txt").read_bytes() == text


def test_split_dataset_degenerate(small_dataset):
    with pytest.raises(ValueError):
        sd.split_dataset(small_dataset, 0.01, seed=0)  # rounds to zero frames
    with pytest.raises(ValueError):
        sd.split_dataset(small_dataset, 1.0, seed=0)
    with pytest.raises(ValueError):
        sd.split_dataset(small_dataset, 0.0, seed=0)


def test_hidden_factor_recoverable(small_spec):
    # linear probe from raw pixels to u; u must be present in the images
    n, n_train = 160, 128
    dim = small_spec.n_cameras * 3 * small_spec.image_size ** 2
    X = np.empty((n, dim))
    y = np.empty(n)
    for i in range(n):
        theta, face, u = sd.sample_frame(small_spec, f"{i:06d}", 11)
        _, posed = sd.frame_mesh(small_spec, theta, u)
        images, _ = sd.render_views(small_spec, posed,
                                    sd.frame_texture(small_spec, u, face))
        X[i] = np.concatenate([im.ravel() for im in images])
        y[i] = u
    Xtr, Xte, ytr, yte = X[:n_train], X[n_train:], y[:n_train], y[n_train:]
    gram = Xtr @ Xtr.T
    lam = 1e-4 * np.trace(gram) / n_train
    alpha = np.linalg.solve(gram + lam * np.eye(n_train), ytr - ytr.mean())
    pred = (Xte @ Xtr.T) @ alpha + ytr.mean()
    r2 = 1.0 - np.sum((pred - yte) ** 2) / np.sum((yte - yte.mean()) ** 2)
    assert r2 > 0.9
