"""Dataset directory layout, manifest, splitting, and frame loading.

Layout under a dataset root:

    manifest.txt
    template.obj / template.weights / skeleton.txt
    frames/<id>/theta.txt  f.txt  u.txt  mesh.obj  cam<k>.ppm  cam<k>_mask.pgm

Per-frame text files hold one float per line via repr(), which parses
back to the identical float64 in any locale.  The manifest carries the
full scene description plus a hash over it and the figure geometry, so
a loaded manifest can prove it still matches the code that would
regenerate it.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..body import save_obj, load_obj, save_mesh, save_skeleton
from ..imgio import read_pgm, read_ppm, write_pgm, write_ppm
from ..rng import stream
from .figure import Figure, build_figure, figure_bytes
from .generate import frame_mesh, frame_texture, render_views
from .scene import SceneSpec, sample_frame

__all__ = ["FrameEntry", "FrameRecord", "DatasetManifest",
           "generate_dataset", "split_dataset", "load_manifest",
           "load_frame"]

_FORMAT = "dsaa-dataset-1"
_FIGURES = {"default-v1": build_figure}

# serialized SceneSpec fields in manifest order; figure travels as a tag
_SPEC_FIELDS = tuple(f.name for f in dataclasses.fields(SceneSpec)
                     if f.name != "figure")


@dataclass(frozen=True)
class FrameEntry:
    id: str
    group: str  # standard | novel
    split: str  # unsplit | train | test


@dataclass(frozen=True)
class FrameRecord:
    id: str
    theta: np.ndarray
    face: np.ndarray
    u: float
    verts: np.ndarray  # posed, wrinkled; the exact geometry behind the gt
    images: list       # [3,H,W] float per camera
    masks: list        # [H,W] float per camera


@dataclass
class DatasetManifest:
    root: Path
    spec: SceneSpec
    spec_hash: str
    frames: list
    test_fraction: float = None
    split_seed: int = None

    def ids(self, *, group=None, split=None):
        return [e.id for e in self.frames
                if (group is None or e.group == group)
                and (split is None or e.split == split)]


def _fmt(value):
    if isinstance(value, tuple):
        return ",".join(repr(float(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return repr(int(value))


def _spec_lines(spec: SceneSpec):
    lines = [f"figure = {spec.figure.tag}"]
    for name in _SPEC_FIELDS:
        lines.append(f"spec.{name} = {_fmt(getattr(spec, name))}")
    return lines


def _spec_hash(spec: SceneSpec) -> str:
    h = hashlib.sha256()
    h.update(_FORMAT.encode())
    h.update("\n".join(_spec_lines(spec)).encode())
    h.update(figure_bytes(spec.figure))
    return h.hexdigest()


def _write_manifest(m: DatasetManifest) -> None:
    lines = [f"format = {_FORMAT}", f"spec_hash = {m.spec_hash}"]
    lines += _spec_lines(m.spec)
    if m.test_fraction is not None:
        lines.append(f"split.test_fraction = {repr(float(m.test_fraction))}")
        lines.append(f"split.seed = {int(m.split_seed)}")
    for e in m.frames:
        lines.append(f"frame.{e.id} = {e.group} {e.split}")
    (m.root / "manifest.txt").write_text("\n".join(lines) + "\n")


def _parse_value(name, text):
    default = next(f.default for f in dataclasses.fields(SceneSpec)
                   if f.name == name)
    if isinstance(default, tuple):
        return tuple(float(x) for x in text.split(","))
    if isinstance(default, float):
        return float(text)
    return int(text)


def load_manifest(root) -> DatasetManifest:
    root = Path(root)
    raw = {}
    frames = []
    for ln in (root / "manifest.txt").read_text().splitlines():
        if not ln.strip():
            continue
        key, _, value = ln.partition(" = ")
        if not _:
            raise ValueError(f"malformed manifest line: {ln!r}")
        if key.startswith("frame."):
            group, _, split = value.partition(" ")
            frames.append(FrameEntry(key[len("frame."):], group, split))
        else:
            raw[key] = value
    if raw.pop("format", None) != _FORMAT:
        raise ValueError("unsupported or missing dataset format")
    if raw.get("figure") not in _FIGURES:
        raise ValueError(f"unknown figure tag {raw.get('figure')!r}")
    figure = _FIGURES[raw.pop("figure")]()
    kwargs = {}
    for name in _SPEC_FIELDS:
        key = f"spec.{name}"
        if key not in raw:
            raise ValueError(f"manifest missing {key}")
        kwargs[name] = _parse_value(name, raw.pop(key))
    spec = SceneSpec(figure=figure, **kwargs)
    stored = raw.pop("spec_hash", "")
    fraction = raw.pop("split.test_fraction", None)
    seed = raw.pop("split.seed", None)
    if raw:
        raise ValueError(f"unknown manifest keys: {sorted(raw)}")
    if stored != _spec_hash(spec):
        raise ValueError("manifest hash does not match the regenerated scene")
    return DatasetManifest(root=root, spec=spec, spec_hash=stored,
                           frames=frames,
                           test_fraction=None if fraction is None else float(fraction),
                           split_seed=None if seed is None else int(seed))


def _floats_txt(path, values) -> None:
    with open(path, "w") as f:
        for x in np.atleast_1d(np.asarray(values, dtype=np.float64)):
            f.write(repr(float(x)) + "\n")


def _read_floats(path) -> np.ndarray:
    return np.array([float(ln) for ln in Path(path).read_text().split()])


def _write_frame(root: Path, spec: SceneSpec, frame_id: str, seed: int, *,
                 extend: float = 1.0):
    theta, face, u = sample_frame(spec, frame_id, seed, extend=extend)
    _, posed = frame_mesh(spec, theta, u)
    images, masks = render_views(spec, posed, frame_texture(spec, u, face))
    d = root / "frames" / frame_id
    d.mkdir(parents=True, exist_ok=True)
    _floats_txt(d / "theta.txt", theta)
    _floats_txt(d / "f.txt", face)
    _floats_txt(d / "u.txt", [u])
    tpl = spec.figure.template
    save_obj(d / "mesh.obj", posed, tpl.faces, tpl.uvs)
    for k, (img, msk) in enumerate(zip(images, masks)):
        write_ppm(d / f"cam{k}.ppm", img)
        write_pgm(d / f"cam{k}_mask.pgm", msk)
    return theta, u


def generate_dataset(spec: SceneSpec, out_dir, n_frames: int,
                     seed: int = None) -> DatasetManifest:
    """Render n_frames sampled frames into out_dir and write the manifest."""
    if n_frames < 2:
        raise ValueError("n_frames must be at least 2")
    seed = spec.seed if seed is None else int(seed)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    save_mesh(root / "template.obj", root / "template.weights",
              spec.figure.template)
    save_skeleton(root / "skeleton.txt", spec.figure.skeleton)
    thetas, us, entries = [], [], []
    for i in range(n_frames):
        fid = f"{i:06d}"
        theta, u = _write_frame(root, spec, fid, seed)
        thetas.append(theta)
        us.append(u)
        entries.append(FrameEntry(fid, "standard", "unsplit"))
    if spec.rho_spurious == 0.0 and n_frames >= 500:
        # independence tripwire: honest seeds sit near 3/sqrt(n) at worst,
        # a shared-stream bug produces correlations near 1
        corr = np.corrcoef(np.asarray(thetas).T, np.asarray(us))[-1, :-1]
        if np.abs(corr).max() > 4.5 / np.sqrt(n_frames):
            raise RuntimeError(
                f"hidden factor correlates with pose ({np.abs(corr).max():.3f})")
    m = DatasetManifest(root=root, spec=dataclasses.replace(spec, seed=seed),
                        spec_hash="", frames=entries)
    m.spec_hash = _spec_hash(m.spec)
    _write_manifest(m)
    return m


def split_dataset(manifest: DatasetManifest, test_fraction: float,
                  seed: int) -> DatasetManifest:
    """Tag a uniform train/test split and add a novel-pose test group.

    Novel frames (as many as the held-out test frames) are drawn with the
    spec's novel_margin applied to every pose range, rendered, and tagged
    test; their ranges strictly exceed the training ranges by construction.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    spec = manifest.spec
    standard = [e for e in manifest.frames if e.group == "standard"]
    n_test = int(round(len(standard) * test_fraction))
    if not 0 < n_test < len(standard):
        raise ValueError(
            f"degenerate split: {n_test} test frames of {len(standard)}")
    hold = set(np.asarray(
        stream(seed, "split").permutation(len(standard))[:n_test]))
    frames = [dataclasses.replace(e, split="test" if i in hold else "train")
              for i, e in enumerate(standard)]
    limit = np.repeat(np.asarray(spec.pose_range), 3) * spec.novel_margin
    for i in range(n_test):
        fid = f"novel{i:04d}"
        theta, _ = _write_frame(manifest.root, spec, fid, seed,
                                extend=spec.novel_margin)
        assert np.all(np.abs(theta) <= limit)
        frames.append(FrameEntry(fid, "novel", "test"))
    out = DatasetManifest(root=manifest.root, spec=spec,
                          spec_hash=manifest.spec_hash, frames=frames,
                          test_fraction=float(test_fraction),
                          split_seed=int(seed))
    _write_manifest(out)
    return out


def load_frame(manifest: DatasetManifest, frame_id: str) -> FrameRecord:
    d = Path(manifest.root) / "frames" / frame_id
    verts, _, _ = load_obj(d / "mesh.obj")
    images, masks = [], []
    for k in range(manifest.spec.n_cameras):
        images.append(read_ppm(d / f"cam{k}.ppm"))
        masks.append(read_pgm(d / f"cam{k}_mask.pgm"))
    return FrameRecord(id=frame_id, theta=_read_floats(d / "theta.txt"),
                       face=_read_floats(d / "f.txt"),
                       u=float(_read_floats(d / "u.txt")[0]),
                       verts=verts, images=images, masks=masks)
