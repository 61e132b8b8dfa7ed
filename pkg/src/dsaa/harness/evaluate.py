"""Driving evaluation, the ablation report, and influence heatmaps.

The driving error is the mean per-pixel L1 over the foreground union
(ground-truth or predicted silhouette), scaled by 255. Reports aggregate
per-frame errors that are cached next to each run keyed by the model and
dataset hashes, so regenerating a report is a pure re-aggregation.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from ..avatar import AvatarModel
from ..body import load_mesh, load_skeleton
from ..conditioning import build_masks, influence_heatmap
from ..disentangle import StatisticsNet, fit_statistics, mi_estimate
from ..imgio import write_pgm, write_ppm
from ..renderer import RasterConfig, losses, rasterize
from ..rng import stream
from .config import ABLATIONS
from .data import TrainData

__all__ = ["load_model", "union_l1", "render_frame", "drive", "eval_errors",
           "build_report", "write_heatmaps", "heatmap_locality",
           "reconstruction_gap", "VARIANT_LABELS"]

VARIANT_LABELS = (("ours", "OURS"),
                  ("pose+face", "pose+face"),
                  ("pose+face+latent", "pose+face+latent"),
                  ("no_disent", "OURS (no disent.)"),
                  ("no_spatial_local", "OURS (no spat. local.)"),
                  ("no_shadow", "OURS (no shadow)"))

_METRIC_TAG = "union-l1-v1"


def load_model(checkpoint, data: TrainData) -> AvatarModel:
    """Model from a run directory (or a direct container path), rigged
    with the dataset's template and skeleton."""
    path = Path(checkpoint)
    if path.is_dir():
        path = path / "model.dsaa1"
    if not path.exists():
        raise ValueError(f"no model checkpoint at {path}")
    return AvatarModel.load(path, data.template, data.skeleton)


def _raster_config(data: TrainData) -> RasterConfig:
    return RasterConfig(sigma_r=data.spec.sigma_r, gamma=data.spec.gamma_r)


def union_l1(pred_img, pred_mask, gt_img, gt_mask) -> float:
    """Mean per-pixel L1 x 255 over the union of the two silhouettes."""
    union = (np.asarray(gt_mask) >= 0.5) | (np.asarray(pred_mask) >= 0.5)
    if not union.any():
        return 0.0
    diff = np.abs(np.asarray(pred_img, dtype=np.float64)
                  - np.asarray(gt_img, dtype=np.float64))
    return float(diff[:, union].mean() * 255.0)


def render_frame(model: AvatarModel, data: TrainData, frame_id: str, z=None):
    """All-camera renders for one frame at a fixed latent.

    Returns (images [n_cam,3,H,W], masks [n_cam,H,W]) as plain arrays; no
    graph is kept.
    """
    cfg = _raster_config(data)
    ao = data.ao(frame_id) if model.config.use_shadow else None
    images, masks = [], []
    with dc.no_grad():
        for k in range(len(data.cameras)):
            pred = model.forward(data.signal(frame_id, k), z, ao)
            rt = rasterize(pred.posed, data.template.faces,
                           data.template.uvs, pred.final,
                           data.cameras[k], cfg)
            images.append(rt.image.data.copy())
            masks.append(rt.mask.data.copy())
    return np.stack(images), np.stack(masks)


def _frame_errors(images, masks, fr) -> list[float]:
    return [union_l1(images[k], masks[k], fr.images[k], fr.masks[k])
            for k in range(images.shape[0])]


# -------------------------------------------------------------------- drive

def _fit_latent(model, data, frame_id, steps, lr, weights):
    """Per-frame reconstruction: gradient descent on z against the ground
    truth images over all cameras, keeping the best iterate seen.

    Initialization at z = 0 makes the result at least as good as zero
    driving under the reported metric.
    """
    fr = data.frame(frame_id)
    cfg = _raster_config(data)
    ao = data.ao(frame_id) if model.config.use_shadow else None
    zstore = dc.ParamStore()
    zt = zstore.add("z", np.zeros(model.config.d_z,
                                  dtype=model.config.np_dtype))
    opt = dc.Adam(zstore, lr=lr)
    best = None
    for it in range(steps + 1):
        zstore.zero_grad()
        total, images, masks = None, [], []
        for k in range(len(data.cameras)):
            pred = model.forward(data.signal(frame_id, k), zt, ao)
            rt = rasterize(pred.posed, data.template.faces,
                           data.template.uvs, pred.final,
                           data.cameras[k], cfg)
            part, _ = losses(rt, fr.images[k], fr.masks[k], None, None,
                             data.template, weights, 2, retain_lap=False)
            total = part if total is None else dc.add(total, part)
            images.append(rt.image.data.copy())
            masks.append(rt.mask.data.copy())
        images, masks = np.stack(images), np.stack(masks)
        score = float(np.mean(_frame_errors(images, masks, fr)))
        if best is None or score < best[0]:
            best = (score, zt.data.copy(), images, masks)
        if it < steps:
            dc.backward(total)
            opt.step()
    _, z, images, masks = best
    return z, images, masks


def drive(model: AvatarModel, data: TrainData, frame_ids, mode: str = "zero",
          out_dir=None, seed: int = 0, steps: int = 40, lr: float = 0.1,
          weights=None) -> dict:
    """Render the requested frames under one imputation mode.

    zero: z = 0 (maximum-likelihood driving). sample: z ~ N(0, I) per
    frame under `seed`. fit: per-frame optimization of z against the
    ground truth. Returns {frame_id: {"z", "cams", "err"}} and, when
    out_dir is given, writes the renders plus a drive.kv error table.
    """
    if mode not in ("zero", "sample", "fit"):
        raise ValueError(f"unknown imputation mode {mode!r}")
    if mode != "zero" and not model.config.use_latent:
        raise ValueError(f"{mode} imputation needs a latent-capable model")
    from ..renderer import LossWeights
    weights = weights or LossWeights()
    frame_ids = list(frame_ids)
    if not frame_ids:
        raise ValueError("no frames requested")
    if model.config.use_shadow:
        data.ensure_ao(frame_ids)

    results = {}
    for fid in frame_ids:
        fr = data.frame(fid)
        if mode == "fit":
            z, images, masks = _fit_latent(model, data, fid, steps, lr,
                                           weights)
        else:
            z = (stream(seed, "drive", fid).standard_normal(model.config.d_z)
                 if mode == "sample" else None)
            images, masks = render_frame(model, data, fid, z)
        errs = _frame_errors(images, masks, fr)
        results[fid] = {"z": z, "cams": errs, "err": float(np.mean(errs)),
                        "images": images, "masks": masks}

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [f"mode = {mode}", f"seed = {seed}"]
        for fid in frame_ids:
            r = results[fid]
            for k in range(r["images"].shape[0]):
                write_ppm(out / f"{fid}_cam{k}.ppm", r["images"][k])
                lines.append(f"frame.{fid}.cam{k} = {r['cams'][k]!r}")
            lines.append(f"frame.{fid} = {r['err']!r}")
        mean = float(np.mean([results[f]["err"] for f in frame_ids]))
        lines.append(f"mean = {mean!r}")
        (out / "drive.kv").write_text("\n".join(lines) + "\n")
    return results


# ------------------------------------------------------------------- report

def eval_errors(model: AvatarModel, data: TrainData, frame_ids,
                cache_path=None) -> dict:
    """Zero-driving error per frame, with an optional keyed disk cache."""
    frame_ids = list(frame_ids)
    key = None
    cached = {}
    if cache_path is not None:
        key = _cache_key(model, data)
        cached = _read_cache(Path(cache_path), key)
    missing = [f for f in frame_ids if f not in cached]
    if missing and model.config.use_shadow:
        data.ensure_ao(missing)
    for fid in missing:
        images, masks = render_frame(model, data, fid, None)
        cached[fid] = float(np.mean(_frame_errors(images, masks,
                                                  data.frame(fid))))
    if cache_path is not None and missing:
        _write_cache(Path(cache_path), key, cached)
    return {f: cached[f] for f in frame_ids}


def _cache_key(model, data) -> str:
    h = hashlib.sha256()
    for name, arr in model.store.state_arrays().items():
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(data.manifest.spec_hash.encode())
    h.update(_METRIC_TAG.encode())
    return h.hexdigest()


def _read_cache(path: Path, key: str) -> dict:
    if not path.exists():
        return {}
    lines = path.read_text().splitlines()
    if not lines or lines[0] != f"key = {key}":
        return {}
    out = {}
    for ln in lines[1:]:
        name, _, val = ln.partition(" = ")
        if name.startswith("frame."):
            out[name[len("frame."):]] = float(val)
    return out


def _write_cache(path: Path, key: str, errors: dict) -> None:
    lines = [f"key = {key}"]
    lines += [f"frame.{f} = {errors[f]!r}" for f in sorted(errors)]
    path.write_text("\n".join(lines) + "\n")


def _subsample(ids, limit, rng) -> list:
    if len(ids) <= limit:
        return list(ids)
    picks = rng.choice(len(ids), size=limit, replace=False)
    return [ids[int(p)] for p in sorted(picks)]


def _probe_r2(mu_train, u_train, mu_test, u_test) -> float:
    """Ridge regression latent mean -> hidden factor, scored held-out."""
    X, y = np.asarray(mu_train, np.float64), np.asarray(u_train, np.float64)
    Xc, yc = X - X.mean(0), y - y.mean()
    lam = 1e-4 * np.trace(Xc.T @ Xc) / max(len(X), 1)
    w = np.linalg.solve(Xc.T @ Xc + lam * np.eye(X.shape[1]), Xc.T @ yc)
    pred = (np.asarray(mu_test, np.float64) - X.mean(0)) @ w + y.mean()
    resid = np.asarray(u_test, np.float64) - pred
    denom = np.sum((u_test - np.mean(u_test)) ** 2)
    if denom == 0.0:
        return 0.0
    return float(1.0 - np.sum(resid ** 2) / denom)


def _encodings(model, data, ids):
    mu = []
    with dc.no_grad():
        for fid in ids:
            mu.append(model.encode(data.pos_map(fid)).mu.data.copy())
    c = np.stack([data.scalars(f) for f in ids])
    u = np.array([data.frame(f).u for f in ids])
    return np.stack(mu), c, u


def latent_mi(model, data, ids, seed: int = 0, steps: int = 400) -> float:
    """MI(z; signal) lower bound from a freshly fit statistics net over
    the posterior means of `ids`."""
    mu, c, _ = _encodings(model, data, ids)
    store = dc.ParamStore()
    stats = StatisticsNet(store, "mi", c.shape[1], mu.shape[1],
                          rng=stream(seed, "report-mi"))
    fit_statistics(store, stats, c, mu, steps=steps,
                   batch=min(64, len(ids)), seed=seed)
    return mi_estimate(stats, c, mu)


def heatmap_locality(model: AvatarModel, data: TrainData, indices=None,
                     n_perturb: int = 8, seed: int = 0) -> dict:
    """Fraction of influence-heatmap mass inside each scalar's true mask.

    Masks are rebuilt from the rig (not taken from the model), so the
    no-locality ablation is scored against the same reference. Scalars
    whose heatmap is identically zero are omitted.
    """
    g = model.config.geo_res
    ref = build_masks(data.template, data.skeleton, g, g,
                      tau=model.config.tau, n_face=model.config.n_face,
                      head_joint=model.config.head_joint)
    n = ref.data.shape[0]
    if indices is None:
        indices = range(ref.n_pose)
    base = np.zeros(n, dtype=np.float64)
    out = {}
    for k in indices:
        k = int(k)
        if not 0 <= k < n:
            raise ValueError(f"signal index {k} out of range [0, {n})")
        heat = influence_heatmap(lambda v: _embed(model, v), base, k,
                                 n_perturb, seed=seed)
        total = heat.sum()
        if total > 0:
            out[k] = float((heat * ref.data[k]).sum() / total)
    return out


def _embed(model, scalars):
    n_pose = model.masks.n_pose
    dt = model.config.np_dtype
    scalars = np.asarray(scalars, dtype=np.float64)
    with dc.no_grad():
        ep = model.proj_pose(scalars[:n_pose].astype(dt))
        ef = model.proj_face(scalars[n_pose:].astype(dt))
    return np.concatenate([ep.data, ef.data], axis=0)


def write_heatmaps(model: AvatarModel, out_dir, indices, signal=None,
                   n_perturb: int = 16, seed: int = 0) -> list:
    """One normalized PGM per requested signal scalar; returns the paths."""
    n = model.masks.data.shape[0]
    if signal is None:
        signal = np.zeros(n, dtype=np.float64)
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (n,):
        raise ValueError(f"signal must supply {n} scalars, got {signal.shape}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in indices:
        k = int(k)
        if not 0 <= k < n:
            raise ValueError(f"signal index {k} out of range [0, {n})")
        heat = influence_heatmap(lambda v: _embed(model, v), signal, k,
                                 n_perturb, seed=seed)
        name = model.masks.names[k].replace(":", "_")
        path = out / f"heatmap_{k:02d}_{name}.pgm"
        write_pgm(path, heat)
        paths.append(path)
    return paths


def build_report(runs: dict, data: TrainData, out_dir, seed: int = 0,
                 eval_frames: int = 200) -> str:
    """Error table plus disentanglement diagnostics across the six
    canonical variants; writes report.txt and report.kv into out_dir."""
    known = [v for v, _ in VARIANT_LABELS]
    missing = [v for v in known if v not in runs]
    if missing:
        raise ValueError(f"missing variants: {', '.join(missing)}")
    unknown = sorted(set(runs) - set(known))
    if unknown:
        raise ValueError(f"unknown variants: {', '.join(unknown)}; "
                         f"expected {', '.join(ABLATIONS)}")

    test_ids = _subsample(data.ids(group="standard", split="test"),
                          eval_frames, stream(seed, "report", "test"))
    train_ids = _subsample(data.train_ids(), eval_frames,
                           stream(seed, "report", "train"))
    if not test_ids or not train_ids:
        raise ValueError("dataset provides no train/test frames to score")

    rows, kv = [], [f"metric = {_METRIC_TAG}",
                    f"frames.train = {len(train_ids)}",
                    f"frames.test = {len(test_ids)}"]
    diag = []
    for variant, label in VARIANT_LABELS:
        run_dir = Path(runs[variant])
        model = load_model(run_dir, data)
        tr = eval_errors(model, data, train_ids, run_dir / "errors_train.kv")
        te = eval_errors(model, data, test_ids, run_dir / "errors_test.kv")
        tr_m = float(np.mean(list(tr.values())))
        te_m = float(np.mean(list(te.values())))
        rows.append((label, tr_m, te_m))
        kv.append(f"error.{variant}.train = {tr_m!r}")
        kv.append(f"error.{variant}.test = {te_m!r}")

        loc = heatmap_locality(model, data, seed=seed)
        loc_m = float(np.mean(list(loc.values()))) if loc else float("nan")
        kv.append(f"locality.{variant} = {loc_m!r}")
        extras = [f"locality {loc_m:.3f}"]
        if model.config.use_latent:
            mi = latent_mi(model, data, test_ids, seed=seed)
            mu_tr, _, u_tr = _encodings(model, data, train_ids)
            mu_te, _, u_te = _encodings(model, data, test_ids)
            r2 = _probe_r2(mu_tr, u_tr, mu_te, u_te)
            kv.append(f"mi.{variant} = {mi!r}")
            kv.append(f"probe_r2.{variant} = {r2!r}")
            extras += [f"MI(z;signal) {mi:.3f} nats", f"probe R2 {r2:.3f}"]
        diag.append(f"{label}: " + ", ".join(extras))

    width = max(len(label) for label, _, _ in rows)
    lines = [f"driving error (mean per-pixel L1 x 255, foreground union)",
             f"frames: {len(train_ids)} train / {len(test_ids)} test",
             "",
             f"{'variant'.ljust(width)}    train     test"]
    for label, tr_m, te_m in rows:
        lines.append(f"{label.ljust(width)} {tr_m:8.3f} {te_m:8.3f}")
    lines += ["", "diagnostics:"] + diag
    text = "\n".join(lines) + "\n"

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text)
    (out / "report.kv").write_text("\n".join(kv) + "\n")
    return text


# --------------------------------------------- driving-vs-reconstruction gap

def reconstruction_gap(model: AvatarModel, data: TrainData, frame_id: str,
                       steps: int = 40, lr: float = 0.1,
                       lo: float = 0.1, hi: float = 0.9,
                       thresh: float = 2.0 / 255.0):
    """(masked_ratio, whole_ratio) of zero-driving error to fitted error.

    The mask selects pixels whose ground truth actually depends on the
    hidden appearance factor (re-rendered at factor values lo and hi);
    the driving error should concentrate there, so the masked ratio is
    expected to exceed the whole-image ratio.
    """
    from ..renderer import LossWeights
    from ..synthdata import frame_mesh, frame_texture, render_views

    fr = data.frame(frame_id)
    sens = []
    for uval in (lo, hi):
        _, posed = frame_mesh(data.spec, fr.theta, uval)
        tex = frame_texture(data.spec, uval, fr.face)
        imgs, _ = render_views(data.spec, posed, tex)
        sens.append(np.stack(imgs))
    region = (np.abs(sens[1] - sens[0]).max(axis=1) > thresh)  # [n_cam,H,W]
    if not region.any():
        raise ValueError(f"frame {frame_id} has no factor-sensitive pixels")

    zero_img, _ = render_frame(model, data, frame_id, None)
    _, fit_img, _ = _fit_latent(model, data, frame_id, steps, lr,
                                LossWeights())
    gt = fr.images.astype(np.float64)

    def pooled(pred, mask):
        sel = np.broadcast_to(mask[:, None], pred.shape)
        return float(np.abs(pred - gt)[sel].mean() * 255.0)

    whole = np.ones_like(region)
    masked_ratio = pooled(zero_img, region) / max(pooled(fit_img, region),
                                                  1e-9)
    whole_ratio = pooled(zero_img, whole) / max(pooled(fit_img, whole), 1e-9)
    return masked_ratio, whole_ratio
