"""Two-phase training loop.

Phase 1 (mesh warmup) fits geometry directly against the registered
meshes and never rasterizes; phase 2 switches to the image objective
plus the latent regularizers (KL, adversarial independence, perturbation
consistency). The adversary is a separate statistics net with its own
optimizer, stepped once per model step on the same minibatch.

Every random draw comes from a stream keyed by (seed, purpose,
iteration), so a resumed run consumes exactly the numbers the
uninterrupted run would have and checkpoints are bit-reproducible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from ..avatar import AvatarModel, reparameterize
from ..disentangle import (StatisticsNet, adversarial_dis_loss, joint_sites,
                           kl_loss, mine_loss, perturbation_loss)
from ..renderer import RasterConfig, losses, rasterize
from ..rng import stream
from .config import TrainConfig, config_text, parse_config
from .data import TrainData

__all__ = ["TrainingDiverged", "TrainResult", "train"]

# resumable-run keys that may legitimately differ between sessions
_RESUME_FREE = ("train.iters", "train.checkpoint_every", "train.eval_frames",
                "train.drive_steps", "train.drive_lr", "train.out")


class TrainingDiverged(RuntimeError):
    """Loss left the finite range; the run aborted on its last checkpoint."""


@dataclass
class TrainResult:
    model: AvatarModel
    start_iter: int
    end_iter: int
    history: list          # one dict per executed iteration


def train(config: TrainConfig, resume: bool = False, echo=None) -> TrainResult:
    """Run (or continue) one training job into config.out.

    resume=True picks up from out/trainer.dsaa1 when present and starts
    fresh otherwise; resume=False insists on a clean directory. echo, if
    given, receives one already-formatted line per iteration.
    """
    cfg = config.resolved()
    mw, lw = cfg.model, cfg.weights
    out = Path(cfg.out)
    if not cfg.dataset or not cfg.out:
        raise ValueError("config needs dataset and out paths")
    out.mkdir(parents=True, exist_ok=True)

    state_path = out / "trainer.dsaa1"
    if state_path.exists() and not resume:
        raise ValueError(f"{out} already holds a run; resume it or point "
                         "--out at a fresh directory")
    if state_path.exists():
        _check_resumable(out / "config.txt", cfg)
    (out / "config.txt").write_text(config_text(cfg))

    data = TrainData(cfg.dataset, geo_res=mw.geo_res,
                     ao_res=mw.shadow_res)
    train_ids = data.train_ids()
    if len(train_ids) < cfg.batch:
        raise ValueError(f"dataset provides {len(train_ids)} training "
                         f"frames; batch size {cfg.batch} needs that many")
    say = echo if echo is not None else (lambda line: None)
    if mw.use_shadow:
        say(f"baking occlusion maps for {len(train_ids)} frames")
        data.ensure_ao(train_ids)

    model = AvatarModel(data.template, data.skeleton, mw, seed=cfg.seed)
    opt = dc.Adam(model.store, lr=cfg.lr)
    critic = critic_store = critic_opt = None
    if mw.use_latent and lw.lam_dis > 0:
        critic_store = dc.ParamStore()
        n_signal = model.masks.n_pose + model.masks.n_face
        critic = StatisticsNet(critic_store, "critic", n_signal, mw.d_z,
                               rng=stream(cfg.seed, "critic-init"),
                               dtype=mw.np_dtype)
        critic_opt = dc.Adam(critic_store, lr=cfg.lr)
    corr = joint_sites(data.template, data.skeleton) if lw.lam_pc > 0 else None
    raster_cfg = RasterConfig(sigma_r=data.spec.sigma_r,
                              gamma=data.spec.gamma_r)

    start = 0
    if state_path.exists():
        start = _load_state(state_path, model, opt, critic_store, critic_opt)
        say(f"resuming at iteration {start}")
    if start == 0:
        _save_state(out, model, opt, critic_store, critic_opt, 0)

    history = []
    log = open(out / "train.log", "a")
    try:
        for i in range(start, cfg.iters):
            try:
                rec = _step(cfg, data, model, opt, critic, critic_store,
                            critic_opt, corr, raster_cfg, train_ids, i)
            except (ValueError, FloatingPointError, OverflowError) as e:
                # exploded parameters usually trip a shape-independent
                # validation check before the loss itself reads non-finite
                _dump_divergence(out, {"iter": i + 1, "error": repr(e)}, [])
                raise TrainingDiverged(
                    f"training failed at iteration {i + 1}: {e}; last "
                    f"checkpoint kept, diagnostics in {out / 'diverged.txt'}"
                ) from e
            history.append(rec)
            line = _format(rec, cfg.iters)
            log.write(line + "\n")
            say(line)
            bad = [k for k, v in rec.items()
                   if isinstance(v, float) and not np.isfinite(v)]
            if bad:
                log.flush()
                _dump_divergence(out, rec, bad)
                raise TrainingDiverged(
                    f"non-finite {', '.join(bad)} at iteration {rec['iter']}; "
                    f"last checkpoint kept, diagnostics in {out / 'diverged.txt'}")
            if (i + 1) % cfg.checkpoint_every == 0 or i + 1 == cfg.iters:
                _save_state(out, model, opt, critic_store, critic_opt, i + 1)
    finally:
        log.close()
        data.flush_ao()
    return TrainResult(model=model, start_iter=start, end_iter=cfg.iters,
                       history=history)


# ------------------------------------------------------------------ one step

def _step(cfg, data, model, opt, critic, critic_store, critic_opt, corr,
          raster_cfg, train_ids, i):
    mw, lw = cfg.model, cfg.weights
    phase = 1 if i < cfg.phase1 else 2
    picks = stream(cfg.seed, "batch", i).choice(len(train_ids),
                                                size=cfg.batch, replace=False)
    batch_ids = [train_ids[int(p)] for p in picks]
    cams = stream(cfg.seed, "cam", i).integers(0, len(data.cameras),
                                               size=cfg.batch)
    eps = (stream(cfg.seed, "eps", i).standard_normal((cfg.batch, mw.d_z))
           if mw.use_latent else None)

    model.store.zero_grad()
    total = None
    parts: dict[str, float] = {}

    def acc(term, lam, name):
        nonlocal total
        parts[name] = parts.get(name, 0.0) + float(term.data)
        scaled = dc.mul(term, lam)
        total = scaled if total is None else dc.add(total, scaled)

    signals, z_list, dists = [], [], []
    for b, fid in enumerate(batch_ids):
        fr = data.frame(fid)
        cam = data.cameras[int(cams[b])]
        sig = data.signal(fid, int(cams[b]))
        signals.append(sig)
        z = None
        if mw.use_latent:
            dist = model.encode(data.pos_map(fid))
            z = reparameterize(dist, eps[b])
            dists.append(dist)
            z_list.append(z)
        ao = data.ao(fid) if mw.use_shadow else None
        pred = model.forward(sig, z, ao)
        if phase == 1:
            loss_b, parts_b = losses(None, None, None, pred.posed, fr.verts,
                                     data.template, lw, 1)
        else:
            render = rasterize(pred.posed, data.template.faces,
                               data.template.uvs, pred.final, cam, raster_cfg)
            loss_b, parts_b = losses(render, fr.images[int(cams[b])],
                                     fr.masks[int(cams[b])], pred.posed,
                                     fr.verts, data.template, lw, 2)
        for k, v in parts_b.items():
            parts[k] = parts.get(k, 0.0) + v
        total = loss_b if total is None else dc.add(total, loss_b)

    if phase == 2 and mw.use_latent:
        if lw.lam_kl > 0:
            kl = kl_loss(dists[0])
            for d in dists[1:]:
                kl = dc.add(kl, kl_loss(d))
            acc(kl, lw.lam_kl, "kl")
        if lw.lam_dis > 0:
            C = np.stack([data.scalars(fid) for fid in batch_ids])
            Z = dc.stack(z_list, axis=0)
            acc(adversarial_dis_loss(critic, C, Z), lw.lam_dis, "dis")
        if lw.lam_pc > 0:
            zp = stream(cfg.seed, "prior", i).standard_normal(
                (cfg.batch, mw.d_z))
            acc(perturbation_loss(_pc_decoder(model), signals, zp, corr),
                lw.lam_pc, "pc")

    dc.backward(total)
    opt.step()
    model.store.zero_grad()

    if phase == 2 and critic is not None:
        C = np.stack([data.scalars(fid) for fid in batch_ids])
        Zd = np.stack([z.data for z in z_list])
        critic_store.zero_grad()
        closs = mine_loss(critic, C, Zd)
        dc.backward(closs)
        critic_opt.step()
        critic_store.zero_grad()
        parts["critic"] = float(closs.data)

    rec = {"iter": i + 1, "phase": phase, "total": float(total.data)}
    rec.update(sorted(parts.items()))
    return rec


def _pc_decoder(model):
    """Posed geometry as a function of (signal, z): texture and shadow do
    not participate in the consistency term."""
    from ..avatar import compose

    r = model.config.shadow_res
    ones = dc.Tensor(np.ones((1, r, r), dtype=model.config.np_dtype))

    def decode(sig, z):
        disp, tex = model.decode(sig, z)
        return compose(sig.theta, disp, tex, ones,
                       model.template, model.skeleton).posed

    return decode


def _format(rec, iters):
    bits = [f"iter {rec['iter']}/{iters}", f"phase {rec['phase']}",
            f"total {rec['total']:.6f}"]
    bits += [f"{k} {v:.6f}" for k, v in rec.items()
             if k not in ("iter", "phase", "total")]
    return " ".join(bits)


def _dump_divergence(out, rec, bad):
    lines = []
    if bad:
        lines.append(f"non-finite components: {', '.join(bad)}")
    lines += [f"{k} = {v!r}" for k, v in rec.items()]
    (out / "diverged.txt").write_text("\n".join(lines) + "\n")


# ------------------------------------------------------------- persistence

def _state_arrays(model, opt, critic_store, critic_opt, it):
    arrays = {"iter": np.array([float(it)])}
    arrays.update(model.store.state_arrays("model/"))
    arrays.update(opt.state_arrays("model-adam/"))
    if critic_store is not None:
        arrays.update(critic_store.state_arrays("critic/"))
        arrays.update(critic_opt.state_arrays("critic-adam/"))
    return arrays


def _save_state(out, model, opt, critic_store, critic_opt, it):
    expected = _state_arrays(model, opt, critic_store, critic_opt, it)
    tmp = out / "trainer.tmp"
    dc.save_arrays(tmp, expected)
    os.replace(tmp, out / "trainer.dsaa1")
    model.save(out / "model.dsaa1")


def _load_state(path, model, opt, critic_store, critic_opt) -> int:
    arrays = dc.load_arrays(path)
    expected = _state_arrays(model, opt, critic_store, critic_opt, 0)
    extra = sorted(set(arrays) - set(expected))
    missing = sorted(set(expected) - set(arrays))
    if extra or missing:
        raise ValueError(f"trainer state does not match the configured run "
                         f"(missing {missing[:3]}, unexpected {extra[:3]})")
    model.store.load_state(arrays, "model/")
    opt.load_state(arrays, "model-adam/")
    if critic_store is not None:
        critic_store.load_state(arrays, "critic/")
        critic_opt.load_state(arrays, "critic-adam/")
    return int(arrays["iter"][0])


def _check_resumable(config_path, cfg: TrainConfig):
    if not config_path.exists():
        raise ValueError("run directory has state but no config.txt")
    old = parse_config(config_path.read_text())
    old_lines = dict(l.split(" = ", 1) for l in
                     config_text(old.resolved()).splitlines())
    new_lines = dict(l.split(" = ", 1) for l in config_text(cfg).splitlines())
    clash = [k for k in new_lines
             if k not in _RESUME_FREE and old_lines.get(k) != new_lines[k]]
    if clash:
        raise ValueError(f"cannot resume: config keys changed: "
                         f"{', '.join(sorted(clash))}")
