"""Experiment configuration: text format, training options, ablations.

Config files are line-oriented ``section.key = value`` with ``#``
comments.  The ablation presets give the report table's variants exact
definitions:

    ours              full model
    pose+face         no latent code (and therefore no KL/MINE/consistency)
    pose+face+latent  latent kept, lam_kl -> 1e-6, adversary and
                      consistency off (an effectively unregularized code)
    no_disent         adversary and consistency off, standard KL
    no_spatial_local  influence masks replaced by all-ones channels
    no_shadow         gain branch pinned at 1

The named variants only touch flags and loss weights; architecture
sizes stay identical so parameter counts are comparable.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..avatar import AvatarConfig
from ..renderer import LossWeights

__all__ = ["TrainConfig", "ABLATIONS", "apply_ablation", "parse_config",
           "config_text", "load_config", "parse_data_config"]

ABLATIONS = ("ours", "pose+face", "pose+face+latent", "no_disent",
             "no_spatial_local", "no_shadow")


@dataclass(frozen=True)
class TrainConfig:
    dataset: str = ""
    out: str = ""
    iters: int = 4000
    phase1: int = 2000     # mesh-supervised warmup length
    batch: int = 8
    lr: float = 1e-3
    seed: int = 0
    checkpoint_every: int = 500
    ablate: str = "ours"
    eval_frames: int = 200   # per-split cap for error tables
    drive_steps: int = 40    # fit-mode gradient steps on z
    drive_lr: float = 0.1
    model: AvatarConfig = AvatarConfig()
    weights: LossWeights = LossWeights()

    def __post_init__(self):
        if self.iters < 1 or self.phase1 < 0:
            raise ValueError("iters must be >= 1 and phase1 >= 0")
        if self.batch < 2:
            raise ValueError("batch must be >= 2")
        if self.lr <= 0 or self.drive_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.checkpoint_every < 1 or self.eval_frames < 1 or self.drive_steps < 1:
            raise ValueError("checkpoint_every, eval_frames, drive_steps must be >= 1")
        if self.ablate not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablate!r}; "
                             f"choose from {', '.join(ABLATIONS)}")
        if not self.model.use_latent and (self.weights.lam_dis > 0
                                          or self.weights.lam_pc > 0):
            raise ValueError("a latent-free model cannot carry "
                             "disentanglement loss terms")

    def resolved(self) -> "TrainConfig":
        """The config with its ablation preset folded into model/weights."""
        model, weights = apply_ablation(self.ablate, self.model, self.weights)
        return dataclasses.replace(self, model=model, weights=weights)


def apply_ablation(name: str, model: AvatarConfig, weights: LossWeights):
    if name not in ABLATIONS:
        raise ValueError(f"unknown ablation {name!r}")
    if name == "pose+face":
        model = dataclasses.replace(model, use_latent=False)
        weights = dataclasses.replace(weights, lam_kl=0.0, lam_dis=0.0,
                                      lam_pc=0.0)
    elif name == "pose+face+latent":
        weights = dataclasses.replace(weights, lam_kl=1e-6, lam_dis=0.0,
                                      lam_pc=0.0)
    elif name == "no_disent":
        weights = dataclasses.replace(weights, lam_dis=0.0, lam_pc=0.0)
    elif name == "no_spatial_local":
        model = dataclasses.replace(model, spatial_local=False)
    elif name == "no_shadow":
        model = dataclasses.replace(model, use_shadow=False)
    return model, weights


# --------------------------------------------------------------- text I/O

_SECTIONS = {"train": TrainConfig, "model": AvatarConfig, "loss": LossWeights}
_TRAIN_SCALARS = tuple(f.name for f in dataclasses.fields(TrainConfig)
                       if f.name not in ("model", "weights"))


def _parse_scalar(default, text: str):
    if isinstance(default, bool):
        if text not in ("true", "false"):
            raise ValueError(f"expected true/false, got {text!r}")
        return text == "true"
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(int(x) for x in text.split(","))
    return text


def parse_config(text: str) -> TrainConfig:
    """Strict parse: every key must belong to a known section and field."""
    sections: dict[str, dict] = {"train": {}, "model": {}, "loss": {}}
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        key, sep, value = ln.partition("=")
        if not sep:
            raise ValueError(f"malformed config line: {ln!r}")
        key = key.strip()
        value = value.strip()
        section, dot, field = key.partition(".")
        if not dot or section not in sections:
            raise ValueError(f"unknown config key {key!r}")
        cls = _SECTIONS[section]
        defaults = {f.name: f.default for f in dataclasses.fields(cls)}
        if field not in defaults or field in ("model", "weights"):
            raise ValueError(f"unknown config key {key!r}")
        sections[section][field] = _parse_scalar(defaults[field], value)
    return TrainConfig(model=AvatarConfig(**sections["model"]),
                       weights=LossWeights(**sections["loss"]),
                       **sections["train"])


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(int(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_text(config: TrainConfig) -> str:
    """Canonical dump; parse_config(config_text(c)) == c field for field."""
    lines = []
    for name in _TRAIN_SCALARS:
        lines.append(f"train.{name} = {_fmt(getattr(config, name))}")
    for f in dataclasses.fields(AvatarConfig):
        lines.append(f"model.{f.name} = {_fmt(getattr(config.model, f.name))}")
    for f in dataclasses.fields(LossWeights):
        lines.append(f"loss.{f.name} = {_fmt(getattr(config.weights, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path, **overrides) -> TrainConfig:
    """Read a config file and apply CLI-style scalar overrides."""
    config = parse_config(open(path).read())
    return dataclasses.replace(config, **overrides) if overrides else config


def parse_data_config(text: str):
    """`data.*` config for dataset generation.

    Returns (scene overrides, n_frames, test_fraction); scene keys are
    the scalar scene fields, tuples given as comma lists.
    """
    from ..synthdata import SceneSpec

    fields = {f.name: f.default for f in dataclasses.fields(SceneSpec)
              if f.name != "figure"}
    extras = {"n_frames": 2200, "test_fraction": 200.0 / 2200.0}
    overrides, n_frames, test_fraction = {}, extras["n_frames"], extras["test_fraction"]
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        key, sep, value = ln.partition("=")
        if not sep:
            raise ValueError(f"malformed config line: {ln!r}")
        key, value = key.strip(), value.strip()
        section, dot, field = key.partition(".")
        if not dot or section != "data":
            raise ValueError(f"unknown config key {key!r}")
        if field == "n_frames":
            n_frames = int(value)
        elif field == "test_fraction":
            test_fraction = float(value)
        elif field in fields:
            ref = fields[field]
            if isinstance(ref, tuple):
                overrides[field] = tuple(float(x) for x in value.split(","))
            elif isinstance(ref, int) and not isinstance(ref, bool):
                overrides[field] = int(value)
            else:
                overrides[field] = float(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    return overrides, n_frames, test_fraction
