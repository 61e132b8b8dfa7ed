"""Experiment driver: configs, training loop, evaluation, reports."""

from .config import (ABLATIONS, TrainConfig, apply_ablation, config_text,
                     load_config, parse_config, parse_data_config)
from .data import FrameBundle, TrainData
from .trainer import TrainingDiverged, TrainResult, train
from .evaluate import (VARIANT_LABELS, build_report, drive, eval_errors,
                       heatmap_locality, latent_mi, load_model,
                       reconstruction_gap, render_frame, union_l1,
                       write_heatmaps)

__all__ = [
    "ABLATIONS", "TrainConfig", "apply_ablation", "config_text",
    "load_config", "parse_config", "parse_data_config",
    "FrameBundle", "TrainData",
    "TrainingDiverged", "TrainResult", "train",
    "VARIANT_LABELS", "build_report", "drive", "eval_errors",
    "heatmap_locality", "latent_mi", "load_model", "reconstruction_gap",
    "render_frame", "union_l1", "write_heatmaps",
]
