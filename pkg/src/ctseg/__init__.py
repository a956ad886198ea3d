"""One-shot contour segmentation with GCN contour evolution and HITL correction."""

from .geometry import Contour, hausdorff, polygon_iou, resample_uniform
from .imaging import ImageGrid, FeaturePyramid, encode_features
from .data import Dataset, FamilySpec, generate_synthetic, load_dataset, save_dataset
from .model import ModelConfig, ModelParams, load_checkpoint, save_checkpoint
from .training import TrainConfig, DESK_PRESET, FULLSCALE_PRESET, train_one_shot, finetune_hitl
from .hitl import CorrectionSet, correspond_segments, simulate_corrections, select_worst
from .evalharness import EvalReport, evaluate, acm_baseline

__all__ = [
    "Contour", "hausdorff", "polygon_iou", "resample_uniform",
    "ImageGrid", "FeaturePyramid", "encode_features",
    "Dataset", "FamilySpec", "generate_synthetic", "load_dataset", "save_dataset",
    "ModelConfig", "ModelParams", "load_checkpoint", "save_checkpoint",
    "TrainConfig", "DESK_PRESET", "FULLSCALE_PRESET", "train_one_shot", "finetune_hitl",
    "CorrectionSet", "correspond_segments", "simulate_corrections", "select_worst",
    "EvalReport", "evaluate", "acm_baseline",
]

__version__ = "0.1.0"
