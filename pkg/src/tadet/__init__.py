"""Sparse set-prediction temporal action detection on snippet features."""

from .autodiff import Tensor
from .data import (
    AnnotatedVideo,
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    load_features,
    resize_features,
    store_features,
    write_dataset,
)
from .estimator import TemporalActionDetector, load_model, save_model
from .evaluation import EvalConfig, EvalReport, evaluate_map, rank_detections
from .flops import FlopsEstimate, estimate_flops
from .matching import GroundTruthAction, hungarian_assign, matching_cost, total_loss
from .model import DetectionSet, ModelConfig, TemporalDetectionTransformer
from .optim import AdamW
from .segments import Segment, segment_iou

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "AnnotatedVideo",
    "DetectionSet",
    "EvalConfig",
    "EvalReport",
    "FlopsEstimate",
    "GroundTruthAction",
    "ModelConfig",
    "Segment",
    "SyntheticConfig",
    "TemporalActionDetector",
    "TemporalDetectionTransformer",
    "Tensor",
    "estimate_flops",
    "evaluate_map",
    "generate_synthetic",
    "hungarian_assign",
    "load_dataset",
    "load_features",
    "load_model",
    "matching_cost",
    "rank_detections",
    "resize_features",
    "save_model",
    "segment_iou",
    "store_features",
    "total_loss",
    "write_dataset",
    "__version__",
]
