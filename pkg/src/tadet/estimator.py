"""Estimator-style wrapper: ``fit`` on annotated videos, ``predict`` detections.

Follows the scikit-learn parameter protocol (``get_params`` /
``set_params``, constructor args stored verbatim) so the detector composes
with model-selection tooling, without depending on scikit-learn itself.
"""

from __future__ import annotations

import inspect
import time

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import AnnotatedVideo, resize_features
from .matching import total_loss
from .model import (
    ATTENTION_KINDS,
    ENCODER_KINDS,
    DetectionSet,
    ModelConfig,
    TemporalDetectionTransformer,
)
from .optim import AdamW

_CONFIG_PREFIX = "config/"


def check_feature_array(x, name: str = "features") -> np.ndarray:
    """Validate a (T, C) float feature array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (time, channels), got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 frames, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_videos(videos) -> list[AnnotatedVideo]:
    videos = list(videos)
    if not videos:
        raise ValueError("empty video list")
    for v in videos:
        if v.features is None:
            raise ValueError(f"video {v.video_id!r} has no features attached")
        check_feature_array(v.features, name=f"features of {v.video_id!r}")
    return videos


def save_model(path, model: TemporalDetectionTransformer) -> None:
    """Checkpoint the parameters together with the architecture config."""
    cfg = model.config
    entries: dict[str, np.ndarray] = {}
    for name, value in (
        ("num_classes", cfg.num_classes),
        ("feature_dim", cfg.feature_dim),
        ("width", cfg.width),
        ("ffn_dim", cfg.ffn_dim),
        ("encoder_layers", cfg.encoder_layers),
        ("decoder_layers", cfg.decoder_layers),
        ("num_heads", cfg.num_heads),
        ("num_points", cfg.num_points),
        ("num_queries", cfg.num_queries),
        ("sequence_length", cfg.sequence_length),
        ("roi_expansion", cfg.roi_expansion),
        ("roi_bins", cfg.roi_bins),
        ("enable_refinement", int(cfg.enable_refinement)),
        ("enable_actionness", int(cfg.enable_actionness)),
        ("attention_kind", ATTENTION_KINDS.index(cfg.attention_kind)),
        ("encoder_kind", ENCODER_KINDS.index(cfg.encoder_kind)),
    ):
        entries[_CONFIG_PREFIX + name] = np.array([value], dtype=np.float64)
    entries.update(model.state_dict())
    save_checkpoint(path, entries)


def load_model(path) -> TemporalDetectionTransformer:
    entries = load_checkpoint(path)
    raw = {
        k[len(_CONFIG_PREFIX) :]: float(v[0])
        for k, v in entries.items()
        if k.startswith(_CONFIG_PREFIX)
    }
    if "num_classes" not in raw:
        raise ValueError("checkpoint carries no architecture config")
    cfg = ModelConfig(
        num_classes=int(raw["num_classes"]),
        feature_dim=int(raw["feature_dim"]),
        width=int(raw["width"]),
        ffn_dim=int(raw["ffn_dim"]),
        encoder_layers=int(raw["encoder_layers"]),
        decoder_layers=int(raw["decoder_layers"]),
        num_heads=int(raw["num_heads"]),
        num_points=int(raw["num_points"]),
        num_queries=int(raw["num_queries"]),
        sequence_length=int(raw["sequence_length"]),
        roi_expansion=float(raw["roi_expansion"]),
        roi_bins=int(raw["roi_bins"]),
        enable_refinement=bool(int(raw["enable_refinement"])),
        enable_actionness=bool(int(raw["enable_actionness"])),
        attention_kind=ATTENTION_KINDS[int(raw["attention_kind"])],
        encoder_kind=ENCODER_KINDS[int(raw["encoder_kind"])],
    )
    model = TemporalDetectionTransformer(cfg, seed=0)
    weights = {k: v for k, v in entries.items() if not k.startswith(_CONFIG_PREFIX)}
    model.load_state(weights)
    return model


class TemporalActionDetector:
    """Set-prediction temporal action detector with a fit/predict interface."""

    def __init__(
        self,
        num_classes: int = 5,
        feature_dim: int = 16,
        width: int = 256,
        ffn_dim: int = 2048,
        encoder_layers: int = 2,
        decoder_layers: int = 4,
        num_heads: int = 8,
        num_points: int = 4,
        num_queries: int = 30,
        sequence_length: int = 100,
        roi_expansion: float = 1.5,
        roi_bins: int = 16,
        enable_refinement: bool = True,
        enable_actionness: bool = True,
        attention_kind: str = "deformable",
        encoder_kind: str = "transformer",
        background_coef: float = 0.1,
        dropout: float = 0.0,
        epochs: int = 30,
        batch_size: int = 16,
        lr: float = 2e-4,
        weight_decay: float = 1e-4,
        decay_epoch: int = 25,
        proj_lr_factor: float = 0.1,
        lambda_iou: float = 2.0,
        lambda_coord: float = 5.0,
        lambda_act: float = 5.0,
        seed: int = 0,
        verbose: bool = False,
    ):
        args = inspect.signature(type(self).__init__).parameters
        frame = inspect.currentframe().f_locals
        for name in args:
            if name != "self":
                setattr(self, name, frame[name])

    # -- scikit-learn parameter protocol -------------------------------------

    @classmethod
    def _param_names(cls) -> list[str]:
        return [p for p in inspect.signature(cls.__init__).parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "TemporalActionDetector":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"invalid parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self

    # -- configuration --------------------------------------------------------

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            num_classes=self.num_classes,
            feature_dim=self.feature_dim,
            width=self.width,
            ffn_dim=self.ffn_dim,
            encoder_layers=self.encoder_layers,
            decoder_layers=self.decoder_layers,
            num_heads=self.num_heads,
            num_points=self.num_points,
            num_queries=self.num_queries,
            sequence_length=self.sequence_length,
            roi_expansion=self.roi_expansion,
            roi_bins=self.roi_bins,
            enable_refinement=self.enable_refinement,
            enable_actionness=self.enable_actionness,
            attention_kind=self.attention_kind,
            encoder_kind=self.encoder_kind,
            background_coef=self.background_coef,
            dropout=self.dropout,
        )

    def _prepare(self, videos: list[AnnotatedVideo]) -> np.ndarray:
        stack = []
        for v in videos:
            feats = check_feature_array(v.features, name=f"features of {v.video_id!r}")
            if feats.shape[1] != self.feature_dim:
                raise ValueError(
                    f"video {v.video_id!r}: feature dim {feats.shape[1]} != "
                    f"configured {self.feature_dim}"
                )
            if feats.shape[0] != self.sequence_length:
                feats = resize_features(feats, self.sequence_length)
            stack.append(feats)
        return np.stack(stack)

    # -- training -------------------------------------------------------------

    def fit(self, videos: list[AnnotatedVideo], y=None) -> "TemporalActionDetector":
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        videos = check_videos(videos)
        features = self._prepare(videos)
        gts = [v.actions for v in videos]

        model = TemporalDetectionTransformer(self.model_config(), seed=self.seed)
        optimizer = AdamW(
            model.parameters(),
            lr=self.lr,
            weight_decay=self.weight_decay,
            lr_multipliers=model.lr_multipliers(self.proj_lr_factor),
        )
        shuffle_rng = np.random.default_rng(self.seed + 1)

        self.train_log_ = []
        n = len(videos)
        for epoch in range(1, self.epochs + 1):
            optimizer.lr = self.lr * (0.1 if epoch > self.decay_epoch else 1.0)
            order = shuffle_rng.permutation(n)
            model.training = True
            t0 = time.perf_counter()
            sums = dict(loss=0.0, loss_cls=0.0, loss_l1=0.0, loss_iou=0.0, loss_act=0.0)
            n_batches = 0
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                result = model.forward(features[idx])
                loss, breakdown = total_loss(
                    result,
                    [gts[i] for i in idx],
                    lambda_iou=self.lambda_iou,
                    lambda_coord=self.lambda_coord,
                    lambda_act=self.lambda_act,
                    background_coef=self.background_coef,
                )
                if not np.isfinite(breakdown.total):
                    raise RuntimeError(
                        f"non-finite loss in epoch {epoch}, batch {n_batches} "
                        f"(videos {[videos[i].video_id for i in idx]})"
                    )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                sums["loss"] += breakdown.total
                sums["loss_cls"] += breakdown.classification
                sums["loss_l1"] += breakdown.segment_l1
                sums["loss_iou"] += breakdown.segment_iou
                sums["loss_act"] += breakdown.actionness
                n_batches += 1
            record = {k: v / n_batches for k, v in sums.items()}
            record["epoch"] = epoch
            record["lr"] = optimizer.lr
            record["time"] = time.perf_counter() - t0
            self.train_log_.append(record)
            if self.verbose:
                print(
                    f"epoch={epoch} loss={record['loss']:.4f} "
                    f"loss_cls={record['loss_cls']:.4f} lr={record['lr']:.2e} "
                    f"time={record['time']:.1f}s"
                )
        model.training = False
        self.model_ = model
        return self

    # -- inference ------------------------------------------------------------

    def predict(self, videos: list[AnnotatedVideo], chunk: int = 16) -> list[DetectionSet]:
        if not hasattr(self, "model_"):
            raise RuntimeError("predict called before fit (or load)")
        videos = check_videos(videos)
        features = self._prepare(videos)
        self.model_.training = False
        out: list[DetectionSet] = []
        for start in range(0, len(videos), chunk):
            out.extend(self.model_.predict(features[start : start + chunk]))
        return out

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        if not hasattr(self, "model_"):
            raise RuntimeError("save called before fit")
        save_model(path, self.model_)

    @classmethod
    def from_checkpoint(cls, path, **overrides) -> "TemporalActionDetector":
        model = load_model(path)
        cfg = model.config
        est = cls(
            num_classes=cfg.num_classes,
            feature_dim=cfg.feature_dim,
            width=cfg.width,
            ffn_dim=cfg.ffn_dim,
            encoder_layers=cfg.encoder_layers,
            decoder_layers=cfg.decoder_layers,
            num_heads=cfg.num_heads,
            num_points=cfg.num_points,
            num_queries=cfg.num_queries,
            sequence_length=cfg.sequence_length,
            roi_expansion=cfg.roi_expansion,
            roi_bins=cfg.roi_bins,
            enable_refinement=cfg.enable_refinement,
            enable_actionness=cfg.enable_actionness,
            attention_kind=cfg.attention_kind,
            encoder_kind=cfg.encoder_kind,
        )
        est.set_params(**overrides)
        est.model_ = model
        return est
