"""Operator surface: train, eval, infer, flops, queries subcommands.

Run configuration is a flat ``key = value`` text file with dotted section
prefixes (``model.``, ``train.``, ``loss.``, ``data.``, ``paths.``); command
line flags override file values.  Threshold grids use the inclusive
``[a:b:s]`` syntax.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .data import load_dataset, load_features
from .estimator import TemporalActionDetector, load_model, save_model
from .evaluation import EvalConfig, evaluate_map, rank_detections
from .flops import estimate_flops
from .model import ModelConfig, TemporalDetectionTransformer

_MODEL_KEYS = (
    "num_classes",
    "feature_dim",
    "width",
    "ffn_dim",
    "encoder_layers",
    "decoder_layers",
    "num_heads",
    "num_points",
    "num_queries",
    "sequence_length",
    "roi_expansion",
    "roi_bins",
    "enable_refinement",
    "enable_actionness",
    "attention_kind",
    "encoder_kind",
)
_TRAIN_KEYS = (
    "epochs",
    "batch_size",
    "lr",
    "weight_decay",
    "decay_epoch",
    "proj_lr_factor",
    "seed",
)
_LOSS_KEYS = ("lambda_iou", "lambda_coord", "lambda_act", "background_coef")


def _coerce(text: str):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            continue
    return text


def parse_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = _coerce(value)
    return values


def parse_threshold_grid(text: str) -> list[float]:
    """``[a:b:s]`` inclusive of both ends."""
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"threshold grid must look like [a:b:s], got {text!r}")
    parts = text[1:-1].split(":")
    if len(parts) != 3:
        raise ValueError(f"threshold grid must have three fields, got {text!r}")
    a, b, s = (float(p) for p in parts)
    if s <= 0 or b < a:
        raise ValueError(f"empty threshold grid {text!r}")
    n = int(round((b - a) / s))
    grid = [round(a + i * s, 10) for i in range(n + 1)]
    if abs(grid[-1] - b) > 1e-9:
        grid.append(round(b, 10))
    return grid


def _estimator_from_config(cfg: dict) -> TemporalActionDetector:
    kwargs = {}
    for key in _MODEL_KEYS:
        if f"model.{key}" in cfg:
            kwargs[key] = cfg[f"model.{key}"]
    for key in _TRAIN_KEYS:
        if f"train.{key}" in cfg:
            kwargs[key] = cfg[f"train.{key}"]
    for key in _LOSS_KEYS:
        if f"loss.{key}" in cfg:
            kwargs[key] = cfg[f"loss.{key}"]
    return TemporalActionDetector(**kwargs)


def _model_config_from_config(cfg: dict) -> ModelConfig:
    return _estimator_from_config(cfg).model_config()


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ValueError(f"config is missing required key {key!r}")
    return cfg[key]


# -- subcommands -------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = parse_config_file(args.config)
    est = _estimator_from_config(cfg)
    if args.seed is not None:
        est.set_params(seed=args.seed)
    est.set_params(verbose=not args.quiet)
    class_names, videos = load_dataset(
        _require(cfg, "data.features_dir"), _require(cfg, "data.annotations")
    )
    est.fit(videos)

    out_path = args.out or cfg.get("paths.checkpoint", "checkpoint.tadw")
    est.save(out_path)

    log_lines = [
        "epoch={epoch} loss={loss:.6f} loss_cls={loss_cls:.6f} loss_l1={loss_l1:.6f} "
        "loss_iou={loss_iou:.6f} loss_act={loss_act:.6f} lr={lr:.6g} time={time:.2f}".format(**rec)
        for rec in est.train_log_
    ]

    if "data.val_annotations" in cfg:
        # evaluate from the written checkpoint so the snapshot survives round trips
        val_est = TemporalActionDetector.from_checkpoint(out_path)
        _, val_videos = load_dataset(
            cfg.get("data.val_features_dir", cfg["data.features_dir"]),
            cfg["data.val_annotations"],
        )
        grid = parse_threshold_grid(cfg.get("eval.thresholds", "[0.5:0.95:0.05]"))
        report = evaluate_map(
            {v.video_id: d for v, d in zip(val_videos, val_est.predict(val_videos))},
            {v.video_id: v.actions for v in val_videos},
            EvalConfig(thresholds=grid),
            class_names=class_names,
        )
        log_lines.append(f"val_map_avg={report.average_map:.6f}")

    log_text = "\n".join(log_lines)
    if "paths.log" in cfg:
        Path(cfg["paths.log"]).write_text(log_text + "\n")
    print(log_text)
    print(f"checkpoint written to {out_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = parse_config_file(args.config)
    model_cfg = _model_config_from_config(cfg)
    model = TemporalDetectionTransformer(model_cfg, seed=0)
    from .checkpoint import load_checkpoint

    entries = load_checkpoint(args.checkpoint)
    weights = {
        k: v for k, v in entries.items() if not k.startswith("config/")
    }
    model.load_state(weights)

    features_dir = cfg.get("data.val_features_dir", cfg.get("data.features_dir"))
    annotations = cfg.get("data.val_annotations", cfg.get("data.annotations"))
    if features_dir is None or annotations is None:
        raise ValueError("config must point at data.features_dir and data.annotations")
    class_names, videos = load_dataset(features_dir, annotations)

    est = TemporalActionDetector.from_checkpoint(args.checkpoint)
    est.model_ = model
    detections = est.predict(videos)
    grid = parse_threshold_grid(args.thresholds)
    report = evaluate_map(
        {v.video_id: d for v, d in zip(videos, detections)},
        {v.video_id: v.actions for v in videos},
        EvalConfig(thresholds=grid),
        class_names=class_names,
    )
    text = report.render()
    if "paths.report" in cfg:
        Path(cfg["paths.report"]).write_text(text + "\n")
    print(text)
    return 0


def cmd_infer(args) -> int:
    model = load_model(args.checkpoint)
    features = load_features(args.features)
    duration = args.duration if args.duration is not None else float(features.shape[0])
    est = TemporalActionDetector.from_checkpoint(args.checkpoint)
    from .data import AnnotatedVideo

    video = AnnotatedVideo(video_id="input", duration_sec=duration, features=features)
    det = est.predict([video])[0]
    for label, score, segment, _ in rank_detections(det):
        start = max(0.0, segment.start) * duration
        end = min(1.0, segment.end) * duration
        print(f"{label} {start:.3f} {end:.3f} {score:.6f}")
    return 0


def cmd_flops(args) -> int:
    cfg = parse_config_file(args.config)
    model_cfg = _model_config_from_config(cfg)
    if args.attention is not None:
        model_cfg.attention_kind = args.attention
    estimate = estimate_flops(model_cfg, args.length)
    print(estimate.render())
    return 0


def cmd_queries(args) -> int:
    est = TemporalActionDetector.from_checkpoint(args.checkpoint)
    from .data import AnnotatedVideo

    files = sorted(Path(args.features_dir).glob("*.tadf"))
    if not files:
        raise FileNotFoundError(f"no .tadf files in {args.features_dir}")
    videos = [
        AnnotatedVideo(video_id=f.stem, duration_sec=1.0, features=load_features(f))
        for f in files
    ]
    detections = est.predict(videos)
    print("query_index video_id center length")
    nq = est.model_.config.num_queries
    for q in range(nq):
        for v, det in zip(videos, detections):
            print(f"{q} {v.video_id} {det.segments[q, 0]:.6f} {det.segments[q, 1]:.6f}")
    return 0


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tadet", description="set-prediction temporal action detector"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a detector from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--thresholds", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="run a checkpoint on one feature file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--duration", type=float, default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("flops", help="analytic forward-pass cost estimate")
    p.add_argument("--config", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--attention", choices=["dense", "deformable"], default=None)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("queries", help="dump per-query segment distribution")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features-dir", required=True)
    p.set_defaults(func=cmd_queries)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # structured single-line error, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
