"""NMS-free detection ranking and mAP evaluation over a tIoU threshold grid.

There is deliberately no non-maximum suppression anywhere: the detector's
one-to-one training assignment already suppresses duplicates, so ranking is
a plain sort by score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import GroundTruthAction
from .model import DetectionSet
from .segments import Segment, interval_iou


@dataclass
class EvalConfig:
    thresholds: list[float]
    top_k: int | None = None  # per video; None keeps every prediction

    def __post_init__(self):
        if not self.thresholds:
            raise ValueError("thresholds must be non-empty")
        last = 0.0
        for t in self.thresholds:
            if not 0.0 < t < 1.0:
                raise ValueError(f"threshold {t} outside (0, 1)")
            if t <= last:
                raise ValueError("thresholds must be strictly increasing")
            last = t


@dataclass(frozen=True)
class RankedDetection:
    video_id: str
    label: int
    score: float
    segment: Segment
    query_index: int


@dataclass
class EvalReport:
    thresholds: list[float]
    class_names: list[str]
    ap: dict[float, dict[int, float]]  # threshold -> class -> AP
    map_per_threshold: dict[float, float]
    average_map: float
    num_detections: int
    num_ground_truths: int
    gt_counts: dict[int, int] = field(default_factory=dict)

    def machine_lines(self) -> list[str]:
        lines = [f"map@{t:.2f}={self.map_per_threshold[t]:.6f}" for t in self.thresholds]
        lines.append(f"map_avg={self.average_map:.6f}")
        return lines

    def render(self) -> str:
        lines = [
            f"detections={self.num_detections} ground_truths={self.num_ground_truths}",
            "",
            "class" + "".join(f"  AP@{t:.2f}" for t in self.thresholds),
        ]
        for c, name in enumerate(self.class_names):
            if self.gt_counts.get(c, 0) == 0:
                continue
            row = f"{name:<12}" + "".join(f"  {self.ap[t].get(c, 0.0):7.4f}" for t in self.thresholds)
            lines.append(row)
        lines.append("")
        lines.extend(self.machine_lines())
        return "\n".join(lines)


def rank_detections(detections: DetectionSet, top_k: int | None = None) -> list[tuple[int, float, Segment, int]]:
    """(label, score, segment, query index), descending by score.

    Ties break by the original prediction index, so output is deterministic.
    """
    order = sorted(
        range(len(detections.scores)), key=lambda i: (-detections.scores[i], i)
    )
    if top_k is not None:
        order = order[:top_k]
    return [
        (
            int(detections.labels[i]),
            float(detections.scores[i]),
            Segment(float(detections.segments[i, 0]), float(detections.segments[i, 1])),
            i,
        )
        for i in order
    ]


def average_precision(
    detections: list[RankedDetection],
    gts_by_video: dict[str, list[GroundTruthAction]],
    label: int,
    threshold: float,
) -> float:
    """AP for one class at one tIoU threshold.

    Detections are matched greedily in score order; each ground truth can be
    claimed once (the best-IoU unmatched one is chosen), duplicates count as
    false positives.  AP integrates the precision envelope over recall.
    """
    gt_pool = {
        vid: [gt for gt in gts if gt.label == label] for vid, gts in gts_by_video.items()
    }
    npos = sum(len(v) for v in gt_pool.values())
    if npos == 0:
        return 0.0
    dets = sorted(
        (d for d in detections if d.label == label),
        key=lambda d: (-d.score, d.video_id, d.query_index),
    )
    matched: dict[str, set[int]] = {vid: set() for vid in gt_pool}
    tp = np.zeros(len(dets))
    fp = np.zeros(len(dets))
    for rank, det in enumerate(dets):
        candidates = gt_pool.get(det.video_id, [])
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(candidates):
            if j in matched[det.video_id]:
                continue
            iou = interval_iou(det.segment.interval(), gt.segment.interval())
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= threshold:
            matched[det.video_id].add(best_j)
            tp[rank] = 1.0
        else:
            fp[rank] = 1.0
    if len(dets) == 0:
        return 0.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(fp)
    recall = ctp / npos
    precision = ctp / np.maximum(ctp + cfp, 1e-300)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    ap = 0.0
    for r, p in zip(recall, envelope):
        ap += (r - prev_r) * p
        prev_r = r
    return float(ap)


def evaluate_map(
    predictions: dict[str, DetectionSet],
    annotations: dict[str, list[GroundTruthAction]],
    config: EvalConfig,
    class_names: list[str] | None = None,
) -> EvalReport:
    """mAP per threshold (mean over classes with ground truth) and its average."""
    unknown = [vid for vid in predictions if vid not in annotations]
    if unknown:
        raise KeyError(f"prediction for unknown video id {unknown[0]!r}")

    ranked: list[RankedDetection] = []
    for vid, det in predictions.items():
        for label, score, segment, qi in rank_detections(det, config.top_k):
            ranked.append(RankedDetection(vid, label, score, segment, qi))

    labels_present = sorted({gt.label for gts in annotations.values() for gt in gts})
    gt_counts = {
        c: sum(1 for gts in annotations.values() for gt in gts if gt.label == c)
        for c in labels_present
    }
    if class_names is None:
        n_classes = max(labels_present, default=-1) + 1
        class_names = [f"class_{c}" for c in range(n_classes)]

    ap: dict[float, dict[int, float]] = {}
    map_per_threshold: dict[float, float] = {}
    for t in config.thresholds:
        ap[t] = {
            c: average_precision(ranked, annotations, c, t) for c in labels_present
        }
        map_per_threshold[t] = float(np.mean(list(ap[t].values()))) if ap[t] else 0.0
    average = float(np.mean(list(map_per_threshold.values())))
    return EvalReport(
        thresholds=list(config.thresholds),
        class_names=class_names,
        ap=ap,
        map_per_threshold=map_per_threshold,
        average_map=average,
        num_detections=len(ranked),
        num_ground_truths=sum(gt_counts.values()),
        gt_counts=gt_counts,
    )
