"""Hungarian ground-truth assignment, matching cost, and the multi-part loss.

Matching runs per decoder layer on detached scores; gradients flow only
through the loss terms, never through the assignment itself.  Padding with
the no-action class is virtual: matching is rectangular over the real
ground truths, and unmatched predictions receive the background target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import autodiff as ad
from .autodiff import Tensor
from .model import ForwardResult
from .segments import Segment, segment_iou

LAMBDA_IOU = 2.0
LAMBDA_COORD = 5.0
LAMBDA_ACT = 5.0


@dataclass(frozen=True)
class GroundTruthAction:
    label: int
    segment: Segment


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]  # (gt index, prediction index), one per gt
    unmatched_predictions: list[int]


@dataclass
class LossBreakdown:
    classification: float
    segment_l1: float
    segment_iou: float
    actionness: float
    total: float
    per_layer: list[dict[str, float]] = field(default_factory=list)


def segment_l1(a: Segment, b: Segment) -> float:
    """L1 distance in the (center, length) parametrization."""
    return abs(a.center - b.center) + abs(a.length - b.length)


def iou_loss(a: Segment, b: Segment) -> float:
    """Negated temporal IoU, in [-1, 0]."""
    return -segment_iou(a, b)


def matching_cost(
    gts: list[GroundTruthAction],
    class_probs: np.ndarray,
    segments: np.ndarray,
    lambda_iou: float = LAMBDA_IOU,
    lambda_coord: float = LAMBDA_COORD,
) -> np.ndarray:
    """Cost matrix (num gts, num predictions).

    Entry (j, i) = -p_i(c_j) + lambda_iou * iou_loss + lambda_coord * l1.
    """
    if class_probs.shape[0] == 0:
        raise ValueError("matching_cost: empty prediction set")
    n = class_probs.shape[0]
    g = len(gts)
    labels = np.array([gt.label for gt in gts], dtype=np.int64)
    gt_c = np.array([gt.segment.center for gt in gts])
    gt_d = np.array([gt.segment.length for gt in gts])
    pr_c = segments[:, 0]
    pr_d = segments[:, 1]

    l1 = np.abs(gt_c[:, None] - pr_c[None, :]) + np.abs(gt_d[:, None] - pr_d[None, :])
    gs, ge = gt_c - gt_d / 2, gt_c + gt_d / 2
    ps, pe = pr_c - pr_d / 2, pr_c + pr_d / 2
    inter = np.maximum(
        0.0, np.minimum(ge[:, None], pe[None, :]) - np.maximum(gs[:, None], ps[None, :])
    )
    union = gt_d[:, None] + pr_d[None, :] - inter
    iou = np.where(union > 0, inter / np.maximum(union, 1e-300), 0.0)

    prob_term = class_probs[:, labels].T if g else np.zeros((0, n))
    return -prob_term + lambda_iou * (-iou) + lambda_coord * l1


def hungarian_assign(cost: np.ndarray) -> Assignment:
    """Exact minimum-cost one-to-one assignment of every row to a column."""
    cost = np.asarray(cost, dtype=np.float64)
    rows, cols = cost.shape
    if rows > cols:
        raise ValueError(f"hungarian_assign: more ground truths ({rows}) than predictions ({cols})")
    if not np.all(np.isfinite(cost)):
        raise ValueError("hungarian_assign: cost matrix has non-finite entries")
    ri, ci = linear_sum_assignment(cost)
    pairs = sorted(zip(ri.tolist(), ci.tolist()))
    matched = {c for _, c in pairs}
    return Assignment(
        pairs=pairs,
        unmatched_predictions=[c for c in range(cols) if c not in matched],
    )


def actionness_targets(pred_segments: np.ndarray, gts: list[GroundTruthAction]) -> np.ndarray:
    """Per prediction, the maximal IoU with any ground truth (0 if none)."""
    n = pred_segments.shape[0]
    targets = np.zeros(n)
    for i in range(n):
        seg = Segment(center=float(pred_segments[i, 0]), length=float(pred_segments[i, 1]))
        for gt in gts:
            targets[i] = max(targets[i], segment_iou(seg, gt.segment))
    return targets


def _log_softmax(logits: Tensor) -> Tensor:
    shifted = ad.sub(logits, Tensor(logits.data.max(axis=1, keepdims=True) * np.ones_like(logits.data)))
    lse = ad.log(ad.sum_(ad.exp(shifted), axis=1, keepdims=True))
    return ad.sub(shifted, ad.broadcast_to(lse, shifted.shape))


def _segment_terms(seg_rows: Tensor, gts: list[GroundTruthAction]) -> tuple[Tensor, Tensor]:
    """Differentiable (sum of L1, sum of -IoU) between matched rows and gts."""
    g = len(gts)
    gt_c = Tensor(np.array([[gt.segment.center] for gt in gts]))
    gt_d = Tensor(np.array([[gt.segment.length] for gt in gts]))
    t = ad.narrow(seg_rows, 1, 0, 1)
    d = ad.narrow(seg_rows, 1, 1, 1)
    l1 = ad.sum_(ad.add(ad.abs_(ad.sub(t, gt_c)), ad.abs_(ad.sub(d, gt_d))))

    half = ad.scale(d, 0.5)
    ps, pe = ad.sub(t, half), ad.add(t, half)
    gs = Tensor(gt_c.data - gt_d.data / 2)
    ge = Tensor(gt_c.data + gt_d.data / 2)
    # min(a,b) = a - relu(a-b), max(a,b) = a + relu(b-a)
    upper = ad.sub(pe, ad.relu(ad.sub(pe, ge)))
    lower = ad.add(ps, ad.relu(ad.sub(gs, ps)))
    inter = ad.relu(ad.sub(upper, lower))
    union = ad.sub(ad.add(d, gt_d), inter)
    neg_iou = ad.neg(ad.sum_(ad.div(inter, union)))
    assert g == seg_rows.shape[0]
    return l1, neg_iou


def total_loss(
    result: ForwardResult,
    gts_per_video: list[list[GroundTruthAction]],
    lambda_iou: float = LAMBDA_IOU,
    lambda_coord: float = LAMBDA_COORD,
    lambda_act: float = LAMBDA_ACT,
    background_coef: float | None = None,
) -> tuple[Tensor, LossBreakdown]:
    """Deep-supervised matching loss over all decoder layers plus actionness.

    Per layer and video the Hungarian assignment is recomputed on that
    layer's predictions; layer losses are summed per video, averaged over
    layers, the actionness L1 (applied once, to last-layer predictions) is
    added, and the result is averaged over the batch.
    """
    cfg = result.config
    if background_coef is None:
        background_coef = cfg.background_coef
    batch = result.batch
    nq = cfg.num_queries
    n_layers = len(result.layers.logits)

    per_layer_acc = [dict(classification=0.0, segment_l1=0.0, segment_iou=0.0) for _ in range(n_layers)]
    video_totals: list[Tensor] = []
    cls_sum = l1_sum = iou_sum = act_sum = 0.0

    for b in range(batch):
        gts = gts_per_video[b]
        if len(gts) > nq:
            raise ValueError(f"video {b}: more ground truths ({len(gts)}) than queries ({nq})")
        layer_losses: list[Tensor] = []
        for l in range(n_layers):
            logits = ad.narrow(result.layers.logits[l], 0, b * nq, nq)
            segs = ad.narrow(result.layers.segments[l], 0, b * nq, nq)
            z = logits.data - logits.data.max(axis=1, keepdims=True)
            e = np.exp(z)
            probs = e / e.sum(axis=1, keepdims=True)
            if gts:
                cost = matching_cost(gts, probs, segs.data, lambda_iou, lambda_coord)
                assign = hungarian_assign(cost)
            else:
                assign = Assignment(pairs=[], unmatched_predictions=list(range(nq)))

            targets = np.full(nq, cfg.num_classes, dtype=np.int64)
            for j, i in assign.pairs:
                targets[i] = gts[j].label
            weights = np.where(targets == cfg.num_classes, background_coef, 1.0)
            mask = np.zeros((nq, cfg.num_classes + 1))
            mask[np.arange(nq), targets] = weights
            logp = _log_softmax(logits)
            cls_loss = ad.neg(ad.sum_(ad.mul(logp, Tensor(mask))))

            layer_loss = cls_loss
            if assign.pairs:
                sel = np.zeros((len(assign.pairs), nq))
                for row, (j, i) in enumerate(assign.pairs):
                    sel[row, i] = 1.0
                matched = ad.matmul(Tensor(sel), segs)
                ordered = [gts[j] for j, _ in assign.pairs]
                l1, neg_iou = _segment_terms(matched, ordered)
                layer_loss = ad.add(
                    layer_loss,
                    ad.add(ad.scale(l1, lambda_coord), ad.scale(neg_iou, lambda_iou)),
                )
                per_layer_acc[l]["segment_l1"] += l1.item() / batch
                per_layer_acc[l]["segment_iou"] += neg_iou.item() / batch
                if l == n_layers - 1:
                    l1_sum += l1.item()
                    iou_sum += neg_iou.item()
            per_layer_acc[l]["classification"] += cls_loss.item() / batch
            if l == n_layers - 1:
                cls_sum += cls_loss.item()
            layer_losses.append(layer_loss)

        video_loss = layer_losses[0]
        for extra in layer_losses[1:]:
            video_loss = ad.add(video_loss, extra)
        video_loss = ad.scale(video_loss, 1.0 / n_layers)

        if result.actionness is not None:
            act = ad.reshape(ad.narrow(result.actionness, 0, b * nq, nq), (nq,))
            seg_last = result.layers.segments[-1].data[b * nq : (b + 1) * nq]
            g_targets = actionness_targets(seg_last, gts)
            act_loss = ad.sum_(ad.abs_(ad.sub(act, Tensor(g_targets))))
            video_loss = ad.add(video_loss, ad.scale(act_loss, lambda_act))
            act_sum += act_loss.item()
        video_totals.append(video_loss)

    total = video_totals[0]
    for extra in video_totals[1:]:
        total = ad.add(total, extra)
    total = ad.scale(total, 1.0 / batch)

    breakdown = LossBreakdown(
        classification=cls_sum / batch,
        segment_l1=l1_sum / batch,
        segment_iou=iou_sum / batch,
        actionness=act_sum / batch,
        total=total.item(),
        per_layer=per_layer_acc,
    )
    return total, breakdown
