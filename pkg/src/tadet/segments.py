"""Normalized temporal segments and interval arithmetic."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Segment:
    """A (center, length) pair in normalized video coordinates [0, 1]."""

    center: float
    length: float

    @property
    def start(self) -> float:
        return self.center - self.length / 2.0

    @property
    def end(self) -> float:
        return self.center + self.length / 2.0

    def interval(self) -> tuple[float, float]:
        return (self.start, self.end)

    @staticmethod
    def from_interval(start: float, end: float) -> "Segment":
        return Segment(center=(start + end) / 2.0, length=end - start)


def interval_iou(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Temporal IoU of two intervals; degenerate (empty) intervals score 0."""
    len_a = a[1] - a[0]
    len_b = b[1] - b[0]
    if len_a <= 0.0 or len_b <= 0.0:
        return 0.0
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0.0:
        return 0.0
    return inter / (len_a + len_b - inter)


def segment_iou(a: Segment, b: Segment) -> float:
    return interval_iou(a.interval(), b.interval())
