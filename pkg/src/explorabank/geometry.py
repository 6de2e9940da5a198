"""Axis-aligned 2D box arithmetic: IoU, greedy NMS, ground-truth suppression, box jitter.

Boxes are corner-form (x_min, y_min, x_max, y_max) in continuous normalized
image units. All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Box2D",
    "ScoredBox",
    "iou",
    "pairwise_iou",
    "boxes_to_array",
    "nms",
    "nms_indices",
    "gt_nms",
    "jitter",
]

# Smallest side length a jittered box is allowed to collapse to.
_MIN_SIDE = 1e-9


@dataclass(frozen=True)
class Box2D:
    """Corner-form box with strictly positive area and finite coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for name in ("x_min", "y_min", "x_max", "y_max"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"Box2D.{name} must be finite, got {value!r}")
        if not self.x_min < self.x_max:
            raise ValueError(
                f"Box2D requires x_min < x_max, got [{self.x_min}, {self.x_max}]"
            )
        if not self.y_min < self.y_max:
            raise ValueError(
                f"Box2D requires y_min < y_max, got [{self.y_min}, {self.y_max}]"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_array(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.x_max, self.y_max], dtype=float)


@dataclass(frozen=True)
class ScoredBox:
    """A detector prediction: a box with a confidence score and a slice index."""

    box: Box2D
    score: float
    slice_index: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"ScoredBox.score must be in [0, 1], got {self.score!r}")
        if self.slice_index < 0:
            raise ValueError(
                f"ScoredBox.slice_index must be >= 0, got {self.slice_index!r}"
            )


def iou(a: Box2D, b: Box2D) -> float:
    """Intersection over union of two boxes; 0 when disjoint, 1 when identical."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def boxes_to_array(boxes: Iterable[Box2D]) -> np.ndarray:
    """Stack boxes into an (n, 4) float array (empty input gives shape (0, 4))."""
    rows = [(b.x_min, b.y_min, b.x_max, b.y_max) for b in boxes]
    if not rows:
        return np.zeros((0, 4), dtype=float)
    return np.asarray(rows, dtype=float)


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU matrix between (n, 4) and (m, 4) corner-form box arrays."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    ix = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0.0, inter / union, 0.0)
    return out


def nms_indices(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float) -> list[int]:
    """Greedy NMS on array inputs; returns kept indices in descending-score order.

    A candidate is suppressed when its IoU with an already-kept box exceeds
    the threshold (strictly). Score ties are broken by lower input index.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold!r}")
    n = len(scores)
    if n == 0:
        return []
    order = np.lexsort((np.arange(n), -np.asarray(scores, dtype=float)))
    ious = pairwise_iou(boxes, boxes)
    keep: list[int] = []
    for i in order:
        if all(ious[i, j] <= iou_threshold for j in keep):
            keep.append(int(i))
    return keep


def nms(boxes: Sequence[ScoredBox], iou_threshold: float) -> list[ScoredBox]:
    """Greedy score-descending non-maximum suppression.

    The output is sorted by descending score and no retained pair has
    IoU > iou_threshold.
    """
    arr = boxes_to_array(sb.box for sb in boxes)
    scores = np.array([sb.score for sb in boxes], dtype=float)
    return [boxes[i] for i in nms_indices(arr, scores, iou_threshold)]


def gt_nms(
    predictions: Sequence[ScoredBox],
    ground_truth: Sequence[Box2D],
    iou_threshold: float = 0.7,
) -> list[ScoredBox]:
    """Drop predictions overlapping any ground-truth box at IoU >= threshold.

    Removal ignores prediction scores; survivors keep their input order.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold!r}")
    if not ground_truth or not predictions:
        return list(predictions)
    ious = pairwise_iou(
        boxes_to_array(sb.box for sb in predictions), boxes_to_array(ground_truth)
    )
    max_iou = ious.max(axis=1)
    return [sb for sb, m in zip(predictions, max_iou) if m < iou_threshold]


def _ordered(lo: float, hi: float) -> tuple[float, float]:
    # Re-open a collapsed interval around its midpoint so the box stays valid.
    if hi - lo >= _MIN_SIDE:
        return lo, hi
    center = 0.5 * (lo + hi)
    return center - 0.5 * _MIN_SIDE, center + 0.5 * _MIN_SIDE


def jitter(box: Box2D, magnitude: float, rng: np.random.Generator) -> Box2D:
    """Perturb each coordinate uniformly within +/- magnitude * side length.

    Magnitude 0 is the identity. Perturbed coordinates that would invert the
    box are re-opened to a minimal valid extent.
    """
    if magnitude < 0.0:
        raise ValueError(f"magnitude must be >= 0, got {magnitude!r}")
    offsets = rng.uniform(-magnitude, magnitude, size=4)
    x0 = box.x_min + offsets[0] * box.width
    x1 = box.x_max + offsets[1] * box.width
    y0 = box.y_min + offsets[2] * box.height
    y1 = box.y_max + offsets[3] * box.height
    x0, x1 = _ordered(x0, x1)
    y0, y1 = _ordered(y0, y1)
    return Box2D(x0, y0, x1, y1)
