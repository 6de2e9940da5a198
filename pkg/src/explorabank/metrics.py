"""Evaluation: volumetric matching, FROC sensitivities, and average precision.

Matching stacks per-slice 2D boxes over the z-extent of each track: the
volumetric intersection of two tracks is the sum over shared slices of their
2D box intersections, the union the sum of all slice areas minus that.
Predictions are classified greedily in descending score as ``tp`` (claims an
unmatched ground-truth track), ``duplicate`` (overlaps an already-claimed
one), or ``fp``. Duplicates count neither toward sensitivity nor toward the
false-positive budget.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tracking import Track3D

__all__ = [
    "FP_RATES",
    "MatchRecord",
    "MatchLedger",
    "EvalResult",
    "volumetric_iou",
    "match_3d",
    "froc",
    "average_precision",
]

FP_RATES = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)

TP = "tp"
FP = "fp"
DUPLICATE = "duplicate"


def volumetric_iou(a: Track3D, b: Track3D) -> float:
    """Stacked-box IoU of two tracks; 0 when their z-extents are disjoint."""
    inter = 0.0
    z_lo = max(a.z_start, b.z_start)
    z_hi = min(a.z_end, b.z_end)
    for z in range(z_lo, z_hi + 1):
        box_a = a.box_at(z)
        box_b = b.box_at(z)
        ix = min(box_a.x_max, box_b.x_max) - max(box_a.x_min, box_b.x_min)
        iy = min(box_a.y_max, box_b.y_max) - max(box_a.y_min, box_b.y_min)
        if ix > 0.0 and iy > 0.0:
            inter += ix * iy
    vol_a = sum(box.area for box in a.boxes)
    vol_b = sum(box.area for box in b.boxes)
    union = vol_a + vol_b - inter
    return inter / union if union > 0.0 else 0.0


@dataclass(frozen=True)
class MatchRecord:
    """One prediction's outcome: its score, status, and matched truth index."""

    score: float
    status: str
    gt_index: int | None = None


@dataclass
class MatchLedger:
    """Per-case match outcome: prediction records plus the ground-truth count."""

    case_id: str
    n_gt: int
    records: list[MatchRecord] = field(default_factory=list)


def match_3d(
    predictions: Sequence[Track3D],
    ground_truth: Sequence[Track3D],
    overlap_threshold: float = 0.3,
) -> MatchLedger:
    """Greedy volumetric matching for one case, in descending prediction score.

    A prediction is a true positive when its volumetric IoU with some
    still-unmatched truth track is >= the threshold; each truth track is
    claimed at most once.
    """
    if not 0.0 < overlap_threshold <= 1.0:
        raise ValueError(f"overlap_threshold must be in (0, 1], got {overlap_threshold!r}")
    case_id = ""
    if predictions:
        case_id = predictions[0].case_id
    elif ground_truth:
        case_id = ground_truth[0].case_id

    order = sorted(range(len(predictions)), key=lambda i: (-predictions[i].score, i))
    matched: set[int] = set()
    records: list[MatchRecord] = []
    for i in order:
        pred = predictions[i]
        overlaps = [volumetric_iou(pred, gt) for gt in ground_truth]
        best_free: int | None = None
        for gi, ov in enumerate(overlaps):
            if gi in matched or ov < overlap_threshold:
                continue
            if best_free is None or ov > overlaps[best_free]:
                best_free = gi
        if best_free is not None:
            matched.add(best_free)
            records.append(MatchRecord(pred.score, TP, best_free))
        elif any(
            ov >= overlap_threshold for gi, ov in enumerate(overlaps) if gi in matched
        ):
            records.append(MatchRecord(pred.score, DUPLICATE))
        else:
            records.append(MatchRecord(pred.score, FP))
    return MatchLedger(case_id=case_id, n_gt=len(ground_truth), records=records)


@dataclass
class EvalResult:
    """Sensitivities at the fixed FP/volume grid, their mean, and AP."""

    sensitivities: dict[float, float]
    average_sensitivity: float
    ap: float
    n_cases: int
    n_gt: int

    CSV_HEADER = [f"fp_{rate:g}" for rate in FP_RATES] + ["avg_sensitivity", "ap"]

    def to_csv_row(self) -> list[str]:
        """Percentages with two decimals, in the standard column order."""
        values = [self.sensitivities[rate] for rate in FP_RATES]
        values += [self.average_sensitivity, self.ap]
        return [f"{100.0 * v:.2f}" for v in values]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER)
        writer.writerow(self.to_csv_row())
        return buf.getvalue()


def average_precision(scores: np.ndarray, is_positive: np.ndarray, n_positive: int) -> float:
    """Area under the precision-recall curve with all-points interpolation.

    ``scores``/``is_positive`` describe ranked detections; ``n_positive`` is
    the total number of ground-truth positives (recall denominator).
    """
    scores = np.asarray(scores, dtype=float)
    is_positive = np.asarray(is_positive, dtype=bool)
    if n_positive <= 0 or len(scores) == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    flags = is_positive[order]
    # Group score ties so the result is a pure rank statistic.
    boundary = np.flatnonzero(np.diff(scores) != 0.0)
    ends = np.concatenate([boundary, [len(scores) - 1]])
    cum_tp = np.cumsum(flags)[ends]
    cum_all = ends + 1
    precision = cum_tp / cum_all
    recall = cum_tp / n_positive
    # Monotone precision envelope from the right (all-points interpolation).
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * envelope))


def froc(ledgers: Sequence[MatchLedger]) -> EvalResult:
    """Pool per-case ledgers into sensitivities at the FP/volume grid and AP.

    For each budget the score threshold is lowered as far as the mean
    false-positive count per case allows (no interpolation between operating
    points). Duplicates are excluded throughout.
    """
    if not ledgers:
        raise ValueError("froc needs at least one case ledger")
    n_cases = len(ledgers)
    n_gt = sum(ledger.n_gt for ledger in ledgers)

    pooled: list[tuple[float, str, int, int]] = []
    for ci, ledger in enumerate(ledgers):
        for ri, rec in enumerate(ledger.records):
            if rec.status != DUPLICATE:
                pooled.append((rec.score, rec.status, ci, ri))
    pooled.sort(key=lambda item: (-item[0], item[2], item[3]))

    scores = np.array([p[0] for p in pooled], dtype=float)
    tp_flags = np.array([p[1] == TP for p in pooled], dtype=bool)

    sensitivities = {rate: 0.0 for rate in FP_RATES}
    if n_gt > 0 and len(pooled) > 0:
        cum_tp = np.cumsum(tp_flags)
        cum_fp = np.cumsum(~tp_flags)
        # Only prefixes ending at a score-group boundary are valid thresholds.
        boundary = np.flatnonzero(np.diff(scores) != 0.0)
        ends = np.concatenate([boundary, [len(scores) - 1]])
        for rate in FP_RATES:
            allowed = rate * n_cases
            feasible = ends[cum_fp[ends] <= allowed]
            if len(feasible) > 0:
                sensitivities[rate] = float(cum_tp[feasible[-1]]) / n_gt

    ap = average_precision(scores, tp_flags, n_gt)
    avg = float(np.mean([sensitivities[rate] for rate in FP_RATES]))
    return EvalResult(
        sensitivities=sensitivities,
        average_sensitivity=avg,
        ap=ap,
        n_cases=n_cases,
        n_gt=n_gt,
    )
