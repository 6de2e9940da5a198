"""Stack per-slice 2D detections into 3D candidates with a constant-position Kalman filter.

The state is the box center and size (cx, cy, w, h) with an identity
transition: boxes are not expected to drift between adjacent slices, only to
be measured with noise. Tracks greedily claim the best-overlapping detection
on each successive slice and survive a configurable number of missed slices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .geometry import Box2D, ScoredBox, iou

__all__ = [
    "KalmanState",
    "Track3D",
    "box_to_state",
    "state_to_box",
    "kalman_predict",
    "kalman_correct",
    "link_tracks",
    "track_to_box3d",
]

_PSD_TOL = 1e-9


def box_to_state(box: Box2D) -> np.ndarray:
    """Corner-form box to (cx, cy, w, h)."""
    return np.array(
        [
            0.5 * (box.x_min + box.x_max),
            0.5 * (box.y_min + box.y_max),
            box.width,
            box.height,
        ]
    )


def state_to_box(vec: np.ndarray) -> Box2D:
    """(cx, cy, w, h) back to a corner-form box; sizes floored to stay valid."""
    cx, cy, w, h = (float(v) for v in vec)
    w = max(w, 1e-9)
    h = max(h, 1e-9)
    return Box2D(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)


@dataclass
class KalmanState:
    """Gaussian belief over a box with scalar process/measurement noise levels."""

    mean: np.ndarray
    cov: np.ndarray
    process_noise: float = 1e-3
    measurement_noise: float = 1e-2

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(4)
        self.cov = np.asarray(self.cov, dtype=float).reshape(4, 4)
        _require_psd(self.cov)

    @classmethod
    def from_box(
        cls, box: Box2D, process_noise: float = 1e-3, measurement_noise: float = 1e-2
    ) -> "KalmanState":
        cov = measurement_noise**2 * np.eye(4)
        return cls(box_to_state(box), cov, process_noise, measurement_noise)

    @property
    def box(self) -> Box2D:
        return state_to_box(self.mean)


def _require_psd(cov: np.ndarray) -> None:
    if not np.allclose(cov, cov.T, atol=1e-8):
        raise ValueError("covariance must be symmetric")
    eigvals = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if eigvals.min() < -_PSD_TOL:
        raise ValueError(f"covariance must be positive semi-definite, min eig {eigvals.min():g}")


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def kalman_predict(state: KalmanState) -> KalmanState:
    """Identity-transition prediction: the mean stays, uncertainty grows."""
    cov = _symmetrize(state.cov + state.process_noise**2 * np.eye(4))
    return KalmanState(state.mean.copy(), cov, state.process_noise, state.measurement_noise)


def kalman_correct(state: KalmanState, measurement: Box2D) -> KalmanState:
    """Fold a measured box into the belief; covariance never grows."""
    _require_psd(state.cov)
    z = box_to_state(measurement)
    r = state.measurement_noise**2 * np.eye(4)
    innovation_cov = state.cov + r
    if np.allclose(innovation_cov, 0.0):
        gain = np.zeros((4, 4))
    else:
        gain = state.cov @ np.linalg.inv(innovation_cov)
    mean = state.mean + gain @ (z - state.mean)
    cov = _symmetrize((np.eye(4) - gain) @ state.cov)
    # Numerical floor: eigenvalues can dip a hair below zero after the update.
    eigvals, eigvecs = np.linalg.eigh(cov)
    cov = _symmetrize((eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T)
    return KalmanState(mean, cov, state.process_noise, state.measurement_noise)


@dataclass
class Track3D:
    """A stacked sequence of per-slice boxes forming one 3D candidate."""

    case_id: str
    z_start: int
    z_end: int
    boxes: list[Box2D]
    score: float

    def __post_init__(self) -> None:
        if self.z_end < self.z_start:
            raise ValueError("z_end must be >= z_start")
        if len(self.boxes) != self.z_end - self.z_start + 1:
            raise ValueError(
                f"expected one box per slice in [{self.z_start}, {self.z_end}], "
                f"got {len(self.boxes)}"
            )

    def box_at(self, z: int) -> Box2D | None:
        if self.z_start <= z <= self.z_end:
            return self.boxes[z - self.z_start]
        return None


@dataclass
class _ActiveTrack:
    state: KalmanState
    boxes: list[tuple[int, Box2D, bool]] = field(default_factory=list)  # (z, box, measured)
    scores: list[float] = field(default_factory=list)
    miss_streak: int = 0


def link_tracks(
    per_slice: Mapping[int, Sequence[ScoredBox]],
    link_iou: float = 0.5,
    max_gap: int = 1,
    case_id: str = "",
    process_noise: float = 1e-3,
    measurement_noise: float = 1e-2,
) -> list[Track3D]:
    """Associate per-slice detections into tracks, slice by slice.

    Each live track predicts its next-slice box and claims the available
    detection with the highest IoU >= ``link_iou`` (IoU ties prefer the
    higher-scored detection, then the earlier one). Unclaimed detections
    start new tracks; a track ends after ``max_gap`` consecutive misses.
    Every input detection ends up in exactly one track. Missed slices inside
    a surviving track get the predicted box.
    """
    if not 0.0 < link_iou <= 1.0:
        raise ValueError(f"link_iou must be in (0, 1], got {link_iou!r}")
    if max_gap < 0:
        raise ValueError(f"max_gap must be >= 0, got {max_gap!r}")
    if not per_slice:
        return []

    z_lo = min(per_slice)
    z_hi = max(per_slice)
    active: list[_ActiveTrack] = []
    finished: list[_ActiveTrack] = []

    for z in range(z_lo, z_hi + 1):
        detections = list(per_slice.get(z, ()))
        available = set(range(len(detections)))

        survivors: list[_ActiveTrack] = []
        for track in active:
            track.state = kalman_predict(track.state)
            predicted = track.state.box
            best: int | None = None
            best_key: tuple[float, float, int] | None = None
            for di in sorted(available):
                overlap = iou(predicted, detections[di].box)
                if overlap < link_iou:
                    continue
                key = (-overlap, -detections[di].score, di)
                if best_key is None or key < best_key:
                    best_key = key
                    best = di
            if best is not None:
                available.discard(best)
                det = detections[best]
                track.state = kalman_correct(track.state, det.box)
                track.boxes.append((z, det.box, True))
                track.scores.append(det.score)
                track.miss_streak = 0
                survivors.append(track)
            else:
                track.miss_streak += 1
                if track.miss_streak > max_gap:
                    finished.append(track)
                else:
                    track.boxes.append((z, predicted, False))
                    survivors.append(track)
        active = survivors

        for di in sorted(available):
            det = detections[di]
            track = _ActiveTrack(
                state=KalmanState.from_box(det.box, process_noise, measurement_noise)
            )
            track.boxes.append((z, det.box, True))
            track.scores.append(det.score)
            active.append(track)

    finished.extend(active)
    return [t for t in (_finalize(tr, case_id) for tr in finished) if t is not None]


def _finalize(track: _ActiveTrack, case_id: str) -> Track3D | None:
    boxes = list(track.boxes)
    while boxes and not boxes[-1][2]:
        boxes.pop()  # trailing predicted-only slices are not part of the track
    if not boxes:
        return None
    z_start = boxes[0][0]
    z_end = boxes[-1][0]
    return Track3D(
        case_id=case_id,
        z_start=z_start,
        z_end=z_end,
        boxes=[b for _, b, _ in boxes],
        score=float(np.mean(track.scores)),
    )


def track_to_box3d(track: Track3D) -> tuple[int, int, Box2D]:
    """Reduce a track to its z-extent and the coordinate-wise enclosing box."""
    arr = np.array([[b.x_min, b.y_min, b.x_max, b.y_max] for b in track.boxes])
    enclosing = Box2D(
        float(arr[:, 0].min()),
        float(arr[:, 1].min()),
        float(arr[:, 2].max()),
        float(arr[:, 3].max()),
    )
    return track.z_start, track.z_end, enclosing
