"""explorabank: pseudo-label mining with a prediction bank, on a synthetic detection world.

The library provides box geometry and NMS, a per-case prediction bank with
binary hit histories, positive-unlabeled risk estimators, an EMA
teacher-student training loop over a synthetic multi-slice world, Kalman
stacking of 2D detections into 3D candidates, and FROC/AP evaluation. The
``explorabank`` command line drives end-to-end experiments.
"""

from .bank import BankEntry, PredictionBank, SnapshotError, UpdateReport
from .geometry import Box2D, ScoredBox, gt_nms, iou, jitter, nms
from .metrics import EvalResult, MatchLedger, average_precision, froc, match_3d, volumetric_iou
from .risk import (
    RiskConfig,
    Sample,
    SampleBatch,
    cross_entropy,
    exploratory_loss,
    indicator_risk,
    pn_risk,
    recalibrated_loss,
    retrain_loss,
    sampling_risk,
    scar_risk,
)
from .tracking import KalmanState, Track3D, kalman_correct, kalman_predict, link_tracks, track_to_box3d

__version__ = "0.1.0"

__all__ = [
    "BankEntry",
    "Box2D",
    "EvalResult",
    "KalmanState",
    "MatchLedger",
    "PredictionBank",
    "RiskConfig",
    "Sample",
    "SampleBatch",
    "ScoredBox",
    "SnapshotError",
    "Track3D",
    "UpdateReport",
    "average_precision",
    "cross_entropy",
    "exploratory_loss",
    "froc",
    "gt_nms",
    "indicator_risk",
    "iou",
    "jitter",
    "kalman_correct",
    "kalman_predict",
    "link_tracks",
    "match_3d",
    "nms",
    "pn_risk",
    "recalibrated_loss",
    "retrain_loss",
    "sampling_risk",
    "scar_risk",
    "track_to_box3d",
    "volumetric_iou",
]
