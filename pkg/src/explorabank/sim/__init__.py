"""Synthetic detection world and the teacher-student training loops."""

from .detector import DetectorParams, ema_update, flatten_params, unflatten_params
from .training import (
    DynamicsLog,
    ExploreOutcome,
    RetrainOutcome,
    TrainConfig,
    TrainingDiverged,
    case_key,
    evaluate_detector,
    ground_truth_tracks,
    mined_box_precision,
    predict_tracks,
    run_exploratory,
    run_multistage,
    run_retrain,
    run_supervised,
    split_case_key,
    stopping_round,
    validation_ap,
)
from .world import (
    Candidate,
    CandidateSet,
    Lesion,
    SimWorld,
    Study,
    WorldConfig,
    generate_world,
    propose,
    propose_arrays,
    slice_dropout,
)

__all__ = [
    "Candidate",
    "CandidateSet",
    "DetectorParams",
    "DynamicsLog",
    "ExploreOutcome",
    "Lesion",
    "RetrainOutcome",
    "SimWorld",
    "Study",
    "TrainConfig",
    "TrainingDiverged",
    "WorldConfig",
    "case_key",
    "ema_update",
    "evaluate_detector",
    "flatten_params",
    "generate_world",
    "ground_truth_tracks",
    "mined_box_precision",
    "predict_tracks",
    "propose",
    "propose_arrays",
    "run_exploratory",
    "run_multistage",
    "run_retrain",
    "run_supervised",
    "slice_dropout",
    "split_case_key",
    "stopping_round",
    "unflatten_params",
    "validation_ap",
]
