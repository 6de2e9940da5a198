"""Teacher-student training loops over the synthetic world.

The mining stage trains a student on labeled candidates plus the EMA
teacher's confident detections while a prediction bank records, per case and
slice, which boxes keep being re-detected. A stopping round is chosen from
the dynamics log, reliable boxes are selected by hit count, and a fresh model
is retrained on labels plus the selection. Baseline objectives (naive,
loss-recalibration, prior-corrected, distance-gated sampling, stage-wise
mining) run through the same engine for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .. import risk
from ..bank import PredictionBank
from ..geometry import Box2D, ScoredBox, boxes_to_array, nms_indices, pairwise_iou
from ..metrics import EvalResult, MatchLedger, froc, match_3d
from ..tracking import Track3D, link_tracks
from .detector import DetectorParams, ema_update
from .world import SimWorld, Study, propose_arrays, slice_dropout

__all__ = [
    "TrainConfig",
    "TrainingDiverged",
    "DynamicsLog",
    "ExploreOutcome",
    "RetrainOutcome",
    "run_exploratory",
    "run_supervised",
    "run_retrain",
    "run_multistage",
    "stopping_round",
    "validation_ap",
    "evaluate_detector",
    "predict_tracks",
    "ground_truth_tracks",
    "mined_box_precision",
    "case_key",
    "split_case_key",
]

SUPERVISED_STRATEGIES = ("baseline", "adding", "ignoring", "recalibration", "scar", "sampling")


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the training loops; defaults match the reference setup."""

    pseudo_threshold: float = 0.9  # teacher confidence needed to flip a sample
    record_threshold: float = 0.85  # bank record threshold
    match_iou: float = 0.7  # bank entry matching threshold
    min_hit_count: int = 20  # hit-count selection threshold
    ema_momentum: float = 0.999
    ema_ramp: float = 0.05  # how fast the EMA horizon grows with the round index
    learning_rate: float = 1.0
    batch_slices: int = 8  # (case, slice) samples per round
    max_rounds: int = 2000
    slice_dropout_prob: float = 0.5
    scale_jitter: tuple[float, float] = (0.8, 1.2)
    hidden_units: int = 16
    labeled_weight: float = 12.0  # per-sample loss multiplier for labeled boxes
    pseudo_weight: float = 16.0  # per-sample loss multiplier for flipped boxes
    pos_iou: float = 0.5  # candidate-to-annotation matching
    nms_iou: float = 0.5
    gt_nms_iou: float = 0.7
    flip_threshold: float = 0.95  # loss-recalibration arm
    scar_prior: float | None = None  # estimated from the batch when None
    sampling_cutoff: float = 0.3  # image-space distance gate
    link_iou: float = 0.5
    max_gap: int = 1
    match3d_iou: float = 0.3
    eval_every: int = 25
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.ema_momentum <= 1.0:
            raise ValueError(f"ema_momentum must be in [0, 1], got {self.ema_momentum!r}")
        if not 0.0 < self.pseudo_threshold <= 1.0:
            raise ValueError(f"pseudo_threshold must be in (0, 1], got {self.pseudo_threshold!r}")
        if not 0.0 <= self.record_threshold <= 1.0:
            raise ValueError(f"record_threshold must be in [0, 1], got {self.record_threshold!r}")
        if self.min_hit_count < 1:
            raise ValueError(f"min_hit_count must be >= 1, got {self.min_hit_count!r}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be >= 1, got {self.max_rounds!r}")
        if not 0.0 <= self.slice_dropout_prob <= 1.0:
            raise ValueError(
                f"slice_dropout_prob must be in [0, 1], got {self.slice_dropout_prob!r}"
            )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scale_jitter"] = list(self.scale_jitter)
        return out


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite; carries the failing round."""

    def __init__(self, round_index: int, value: float):
        super().__init__(f"training diverged at round {round_index} (loss {value!r})")
        self.round_index = round_index


@dataclass
class DynamicsLog:
    """Per-round trace: bank growth, validation AP, and training loss."""

    rounds: list[int] = field(default_factory=list)
    mined_total: list[int] = field(default_factory=list)
    mined_latest: list[int] = field(default_factory=list)
    val_ap: list[float] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)

    def append(self, rnd: int, total: int, latest: int, ap: float, loss: float) -> None:
        self.rounds.append(rnd)
        self.mined_total.append(total)
        self.mined_latest.append(latest)
        self.val_ap.append(ap)
        self.loss.append(loss)

    def to_csv(self) -> str:
        lines = ["round,mined_total,mined_latest,val_ap,loss"]
        for i in range(len(self.rounds)):
            lines.append(
                f"{self.rounds[i]},{self.mined_total[i]},{self.mined_latest[i]},"
                f"{self.val_ap[i]!r},{self.loss[i]!r}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class ExploreOutcome:
    teacher: DetectorParams
    student: DetectorParams
    bank: PredictionBank
    log: DynamicsLog
    bank_snapshots: dict[int, PredictionBank]


@dataclass
class RetrainOutcome:
    teacher: DetectorParams
    student: DetectorParams
    log: DynamicsLog


def case_key(case_id: str, z: int) -> str:
    return f"{case_id}:{z:03d}"


def split_case_key(key: str) -> tuple[str, int]:
    case_id, _, z = key.rpartition(":")
    if not case_id:
        raise ValueError(f"case key {key!r} lacks a slice suffix")
    return case_id, int(z)


# -- per-round batch assembly --------------------------------------------------


@dataclass
class _SliceBatch:
    study: Study
    z: int
    boxes: np.ndarray  # (n, 4)
    features: np.ndarray  # (n, 3d)
    is_lesion: np.ndarray  # (n,) bool, evaluation only
    labeled: np.ndarray  # (n,) bool
    annotations: list[Box2D]


def _assemble_slice(
    study: Study, z: int, rng: np.random.Generator, cfg: TrainConfig, world: SimWorld
) -> _SliceBatch:
    cand = propose_arrays(study, z, rng, world.config)
    annotations = study.annotations(z)
    labeled = _match_mask(cand.boxes, annotations, cfg.pos_iou)
    return _SliceBatch(
        study=study,
        z=z,
        boxes=cand.boxes,
        features=cand.features,
        is_lesion=cand.is_lesion,
        labeled=labeled,
        annotations=annotations,
    )


def _match_mask(
    boxes: np.ndarray, refs: list[Box2D], iou_threshold: float
) -> np.ndarray:
    if not refs or len(boxes) == 0:
        return np.zeros(len(boxes), dtype=bool)
    overlap = pairwise_iou(boxes, boxes_to_array(refs))
    return overlap.max(axis=1) >= iou_threshold


def _epoch_order(n_units: int, total_visits: int, rng: np.random.Generator) -> np.ndarray:
    chunks = []
    produced = 0
    while produced < total_visits:
        chunks.append(rng.permutation(n_units))
        produced += n_units
    return np.concatenate(chunks)[:total_visits]


def _ema_momentum(base: float, round_index: int, ramp: float) -> float:
    # Warm-up ramp: track the student early, then lengthen the averaging
    # horizon so the teacher trails the student by a growing window.
    return min(base, 1.0 - 1.0 / (10.0 + ramp * round_index))


def _prior_config(
    cfg: TrainConfig,
    n_labeled: int,
    n_flipped: int,
    n_total: int,
    trusted_pseudo: bool = False,
) -> risk.RiskConfig:
    """Empirical frequencies with per-sample multipliers on the positive groups.

    Pseudo-positives carry their own multiplier so their total pull scales
    with how many of them flip; retraining treats selected boxes like labels.
    """
    pseudo_mult = cfg.labeled_weight if trusted_pseudo else cfg.pseudo_weight
    n_neg = n_total - n_labeled - n_flipped
    return risk.RiskConfig(
        prior_mode="explicit",
        pi_labeled=cfg.labeled_weight * n_labeled / n_total,
        pi_unlabeled_pos=pseudo_mult * n_flipped / n_total,
        pi_unlabeled_neg=n_neg / n_total,
    )


# -- training loops ------------------------------------------------------------


def _slice_units(world: SimWorld) -> list[tuple[int, int]]:
    return [
        (ci, z)
        for ci, study in enumerate(world.train)
        for z in range(study.slice_count)
    ]


def run_exploratory(world: SimWorld, cfg: TrainConfig) -> ExploreOutcome:
    """Mining stage: pseudo-labels from the EMA teacher, bank records per visit."""
    rng = np.random.default_rng(cfg.seed)
    d_in = 3 * world.config.feature_dim
    student = DetectorParams.init(rng, d_in, cfg.hidden_units)
    teacher = student.copy()

    bank = PredictionBank(cfg.record_threshold, cfg.match_iou, cfg.gt_nms_iou)
    for study in world.train:
        for z in range(study.slice_count):
            bank.add_case(case_key(study.case_id, z), study.annotations(z))

    val_features, val_flags = _val_arrays(world)
    units = _slice_units(world)
    order = _epoch_order(len(units), cfg.max_rounds * cfg.batch_slices, rng)
    log = DynamicsLog()
    snapshots: dict[int, PredictionBank] = {}
    val_ap = 0.0

    for rnd in range(cfg.max_rounds):
        visit = order[rnd * cfg.batch_slices : (rnd + 1) * cfg.batch_slices]
        slices = [
            _assemble_slice(world.train[units[i][0]], units[i][1], rng, cfg, world)
            for i in visit
        ]
        features = np.concatenate([s.features for s in slices])
        labeled = np.concatenate([s.labeled for s in slices])
        teacher_scores = teacher(features)

        # Bank update per visited slice, on NMS-filtered teacher predictions.
        offset = 0
        for sl in slices:
            n = len(sl.boxes)
            scores = teacher_scores[offset : offset + n]
            keep = nms_indices(sl.boxes, scores, cfg.nms_iou)
            detections = [
                ScoredBox(Box2D(*sl.boxes[i]), float(scores[i]), sl.z) for i in keep
            ]
            bank.update(case_key(sl.study.case_id, sl.z), detections, sl.annotations)
            offset += n

        # Student step: labeled plus teacher-confident unlabeled as positives.
        gt_overlap = np.concatenate(
            [_match_mask(s.boxes, s.annotations, cfg.gt_nms_iou) for s in slices]
        )
        indicator = teacher_scores[~labeled].copy()
        indicator[gt_overlap[~labeled]] = -1.0  # GT-overlapping predictions never flip
        batch = risk.SampleBatch(_augment(features, cfg, rng), labeled)
        n_flipped = int(np.sum(indicator >= cfg.pseudo_threshold))
        terms = risk.indicator_terms(
            batch, indicator, cfg.pseudo_threshold,
            _prior_config(cfg, int(labeled.sum()), n_flipped, len(batch)),
        )
        loss = _student_step(student, batch.features, terms, cfg, rnd)
        teacher = ema_update(teacher, student, _ema_momentum(cfg.ema_momentum, rnd, cfg.ema_ramp))

        if rnd % cfg.eval_every == 0 or rnd == cfg.max_rounds - 1:
            val_ap = _classification_ap(teacher, val_features, val_flags)
            snapshots[rnd] = bank.copy()
        log.append(rnd, bank.mined_total(), bank.latest_hit_count(), val_ap, loss)

    return ExploreOutcome(teacher, student, bank, log, snapshots)


def run_supervised(
    world: SimWorld,
    cfg: TrainConfig,
    selected: dict[str, list[Box2D]] | None = None,
    strategy: str = "baseline",
) -> RetrainOutcome:
    """Train a fresh model under a fixed-target or self-calibrating objective.

    ``baseline`` uses labels only; ``adding``/``ignoring`` consume a selection
    of mined boxes keyed by case:slice; ``recalibration``, ``scar`` and
    ``sampling`` are the dynamic-flip, prior-corrected and distance-gated
    comparison objectives.
    """
    if strategy not in SUPERVISED_STRATEGIES:
        raise ValueError(f"strategy must be one of {SUPERVISED_STRATEGIES}, got {strategy!r}")
    if strategy in ("adding", "ignoring") and selected is None:
        selected = {}
    selected_by_slice = _selection_index(selected or {})

    rng = np.random.default_rng(cfg.seed)
    d_in = 3 * world.config.feature_dim
    student = DetectorParams.init(rng, d_in, cfg.hidden_units)
    teacher = student.copy()

    val_features, val_flags = _val_arrays(world)
    units = _slice_units(world)
    order = _epoch_order(len(units), cfg.max_rounds * cfg.batch_slices, rng)
    log = DynamicsLog()
    val_ap = 0.0

    for rnd in range(cfg.max_rounds):
        visit = order[rnd * cfg.batch_slices : (rnd + 1) * cfg.batch_slices]
        slices = [
            _assemble_slice(world.train[units[i][0]], units[i][1], rng, cfg, world)
            for i in visit
        ]
        features = np.concatenate([s.features for s in slices])
        labeled = np.concatenate([s.labeled for s in slices])
        batch = risk.SampleBatch(_augment(features, cfg, rng), labeled)

        if strategy in ("baseline", "adding", "ignoring"):
            mask = np.concatenate(
                [_selected_mask(s, selected_by_slice, cfg) for s in slices]
            )
            mask &= ~labeled
            mode = "ignoring" if strategy == "ignoring" else "adding"
            terms = risk.retrain_terms(
                batch, mask, mode,
                _prior_config(cfg, int(labeled.sum()), int(mask.sum()), len(batch), trusted_pseudo=True),
            )
        elif strategy == "recalibration":
            scores_now = student(batch.features)
            flip = batch.unlabeled & (scores_now > cfg.flip_threshold)
            terms = risk.recalibrated_terms(
                batch, scores_now, cfg.flip_threshold,
                _prior_config(cfg, int(labeled.sum()), int(flip.sum()), len(batch)),
            )
        elif strategy == "scar":
            prior = cfg.scar_prior
            if prior is None:
                prior = float(
                    np.clip(labeled.mean() / max(world.config.label_rate, 1e-6), 1e-4, 0.5)
                )
            terms = risk.scar_terms(batch, prior)
        else:  # sampling
            distances = np.concatenate([_annotation_distance(s) for s in slices])
            terms = risk.sampling_terms(batch, distances[~labeled], cfg.sampling_cutoff)

        loss = _student_step(student, batch.features, terms, cfg, rnd)
        teacher = ema_update(teacher, student, _ema_momentum(cfg.ema_momentum, rnd, cfg.ema_ramp))

        if rnd % cfg.eval_every == 0 or rnd == cfg.max_rounds - 1:
            val_ap = _classification_ap(teacher, val_features, val_flags)
        log.append(rnd, 0, 0, val_ap, loss)

    return RetrainOutcome(teacher, student, log)


def run_retrain(
    world: SimWorld,
    cfg: TrainConfig,
    selected: dict[str, list[Box2D]] | None,
    strategy: str = "adding",
) -> RetrainOutcome:
    """Fresh training on original labels plus a bank selection."""
    if strategy not in ("adding", "ignoring"):
        raise ValueError(f"retraining strategy must be adding or ignoring, got {strategy!r}")
    return run_supervised(world, cfg, selected=selected, strategy=strategy)


def run_multistage(
    world: SimWorld, cfg: TrainConfig, stages: int = 3, mining_threshold: float | None = None
) -> tuple[RetrainOutcome, list[int]]:
    """Train, mine confident detections, retrain from scratch; repeat.

    Mining happens once per stage on the converged teacher, so boxes the
    model has already learned to suppress are never recovered later. The
    mining cut defaults to the bank record threshold.
    """
    if stages < 1:
        raise ValueError(f"stages must be >= 1, got {stages!r}")
    if mining_threshold is None:
        mining_threshold = cfg.pseudo_threshold
    mined: dict[str, list[Box2D]] = {}
    mined_per_stage: list[int] = []
    outcome: RetrainOutcome | None = None
    for stage in range(stages):
        outcome = run_supervised(world, cfg, selected=mined, strategy="adding")
        if stage == stages - 1:
            break
        rng = np.random.default_rng(cfg.seed + 1000 * (stage + 1))
        new_total = 0
        for study in world.train:
            for z in range(study.slice_count):
                cand = propose_arrays(study, z, rng, world.config)
                scores = outcome.teacher(cand.features)
                keep = nms_indices(cand.boxes, scores, cfg.nms_iou)
                refs = study.annotations(z) + mined.get(case_key(study.case_id, z), [])
                ref_arr = boxes_to_array(refs)
                for i in keep:
                    if scores[i] < mining_threshold:
                        continue
                    box = Box2D(*cand.boxes[i])
                    if len(refs) and pairwise_iou(
                        box.as_array()[None, :], ref_arr
                    ).max() >= cfg.pos_iou:
                        continue
                    key = case_key(study.case_id, z)
                    mined.setdefault(key, []).append(box)
                    refs.append(box)
                    ref_arr = boxes_to_array(refs)
                    new_total += 1
        mined_per_stage.append(new_total)
    assert outcome is not None
    return outcome, mined_per_stage


def _reseed(cfg: TrainConfig, seed: int) -> TrainConfig:
    values = cfg.to_dict()
    values["seed"] = seed
    values["scale_jitter"] = tuple(values["scale_jitter"])
    return TrainConfig(**values)


def _learning_rate(cfg: TrainConfig, rnd: int) -> float:
    # Cosine decay to a small floor so the student settles by the last rounds
    # and the trailing EMA teacher can catch up with it.
    progress = rnd / max(cfg.max_rounds - 1, 1)
    scale = 0.1 + 0.9 * 0.5 * (1.0 + np.cos(np.pi * progress))
    return cfg.learning_rate * scale


def _student_step(
    student: DetectorParams,
    features: np.ndarray,
    terms: list,
    cfg: TrainConfig,
    rnd: int,
) -> float:
    scores = student(features)
    loss = risk.evaluate_terms(scores, terms)
    if not np.isfinite(loss):
        raise TrainingDiverged(rnd, loss)
    grad_scores = risk.terms_gradient(scores, terms)
    grads = student.score_gradients(features, grad_scores)
    student.sgd_step(grads, _learning_rate(cfg, rnd))
    return float(loss)


def _augment(features: np.ndarray, cfg: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = cfg.scale_jitter
    scales = rng.uniform(lo, hi, size=len(features))
    return slice_dropout(features * scales[:, None], cfg.slice_dropout_prob, rng)


def _selection_index(selected: dict[str, list[Box2D]]) -> dict[tuple[str, int], np.ndarray]:
    index: dict[tuple[str, int], np.ndarray] = {}
    for key, boxes in selected.items():
        if not boxes:
            continue
        index[split_case_key(key)] = boxes_to_array(boxes)
    return index


def _selected_mask(
    sl: _SliceBatch, index: dict[tuple[str, int], np.ndarray], cfg: TrainConfig
) -> np.ndarray:
    refs = index.get((sl.study.case_id, sl.z))
    if refs is None or len(sl.boxes) == 0:
        return np.zeros(len(sl.boxes), dtype=bool)
    overlap = pairwise_iou(sl.boxes, refs)
    return overlap.max(axis=1) >= cfg.pos_iou


def _annotation_distance(sl: _SliceBatch) -> np.ndarray:
    """Center distance from each candidate to the nearest same-slice annotation."""
    if not sl.annotations:
        return np.full(len(sl.boxes), np.inf)
    centers = np.stack(
        [
            0.5 * (sl.boxes[:, 0] + sl.boxes[:, 2]),
            0.5 * (sl.boxes[:, 1] + sl.boxes[:, 3]),
        ],
        axis=1,
    )
    ref_centers = np.array(
        [[0.5 * (b.x_min + b.x_max), 0.5 * (b.y_min + b.y_max)] for b in sl.annotations]
    )
    diff = centers[:, None, :] - ref_centers[None, :, :]
    return np.sqrt((diff**2).sum(axis=2)).min(axis=1)


# -- stopping criterion ---------------------------------------------------------


def stopping_round(
    log: DynamicsLog,
    mode: str = "validation_ap",
    surge_factor: float = 1.5,
    window: int = 100,
    min_count: int = 0,
) -> int:
    """Pick the round to stop mining at.

    ``validation_ap`` returns the earliest round achieving the maximum
    validation AP. ``mined_surge`` returns the first round whose cumulative
    mined count exceeds ``surge_factor`` times the trailing-window median
    (and ``min_count``), or the final round when no surge occurs.
    """
    if not log.rounds:
        raise ValueError("dynamics log is empty")
    if mode == "validation_ap":
        values = np.asarray(log.val_ap)
        return int(log.rounds[int(np.argmax(values))])
    if mode == "mined_surge":
        totals = np.asarray(log.mined_total, dtype=float)
        for t in range(window, len(totals)):
            median = float(np.median(totals[t - window : t]))
            if median > 0 and totals[t] > surge_factor * median and totals[t] > min_count:
                return int(log.rounds[t])
        return int(log.rounds[-1])
    raise ValueError(f"mode must be validation_ap or mined_surge, got {mode!r}")


# -- evaluation helpers ----------------------------------------------------------


def _val_arrays(world: SimWorld) -> tuple[np.ndarray, np.ndarray]:
    features, flags = [], []
    for study in world.val:
        assert study.fixed_candidates is not None
        for cand in study.fixed_candidates:
            features.append(cand.features)
            flags.append(cand.is_lesion)
    return np.concatenate(features), np.concatenate(flags)


def _classification_ap(
    params: DetectorParams, features: np.ndarray, flags: np.ndarray
) -> float:
    from ..metrics import average_precision

    scores = params(features)
    return average_precision(scores, flags, int(flags.sum()))


def validation_ap(params: DetectorParams, world: SimWorld) -> float:
    """Candidate-ranking AP on the fully labeled validation split."""
    features, flags = _val_arrays(world)
    return _classification_ap(params, features, flags)


def predict_tracks(
    params: DetectorParams, world: SimWorld, split: str, cfg: TrainConfig
) -> dict[str, list[Track3D]]:
    """Score frozen candidates, NMS per slice, and stack into 3D tracks."""
    out: dict[str, list[Track3D]] = {}
    for study in world.split(split):
        if study.fixed_candidates is None:
            raise ValueError(f"split {split!r} has no frozen candidates")
        per_slice: dict[int, list[ScoredBox]] = {}
        for z, cand in enumerate(study.fixed_candidates):
            scores = params(cand.features)
            keep = nms_indices(cand.boxes, scores, cfg.nms_iou)
            per_slice[z] = [
                ScoredBox(Box2D(*cand.boxes[i]), float(scores[i]), z) for i in keep
            ]
        out[study.case_id] = link_tracks(
            per_slice,
            link_iou=cfg.link_iou,
            max_gap=cfg.max_gap,
            case_id=study.case_id,
        )
    return out


def ground_truth_tracks(world: SimWorld, split: str) -> dict[str, list[Track3D]]:
    out: dict[str, list[Track3D]] = {}
    for study in world.split(split):
        tracks = []
        for lesion in study.lesions:
            span = lesion.z_hi - lesion.z_lo + 1
            tracks.append(
                Track3D(study.case_id, lesion.z_lo, lesion.z_hi, [lesion.box] * span, 1.0)
            )
        out[study.case_id] = tracks
    return out


def evaluate_detector(
    params: DetectorParams, world: SimWorld, split: str, cfg: TrainConfig
) -> EvalResult:
    """Full pipeline evaluation on a frozen split: tracks, matching, FROC."""
    predictions = predict_tracks(params, world, split, cfg)
    truth = ground_truth_tracks(world, split)
    ledgers: list[MatchLedger] = []
    for case_id in sorted(truth):
        ledgers.append(
            match_3d(predictions.get(case_id, []), truth[case_id], cfg.match3d_iou)
        )
    return froc(ledgers)


def mined_box_precision(
    bank: PredictionBank, world: SimWorld, min_hits: int | None = None
) -> tuple[int, int]:
    """(correct, total) mined entries judged against the latent lesion boxes.

    An entry is correct when it overlaps (IoU >= 0.5) a latent lesion box on
    its slice. ``min_hits`` restricts the count to entries selected at that
    hit-count threshold.
    """
    studies = {s.case_id: s for s in world.train}
    correct = 0
    total = 0
    for key, entries in bank.mined_entries().items():
        case_id, z = split_case_key(key)
        study = studies[case_id]
        latent = boxes_to_array(study.latent_boxes(z))
        for entry in entries:
            if min_hits is not None and entry.match_count < min_hits:
                continue
            total += 1
            if len(latent) and pairwise_iou(
                entry.box.as_array()[None, :], latent
            ).max() >= 0.5:
                correct += 1
    return correct, total
