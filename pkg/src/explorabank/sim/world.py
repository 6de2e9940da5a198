"""Synthetic multi-slice detection universe with incomplete annotations.

Each study is a stack of slices containing a few lesions. A lesion occupies a
fixed box over a contiguous slice span and carries a persistent appearance
vector; its annotation, when present, is a single box on its center slice, so
even labeled lesions are unlabeled on their other slices. Lesion appearances
sit along a global direction in feature space at two radii: an easy mode well
away from the background cloud and a hard mode near its edge. Background
candidates come from a fixed anchor grid with persistent per-anchor base
appearances kept below a separability cap along the lesion direction.

Candidate features concatenate the candidate's own appearance with context
summaries from the two adjacent slices (zeroed at volume boundaries), so a
scorer can exploit inter-slice agreement and augmentation can drop one side.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from ..geometry import Box2D, jitter, pairwise_iou

__all__ = [
    "WorldConfig",
    "Lesion",
    "Study",
    "CandidateSet",
    "Candidate",
    "SimWorld",
    "generate_world",
    "propose",
    "propose_arrays",
    "slice_dropout",
]


@dataclass(frozen=True)
class WorldConfig:
    """Shape and difficulty of the synthetic universe."""

    train_cases: int = 32
    val_cases: int = 8
    test_cases: int = 16
    slice_count: int = 10
    lesions_min: int = 2
    lesions_max: int = 4
    label_rate: float = 0.5
    label_bias: str = "scar"  # or "size_biased"
    feature_dim: int = 6
    anchor_grid: int = 4
    anchor_size: float = 0.16
    easy_fraction: float = 0.55
    easy_radius: float = 2.1
    easy_spread: float = 0.3
    easy_floor: float = 1.6  # easy radii are truncated below this
    hard_radius: float = 1.6
    hard_spread: float = 0.2
    hard_angle: float = 1.25  # radians between the easy and hard appearance axes
    lateral_spread: float = 0.7
    hard_lateral_spread: float | None = None  # defaults to lateral_spread
    background_spread: float = 0.6
    background_cap: float = 0.65
    distractors_per_case: int = 10
    distractor_radius: float = 1.55
    distractor_spread: float = 0.15
    distractor_context: float = 0.45  # context agreement deficit of distractors
    observation_noise: float = 0.15
    proposal_jitter: float = 0.08

    def __post_init__(self) -> None:
        if not 0.0 <= self.label_rate <= 1.0:
            raise ValueError(f"label_rate must be in [0, 1], got {self.label_rate!r}")
        if self.slice_count < 1:
            raise ValueError(f"slice_count must be >= 1, got {self.slice_count!r}")
        if self.feature_dim < 2:
            raise ValueError(f"feature_dim must be >= 2, got {self.feature_dim!r}")
        if self.label_bias not in ("scar", "size_biased"):
            raise ValueError(f"label_bias must be scar or size_biased, got {self.label_bias!r}")
        if not 1 <= self.lesions_min <= self.lesions_max:
            raise ValueError(
                f"need 1 <= lesions_min <= lesions_max, got {self.lesions_min!r}, {self.lesions_max!r}"
            )
        if self.anchor_grid < 1:
            raise ValueError(f"anchor_grid must be >= 1, got {self.anchor_grid!r}")
        for name in ("train_cases", "val_cases", "test_cases"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Lesion:
    """A latent object: one box over a slice span plus its appearance vector."""

    box: Box2D
    z_lo: int
    z_hi: int
    center_slice: int
    appearance: np.ndarray
    labeled: bool
    hard: bool

    def covers(self, z: int) -> bool:
        return self.z_lo <= z <= self.z_hi


@dataclass
class CandidateSet:
    """Vectorized candidates of one slice (used on frozen evaluation splits)."""

    boxes: np.ndarray  # (n, 4)
    features: np.ndarray  # (n, 3 * feature_dim)
    is_lesion: np.ndarray  # (n,) bool, latent truth for evaluation only


@dataclass(frozen=True)
class Candidate:
    """One detection proposal: its box, features, and latent truth flag."""

    box: Box2D
    features: np.ndarray
    is_lesion: bool


@dataclass
class Study:
    case_id: str
    slice_count: int
    lesions: list[Lesion]
    anchor_boxes: np.ndarray  # (A, 4), shared across slices
    anchor_base: np.ndarray  # (S, A, d) persistent background appearances
    anchor_context_scale: np.ndarray  # (S, A) context agreement per anchor cell
    direction: np.ndarray  # world-level lesion-appearance direction
    fixed_candidates: list[CandidateSet] | None = None  # per slice, eval splits only

    def annotations(self, z: int) -> list[Box2D]:
        """Observed ground truth on a slice: labeled lesions annotated there."""
        return [l.box for l in self.lesions if l.labeled and l.center_slice == z]

    def latent_boxes(self, z: int) -> list[Box2D]:
        return [l.box for l in self.lesions if l.covers(z)]


@dataclass
class SimWorld:
    config: WorldConfig
    direction: np.ndarray  # unit vector toward lesion appearances
    train: list[Study]
    val: list[Study]
    test: list[Study]

    def split(self, name: str) -> list[Study]:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError:
            raise ValueError(f"unknown split {name!r}") from None


def generate_world(config: WorldConfig, seed: int) -> SimWorld:
    """Build a deterministic world; evaluation splits get frozen candidates."""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=config.feature_dim)
    direction /= np.linalg.norm(direction)
    # The hard mode sits on its own axis, rotated away from the easy one, so
    # plain supervision generalizes to it only weakly.
    ortho = rng.normal(size=config.feature_dim)
    ortho -= (ortho @ direction) * direction
    ortho /= np.linalg.norm(ortho)
    hard_direction = np.cos(config.hard_angle) * direction + np.sin(config.hard_angle) * ortho

    def build_split(prefix: str, count: int, fully_labeled: bool, frozen: bool) -> list[Study]:
        studies = []
        for i in range(count):
            study = _build_study(
                f"{prefix}{i:03d}", config, direction, hard_direction, rng, fully_labeled
            )
            if frozen:
                study.fixed_candidates = [
                    _candidate_set(study, z, rng, config) for z in range(config.slice_count)
                ]
            studies.append(study)
        return studies

    train = build_split("case", config.train_cases, fully_labeled=False, frozen=False)
    val = build_split("val", config.val_cases, fully_labeled=True, frozen=True)
    test = build_split("test", config.test_cases, fully_labeled=True, frozen=True)
    return SimWorld(config=config, direction=direction, train=train, val=val, test=test)


def _build_study(
    case_id: str,
    config: WorldConfig,
    direction: np.ndarray,
    hard_direction: np.ndarray,
    rng: np.random.Generator,
    fully_labeled: bool,
) -> Study:
    n_lesions = int(rng.integers(config.lesions_min, config.lesions_max + 1))
    boxes: list[Box2D] = []
    attempts = 0
    while len(boxes) < n_lesions and attempts < 200:
        attempts += 1
        cx, cy = rng.uniform(0.18, 0.82, size=2)
        half_w, half_h = rng.uniform(0.05, 0.11, size=2)
        box = Box2D(cx - half_w, cy - half_h, cx + half_w, cy + half_h)
        if boxes:
            overlap = pairwise_iou(
                np.array([box.as_array()]), np.stack([b.as_array() for b in boxes])
            )
            if overlap.max() >= 0.2:
                continue  # keep lesions spatially distinct for clean evaluation
        boxes.append(box)

    lesions: list[Lesion] = []
    for box in boxes:
        span = int(rng.integers(1, 5))
        z_lo = int(rng.integers(0, config.slice_count))
        z_hi = min(z_lo + span - 1, config.slice_count - 1)
        center = (z_lo + z_hi) // 2
        hard = bool(rng.random() > config.easy_fraction)
        axis = hard_direction if hard else direction
        radius = rng.normal(
            config.hard_radius if hard else config.easy_radius,
            config.hard_spread if hard else config.easy_spread,
        )
        if not hard:
            radius = max(radius, config.easy_floor)
        hard_lat = (
            config.hard_lateral_spread
            if config.hard_lateral_spread is not None
            else config.lateral_spread
        )
        lateral = rng.normal(
            0.0, hard_lat if hard else config.lateral_spread, size=config.feature_dim
        )
        lateral -= (lateral @ axis) * axis
        appearance = radius * axis + lateral
        lesions.append(
            Lesion(
                box=box,
                z_lo=z_lo,
                z_hi=z_hi,
                center_slice=center,
                appearance=appearance,
                labeled=False,
                hard=hard,
            )
        )

    if fully_labeled:
        for lesion in lesions:
            lesion.labeled = True
    elif config.label_bias == "scar":
        for lesion in lesions:
            lesion.labeled = bool(rng.random() < config.label_rate)
    else:  # size_biased: the largest lesions get annotated first
        quota = int(round(config.label_rate * len(lesions)))
        by_area = sorted(range(len(lesions)), key=lambda i: -lesions[i].box.area)
        for i in by_area[:quota]:
            lesions[i].labeled = True

    grid = config.anchor_grid
    centers = (np.arange(grid) + 0.5) / grid
    half = 0.5 * config.anchor_size
    anchor_boxes = np.array(
        [
            (cx - half, cy - half, cx + half, cy + half)
            for cy in centers
            for cx in centers
        ]
    )
    anchor_base = _background(
        rng, (config.slice_count, len(anchor_boxes), config.feature_dim), direction, config
    )
    # Distractor columns: anchor positions whose appearance sits just below
    # the hard-lesion radius and agrees across a run of slices, mimicking
    # vessel- or muscle-like structures that are consistent but not lesions.
    # Radii form a fixed ladder so every case carries comparably hard
    # false-positive structure.
    if config.distractors_per_case == 1:
        ladder = np.array([config.distractor_radius])
    else:
        ladder = np.linspace(
            config.distractor_radius - config.distractor_spread,
            config.distractor_radius + config.distractor_spread,
            config.distractors_per_case,
        )
    context_scale = np.ones((config.slice_count, len(anchor_boxes)))
    for radius in ladder:
        a = int(rng.integers(0, len(anchor_boxes)))
        run = int(rng.integers(2, 6))
        z0 = int(rng.integers(0, config.slice_count))
        lateral = rng.normal(0.0, config.lateral_spread, size=config.feature_dim)
        lateral -= (lateral @ direction) * direction
        signature = radius * direction + lateral
        for z in range(z0, min(z0 + run, config.slice_count)):
            anchor_base[z, a] = signature
            context_scale[z, a] = config.distractor_context
    return Study(
        case_id=case_id,
        slice_count=config.slice_count,
        lesions=lesions,
        anchor_boxes=anchor_boxes,
        anchor_base=anchor_base,
        anchor_context_scale=context_scale,
        direction=direction,
    )


def _background(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    direction: np.ndarray,
    config: WorldConfig,
) -> np.ndarray:
    """Background appearances with the lesion-direction component capped."""
    draw = rng.normal(0.0, config.background_spread, size=shape)
    proj = draw @ direction
    excess = np.clip(proj - config.background_cap, 0.0, None)
    return draw - excess[..., None] * direction


def propose_arrays(
    study: Study,
    slice_index: int,
    rng: np.random.Generator,
    config: WorldConfig,
) -> CandidateSet:
    """Anchor-grid plus jittered-lesion candidates for one slice, as arrays."""
    if not 0 <= slice_index < study.slice_count:
        raise ValueError(f"slice_index {slice_index} out of range for {study.case_id}")
    d = config.feature_dim
    sigma = config.observation_noise
    anchors = study.anchor_boxes
    n_anchor = len(anchors)

    lesions_here = [l for l in study.lesions if l.covers(slice_index)]
    n = n_anchor + len(lesions_here)
    boxes = np.empty((n, 4))
    own = np.empty((n, d))
    left = np.zeros((n, d))
    right = np.zeros((n, d))

    boxes[:n_anchor] = anchors
    own[:n_anchor] = study.anchor_base[slice_index] + sigma * rng.normal(size=(n_anchor, d))
    if slice_index > 0:
        scale = study.anchor_context_scale[slice_index - 1][:, None]
        left[:n_anchor] = scale * study.anchor_base[slice_index - 1] + sigma * rng.normal(
            size=(n_anchor, d)
        )
    if slice_index < study.slice_count - 1:
        scale = study.anchor_context_scale[slice_index + 1][:, None]
        right[:n_anchor] = scale * study.anchor_base[slice_index + 1] + sigma * rng.normal(
            size=(n_anchor, d)
        )

    for k, lesion in enumerate(lesions_here):
        i = n_anchor + k
        boxes[i] = jitter(lesion.box, config.proposal_jitter, rng).as_array()
        own[i] = lesion.appearance + sigma * rng.normal(size=d)
        if slice_index > 0:
            if lesion.covers(slice_index - 1):
                left[i] = lesion.appearance + sigma * rng.normal(size=d)
            else:
                left[i] = _background(rng, (d,), study.direction, config)
        if slice_index < study.slice_count - 1:
            if lesion.covers(slice_index + 1):
                right[i] = lesion.appearance + sigma * rng.normal(size=d)
            else:
                right[i] = _background(rng, (d,), study.direction, config)

    features = np.concatenate([own, left, right], axis=1)

    latent = study.latent_boxes(slice_index)
    is_lesion = np.zeros(n, dtype=bool)
    is_lesion[n_anchor:] = True
    if latent and n_anchor:
        overlap = pairwise_iou(boxes[:n_anchor], np.stack([b.as_array() for b in latent]))
        is_lesion[:n_anchor] = overlap.max(axis=1) >= 0.5
    return CandidateSet(boxes=boxes, features=features, is_lesion=is_lesion)


def propose(
    study: Study,
    slice_index: int,
    rng: np.random.Generator,
    config: WorldConfig,
) -> list[Candidate]:
    """Object view of propose_arrays, one Candidate per proposal."""
    cand = propose_arrays(study, slice_index, rng, config)
    return [
        Candidate(
            box=Box2D(*cand.boxes[i]),
            features=cand.features[i],
            is_lesion=bool(cand.is_lesion[i]),
        )
        for i in range(len(cand.boxes))
    ]


def _candidate_set(
    study: Study, z: int, rng: np.random.Generator, config: WorldConfig
) -> CandidateSet:
    return propose_arrays(study, z, rng, config)


def slice_dropout(
    features: np.ndarray, prob: float, rng: np.random.Generator
) -> np.ndarray:
    """Zero one adjacent-slice context block per row with the given probability.

    Mimics volume-boundary slices, where context exists on only one side.
    Input rows are [own | left | right] blocks of equal width.
    """
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"prob must be in [0, 1], got {prob!r}")
    features = np.asarray(features, dtype=float)
    squeeze = features.ndim == 1
    if squeeze:
        features = features[None, :]
    if features.shape[1] % 3 != 0:
        raise ValueError("feature width must be divisible into three context blocks")
    d = features.shape[1] // 3
    out = features.copy()
    n = out.shape[0]
    drop = rng.random(n) < prob
    side = rng.integers(0, 2, size=n)  # 0 = left block, 1 = right block
    left_rows = drop & (side == 0)
    right_rows = drop & (side == 1)
    out[left_rows, d : 2 * d] = 0.0
    out[right_rows, 2 * d :] = 0.0
    return out[0] if squeeze else out
