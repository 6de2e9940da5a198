"""Risk estimators and training objectives for positive-unlabeled batches.

Every estimator is assembled from weighted groups of cross-entropy terms:
a group is (sample indices, target sign, group weight) and contributes
``weight * mean(H(score, target))``. In empirical prior mode the group
weights are within-batch frequencies, which makes each objective equal to a
plain mean cross-entropy over the induced targets; explicit mode plugs in
user-supplied class priors instead. The supervised-risk variant that needs a
known positive prior takes it as an argument and can go negative on finite
samples; it is reported unclipped.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SCORE_CLAMP",
    "Sample",
    "SampleBatch",
    "RiskConfig",
    "cross_entropy",
    "cross_entropy_array",
    "evaluate_terms",
    "terms_gradient",
    "pn_risk",
    "scar_risk",
    "sampling_risk",
    "indicator_risk",
    "exploratory_loss",
    "retrain_loss",
    "recalibrated_loss",
    "pn_terms",
    "scar_terms",
    "sampling_terms",
    "indicator_terms",
    "retrain_terms",
    "recalibrated_terms",
    "nearest_labeled_distance",
]

# Scores are clamped to [SCORE_CLAMP, 1 - SCORE_CLAMP] before taking logs.
SCORE_CLAMP = 1e-12

Scorer = Callable[[np.ndarray], np.ndarray]

# One term group: (indices, target sign, group weight). The group adds
# weight * mean over indices of the cross-entropy against the target.
TermGroup = tuple[np.ndarray, int, float]


@dataclass(frozen=True)
class Sample:
    """A single feature vector with its annotation status.

    ``latent_label`` is the hidden truth (+/-1), visible only to oracle-style
    estimators in simulation; real estimators must not read it.
    """

    features: np.ndarray
    labeled: bool
    latent_label: int | None = None


class SampleBatch:
    """A batch of samples split into labeled positives and unlabeled rest."""

    def __init__(
        self,
        features: np.ndarray,
        labeled: np.ndarray,
        latent: np.ndarray | None = None,
    ):
        self.features = np.asarray(features, dtype=float)
        self.labeled = np.asarray(labeled, dtype=bool)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labeled.shape != (self.features.shape[0],):
            raise ValueError("labeled mask length must match the number of samples")
        if latent is None:
            self.latent = None
        else:
            self.latent = np.asarray(latent, dtype=int)
            if self.latent.shape != self.labeled.shape:
                raise ValueError("latent labels length must match the number of samples")
            if not np.all(np.isin(self.latent, (-1, 1))):
                raise ValueError("latent labels must be +/-1")
            if np.any(self.latent[self.labeled] != 1):
                raise ValueError("labeled samples must have latent label +1")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def unlabeled(self) -> np.ndarray:
        return ~self.labeled

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "SampleBatch":
        feats = np.stack([s.features for s in samples])
        labeled = np.array([s.labeled for s in samples], dtype=bool)
        latents = [s.latent_label for s in samples]
        latent = None
        if all(v is not None for v in latents):
            latent = np.array(latents, dtype=int)
        return cls(feats, labeled, latent)


@dataclass
class RiskConfig:
    """Class priors and thresholds shared by the estimators.

    With ``prior_mode="empirical"`` all priors are derived as within-batch
    frequencies and the explicit fields are ignored.
    """

    prior_mode: str = "empirical"
    pi_pos: float | None = None
    pi_neg: float | None = None
    pi_labeled: float | None = None
    pi_unlabeled: float | None = None
    pi_unlabeled_pos: float | None = None
    pi_unlabeled_neg: float | None = None
    pseudo_threshold: float = 0.9
    separability_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.prior_mode not in ("empirical", "explicit"):
            raise ValueError(f"prior_mode must be empirical or explicit, got {self.prior_mode!r}")

    def explicit(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise ValueError(f"explicit prior mode requires RiskConfig.{name}")
        return float(value)


_DEFAULT = RiskConfig()


def _clamped(scores: np.ndarray) -> np.ndarray:
    return np.clip(scores, SCORE_CLAMP, 1.0 - SCORE_CLAMP)


def cross_entropy(score: float, target: int) -> float:
    """-log(score) for target +1, -log(1 - score) for target -1 (clamped)."""
    return float(cross_entropy_array(np.array([score]), np.array([target]))[0])


def cross_entropy_array(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    scores = _clamped(np.asarray(scores, dtype=float))
    targets = np.asarray(targets)
    return np.where(targets > 0, -np.log(scores), -np.log1p(-scores))


def evaluate_terms(scores: np.ndarray, terms: Sequence[TermGroup]) -> float:
    """Weighted sum over term groups of mean cross-entropies."""
    scores = np.asarray(scores, dtype=float)
    total = 0.0
    for idx, target, weight in terms:
        if len(idx) == 0:
            continue
        total += weight * float(np.mean(cross_entropy_array(scores[idx], np.full(len(idx), target))))
    return total


def terms_gradient(scores: np.ndarray, terms: Sequence[TermGroup]) -> np.ndarray:
    """Gradient of evaluate_terms with respect to the raw scores."""
    scores = np.asarray(scores, dtype=float)
    grad = np.zeros_like(scores)
    clamped = _clamped(scores)
    interior = (scores > SCORE_CLAMP) & (scores < 1.0 - SCORE_CLAMP)
    for idx, target, weight in terms:
        if len(idx) == 0:
            continue
        scale = weight / len(idx)
        if target > 0:
            grad[idx] += scale * np.where(interior[idx], -1.0 / clamped[idx], 0.0)
        else:
            grad[idx] += scale * np.where(interior[idx], 1.0 / (1.0 - clamped[idx]), 0.0)
    return grad


def _group_weight(config: RiskConfig, name: str, count: int, denominator: int) -> float:
    if config.prior_mode == "empirical":
        return count / denominator if denominator else 0.0
    return config.explicit(name)


# -- supervised oracle risk ---------------------------------------------------


def pn_terms(batch: SampleBatch, config: RiskConfig = _DEFAULT) -> list[TermGroup]:
    if batch.latent is None:
        raise ValueError("positive-negative risk needs latent labels (oracle batches only)")
    pos = np.flatnonzero(batch.latent == 1)
    neg = np.flatnonzero(batch.latent == -1)
    if len(pos) == 0 or len(neg) == 0:
        warnings.warn("pn_risk: a class is empty; its term contributes 0", stacklevel=3)
    n = len(batch)
    return [
        (pos, +1, _group_weight(config, "pi_pos", len(pos), n)),
        (neg, -1, _group_weight(config, "pi_neg", len(neg), n)),
    ]


def pn_risk(batch: SampleBatch, scorer: Scorer, config: RiskConfig = _DEFAULT) -> float:
    """Class-prior-weighted mean cross-entropy against the latent labels."""
    return evaluate_terms(scorer(batch.features), pn_terms(batch, config))


# -- risk under the labeled-at-random assumption ------------------------------


def scar_terms(batch: SampleBatch, positive_prior: float) -> list[TermGroup]:
    if not 0.0 <= positive_prior < 1.0:
        raise ValueError(f"positive_prior must be in [0, 1), got {positive_prior!r}")
    labeled = np.flatnonzero(batch.labeled)
    unlabeled = np.flatnonzero(batch.unlabeled)
    if len(labeled) == 0:
        raise ValueError("scar_risk is undefined without labeled samples")
    return [
        (labeled, +1, positive_prior),
        (unlabeled, -1, 1.0),
        (labeled, -1, -positive_prior),
    ]


def scar_risk(batch: SampleBatch, scorer: Scorer, positive_prior: float) -> float:
    """Unbiased risk estimate when labeled positives are a uniform random subset.

    Treats all unlabeled samples as negatives and subtracts the labeled
    samples' negative-target term scaled by the positive prior. May be
    negative on finite samples; returned unclipped.
    """
    return evaluate_terms(scorer(batch.features), scar_terms(batch, positive_prior))


# -- distance-gated sampling risk ---------------------------------------------


def nearest_labeled_distance(unlabeled_features: np.ndarray, labeled_features: np.ndarray) -> np.ndarray:
    """Euclidean distance from each unlabeled sample to its nearest labeled one."""
    u = np.asarray(unlabeled_features, dtype=float)
    l = np.asarray(labeled_features, dtype=float)
    if len(l) == 0:
        return np.full(len(u), np.inf)
    diff = u[:, None, :] - l[None, :, :]
    return np.sqrt((diff**2).sum(axis=2)).min(axis=1)


def sampling_terms(
    batch: SampleBatch,
    distances: np.ndarray,
    distance_cutoff: float,
    config: RiskConfig = _DEFAULT,
) -> list[TermGroup]:
    labeled = np.flatnonzero(batch.labeled)
    unlabeled = np.flatnonzero(batch.unlabeled)
    distances = np.asarray(distances, dtype=float)
    if distances.shape != (len(unlabeled),):
        raise ValueError("distances must have one value per unlabeled sample")
    near = unlabeled[distances < distance_cutoff]
    denominator = len(labeled) + len(near)
    return [
        (labeled, +1, _group_weight(config, "pi_labeled", len(labeled), denominator)),
        (near, -1, _group_weight(config, "pi_unlabeled_neg", len(near), denominator)),
    ]


def sampling_risk(
    batch: SampleBatch,
    scorer: Scorer,
    distance_cutoff: float,
    distance_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] = nearest_labeled_distance,
    config: RiskConfig = _DEFAULT,
) -> float:
    """Labeled positives plus near-to-labeled unlabeled negatives only.

    Unlabeled samples at distance >= cutoff from every labeled sample are
    excluded from the objective entirely.
    """
    distances = distance_fn(batch.features[batch.unlabeled], batch.features[batch.labeled])
    return evaluate_terms(scorer(batch.features), sampling_terms(batch, distances, distance_cutoff, config))


# -- indicator-gated risks (pseudo-labeling family) ----------------------------


def indicator_terms(
    batch: SampleBatch,
    indicator_values: np.ndarray,
    threshold: float,
    config: RiskConfig = _DEFAULT,
) -> list[TermGroup]:
    """Split unlabeled samples on an indicator value and weight three groups."""
    labeled = np.flatnonzero(batch.labeled)
    unlabeled = np.flatnonzero(batch.unlabeled)
    indicator_values = np.asarray(indicator_values, dtype=float)
    if indicator_values.shape != (len(unlabeled),):
        raise ValueError("indicator values must have one value per unlabeled sample")
    flipped = unlabeled[indicator_values >= threshold]
    kept = unlabeled[indicator_values < threshold]
    n = len(batch)
    return [
        (labeled, +1, _group_weight(config, "pi_labeled", len(labeled), n)),
        (flipped, +1, _group_weight(config, "pi_unlabeled_pos", len(flipped), n)),
        (kept, -1, _group_weight(config, "pi_unlabeled_neg", len(kept), n)),
    ]


def indicator_risk(
    batch: SampleBatch,
    scorer: Scorer,
    indicator: Scorer,
    threshold: float,
    config: RiskConfig = _DEFAULT,
) -> float:
    """Risk with unlabeled samples assigned by a separability indicator."""
    values = indicator(batch.features[batch.unlabeled])
    return evaluate_terms(scorer(batch.features), indicator_terms(batch, values, threshold, config))


def exploratory_loss(
    batch: SampleBatch,
    student: Scorer,
    teacher: Scorer,
    pseudo_threshold: float = 0.9,
    config: RiskConfig = _DEFAULT,
) -> float:
    """Student cross-entropy with teacher-above-threshold unlabeled samples as positives.

    Teacher scores act as constants: no gradient flows through them.
    """
    if not 0.0 < pseudo_threshold <= 1.0:
        raise ValueError(f"pseudo_threshold must be in (0, 1], got {pseudo_threshold!r}")
    return indicator_risk(batch, student, teacher, pseudo_threshold, config)


def retrain_terms(
    batch: SampleBatch,
    selected: np.ndarray,
    strategy: str = "adding",
    config: RiskConfig = _DEFAULT,
) -> list[TermGroup]:
    selected = _as_mask(selected, len(batch))
    if np.any(selected & batch.labeled):
        raise ValueError("selected pseudo-positives must be unlabeled samples")
    labeled = np.flatnonzero(batch.labeled)
    chosen = np.flatnonzero(selected)
    rest = np.flatnonzero(batch.unlabeled & ~selected)
    if strategy == "adding":
        n = len(batch)
        return [
            (labeled, +1, _group_weight(config, "pi_labeled", len(labeled), n)),
            (chosen, +1, _group_weight(config, "pi_unlabeled_pos", len(chosen), n)),
            (rest, -1, _group_weight(config, "pi_unlabeled_neg", len(rest), n)),
        ]
    if strategy == "ignoring":
        n = len(batch) - len(chosen)
        return [
            (labeled, +1, _group_weight(config, "pi_labeled", len(labeled), n)),
            (rest, -1, _group_weight(config, "pi_unlabeled_neg", len(rest), n)),
        ]
    raise ValueError(f"strategy must be 'adding' or 'ignoring', got {strategy!r}")


def retrain_loss(
    batch: SampleBatch,
    scorer: Scorer,
    selected: np.ndarray,
    strategy: str = "adding",
    config: RiskConfig = _DEFAULT,
) -> float:
    """Loss over original labels plus bank-selected pseudo-positives.

    ``adding`` trains the selected samples as positives; ``ignoring``
    excludes them from the loss entirely.
    """
    return evaluate_terms(scorer(batch.features), retrain_terms(batch, selected, strategy, config))


def recalibrated_terms(
    batch: SampleBatch,
    scores: np.ndarray,
    flip_threshold: float = 0.95,
    config: RiskConfig = _DEFAULT,
) -> list[TermGroup]:
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (len(batch),):
        raise ValueError("scores must have one value per sample")
    labeled = np.flatnonzero(batch.labeled)
    # Flip when the negative-target loss exceeds the loss at the threshold
    # score; for cross-entropy that is exactly score > flip_threshold.
    neg_loss = cross_entropy_array(scores, np.full(len(batch), -1))
    limit = cross_entropy(flip_threshold, -1)
    flip = batch.unlabeled & (neg_loss > limit)
    flipped = np.flatnonzero(flip)
    kept = np.flatnonzero(batch.unlabeled & ~flip)
    n = len(batch)
    return [
        (labeled, +1, _group_weight(config, "pi_labeled", len(labeled), n)),
        (flipped, +1, _group_weight(config, "pi_unlabeled_pos", len(flipped), n)),
        (kept, -1, _group_weight(config, "pi_unlabeled_neg", len(kept), n)),
    ]


def recalibrated_loss(
    batch: SampleBatch,
    scorer: Scorer,
    flip_threshold: float = 0.95,
    config: RiskConfig = _DEFAULT,
) -> float:
    """Loss-recalibration baseline: oversized background losses flip to foreground."""
    if not 0.0 < flip_threshold < 1.0:
        raise ValueError(f"flip_threshold must be in (0, 1), got {flip_threshold!r}")
    scores = scorer(batch.features)
    return evaluate_terms(scores, recalibrated_terms(batch, scores, flip_threshold, config))


def _as_mask(selected: np.ndarray, n: int) -> np.ndarray:
    selected = np.asarray(selected)
    if selected.dtype == bool:
        if selected.shape != (n,):
            raise ValueError("selected mask length must match the batch")
        return selected
    mask = np.zeros(n, dtype=bool)
    mask[selected.astype(int)] = True
    return mask
