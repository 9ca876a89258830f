"""Aggregating pairwise verdicts into trajectory rankings.

Two count-based aggregators (plain and confidence-weighted Borda), a
feature-space reward model fit on preference differences, and a
perceptron-style baseline that applies unconditional updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .classify import PairwiseVerdict, confidence, train_logistic
from .errors import (
    DegenerateTrainingError,
    InputError,
    NumericDomainError,
    ParameterError,
)
from .trajectory import FeatureVector

RANK_METHODS = ("borda", "borda_conf", "feature", "tpp")


@dataclass(frozen=True)
class ComparisonRecord:
    """A verdict tied back to the two trajectory ids it compared.

    ``ids`` lists the slot-1 and slot-2 trajectory ids in that order;
    ``statement_first_slot`` is the slot the statement named as better.
    """

    j: int
    task_id: str
    ids: tuple[str, str]
    statement_first_slot: int
    verdict: PairwiseVerdict

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        if len(self.ids) != 2 or self.ids[0] == self.ids[1]:
            raise InputError(f"comparison {self.j} needs two distinct ids, got {self.ids}")
        if self.statement_first_slot not in (1, 2):
            raise InputError(
                f"statement_first_slot must be 1 or 2, got {self.statement_first_slot}"
            )
        if self.verdict.comparison != self.j:
            raise InputError(
                f"verdict belongs to comparison {self.verdict.comparison}, record is {self.j}"
            )

    @property
    def preferred_id(self) -> str:
        return self.ids[self.verdict.preferred_slot - 1]

    @property
    def rejected_id(self) -> str:
        return self.ids[2 - self.verdict.preferred_slot]


@dataclass
class ComparisonSet:
    """All decoded comparisons over one candidate universe."""

    universe: tuple[str, ...]
    comparisons: list

    def __post_init__(self):
        self.universe = tuple(self.universe)
        self.comparisons = list(self.comparisons)
        if len(set(self.universe)) != len(self.universe):
            raise InputError("universe has duplicate ids")
        known = set(self.universe)
        seen = set()
        for rec in self.comparisons:
            if rec.ids[0] not in known or rec.ids[1] not in known:
                raise InputError(f"comparison {rec.j} references ids outside the universe")
            if rec.j in seen:
                raise InputError(f"duplicate comparison id {rec.j}")
            seen.add(rec.j)


@dataclass(frozen=True)
class Ranking:
    """Scores per trajectory id and the resulting order, best first.

    Ties in score are broken by ascending id, which makes every ranking
    deterministic.
    """

    method: str
    scores: dict
    order: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "scores": {k: float(v) for k, v in self.scores.items()},
            "order": list(self.order),
        }


def _ranking(method: str, scores: Mapping[str, float]) -> Ranking:
    for v in scores.values():
        if not np.isfinite(v):
            raise NumericDomainError(f"non-finite score in {method} ranking")
    order = tuple(sorted(scores, key=lambda i: (-scores[i], i)))
    return Ranking(method=method, scores=dict(scores), order=order)


def borda(comparisons: ComparisonSet) -> Ranking:
    """Borda count: each trajectory scores one point per comparison won."""
    scores = {i: 0.0 for i in comparisons.universe}
    for rec in comparisons.comparisons:
        scores[rec.preferred_id] += 1.0
    return _ranking("borda", scores)


def borda_conf(comparisons: ComparisonSet) -> Ranking:
    """Borda count weighted by verdict confidence.

    Each win contributes ``|p - 0.5|`` instead of 1, so near-indifferent
    verdicts barely move the ranking.
    """
    scores = {i: 0.0 for i in comparisons.universe}
    for rec in comparisons.comparisons:
        scores[rec.preferred_id] += confidence(rec.verdict)
    return _ranking("borda_conf", scores)


@dataclass(frozen=True)
class RewardModel:
    """Linear reward over trajectory features: score = theta . phi."""

    theta: np.ndarray
    layout: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "layout", tuple(self.layout))
        if self.theta.ndim != 1 or self.theta.shape[0] != len(self.layout):
            raise InputError(
                f"theta/layout mismatch: {self.theta.shape} vs {len(self.layout)} names"
            )
        if not np.all(np.isfinite(self.theta)):
            raise NumericDomainError("reward weights are non-finite")

    def score(self, phi: FeatureVector) -> float:
        if phi.layout != self.layout:
            raise InputError("feature layout does not match the reward model")
        return float(self.theta @ phi.values)


def _difference_rows(
    comparisons: ComparisonSet, features: Mapping[str, FeatureVector]
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    missing = [i for i in comparisons.universe if i not in features]
    if missing:
        raise InputError(f"no features for ids {missing}")
    layouts = {features[i].layout for i in comparisons.universe}
    if len(layouts) != 1:
        raise InputError("feature layouts differ across the universe")
    layout = layouts.pop()
    if not comparisons.comparisons:
        raise DegenerateTrainingError("no comparisons to learn from")
    rows = []
    labels = []
    for rec in comparisons.comparisons:
        a, b = rec.ids
        rows.append(features[a].values - features[b].values)
        labels.append(1.0 if rec.preferred_id == a else 0.0)
    return np.array(rows), np.array(labels), layout


def fit_feature_rank(
    comparisons: ComparisonSet,
    features: Mapping[str, FeatureVector],
    reg_strength: float = 0.1,
) -> RewardModel:
    """Learn a linear reward from preference-labeled feature differences.

    Each comparison contributes the row ``phi(slot1) - phi(slot2)`` labeled
    by whether slot 1 won. Rows are mirrored with flipped labels before
    fitting, which forces the bias-free symmetry a preference model needs
    (swapping the pair must flip the prediction) and keeps the fit defined
    when every verdict goes the same way. Columns are scaled to unit spread
    internally; the returned weights are in original feature units.

    Raises
    ------
    DegenerateTrainingError
        If there are no comparisons or all feature differences are zero.
    """
    rows, labels, layout = _difference_rows(comparisons, features)
    if reg_strength < 0.0:
        raise ParameterError(f"reg_strength must be >= 0, got {reg_strength}")
    if np.abs(rows).max() == 0.0:
        raise DegenerateTrainingError("all compared trajectories have identical features")
    # Spread over the mirrored rows: zero-mean by construction, so the rms works.
    scale = np.sqrt((rows ** 2).mean(axis=0))
    scale[scale == 0.0] = 1.0
    scaled = rows / scale
    X = np.vstack([scaled, -scaled])
    y = np.concatenate([labels, 1.0 - labels])
    model = train_logistic(X, y, reg_strength=reg_strength, fit_intercept=False)
    return RewardModel(theta=model.weights / scale, layout=layout)


def score_feature_rank(
    model: RewardModel,
    features: Mapping[str, FeatureVector],
    universe: Sequence[str],
    method: str = "feature",
) -> Ranking:
    """Rank a universe of trajectories by their reward under ``model``.

    ``method`` only names the resulting ranking (the perceptron baseline
    reuses this scorer under its own name).
    """
    universe = tuple(universe)
    if len(set(universe)) != len(universe):
        raise InputError("universe has duplicate ids")
    missing = [i for i in universe if i not in features]
    if missing:
        raise InputError(f"no features for ids {missing}")
    scores = {i: model.score(features[i]) for i in universe}
    return _ranking(method, scores)


def tpp_baseline(
    comparisons: ComparisonSet,
    features: Mapping[str, FeatureVector],
    passes: int = 5,
) -> RewardModel:
    """Preference-perceptron baseline with unconditional updates.

    Sweeps the comparisons in order ``passes`` times, each time adding
    ``phi(winner) - phi(loser)`` to the weights whether or not the current
    weights already rank the pair correctly. Kept as the reference point
    the learned reward is compared against.
    """
    if passes < 0:
        raise ParameterError(f"passes must be >= 0, got {passes}")
    rows, labels, layout = _difference_rows(comparisons, features)
    theta = np.zeros(rows.shape[1])
    signed = np.where(labels[:, None] == 1.0, rows, -rows)
    for _ in range(passes):
        theta += signed.sum(axis=0)
    return RewardModel(theta=theta, layout=layout)
