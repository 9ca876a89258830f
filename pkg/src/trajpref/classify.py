"""Binary logistic classification and pairwise preference verdicts.

The trainer is plain full-batch gradient descent with a backtracking line
search on the L2-regularized logistic loss; no solver dependency, and the
loss trace is kept so monotone descent can be checked. Verdict builders
turn classifier outputs for one comparison into a preferred slot with an
attached probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import DegenerateTrainingError, InputError, NumericDomainError, ParameterError

VERDICT_SOURCES = ("observation", "statement", "combined", "button")

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60


@dataclass
class LogisticModel:
    """Fitted logistic regression: P(y=1 | x) = sigmoid(w.x + b)."""

    weights: np.ndarray
    bias: float
    reg_strength: float
    loss_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1:
            raise InputError(f"weights must be 1-d, got shape {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise NumericDomainError("model parameters are non-finite")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "reg_strength": float(self.reg_strength),
        }

    @classmethod
    def from_dict(cls, d) -> "LogisticModel":
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            bias=float(d["bias"]),
            reg_strength=float(d["reg_strength"]),
        )


def _loss_grad(X, y, w, b, reg, fit_intercept):
    z = X @ w + b
    # log(1 + exp(z)) - y * z, written stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * reg * float(w @ w)
    p = expit(z)
    resid = (p - y) / X.shape[0]
    gw = X.T @ resid + reg * w
    gb = float(resid.sum()) if fit_intercept else 0.0
    return loss, gw, gb


def train_logistic(
    X,
    y,
    reg_strength: float = 1.0,
    fit_intercept: bool = True,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> LogisticModel:
    """Fit L2-regularized logistic regression by gradient descent.

    Minimizes ``mean_i log(1 + exp(-s_i (w.x_i + b))) + reg/2 ||w||^2``
    (bias unpenalized) with full-batch steps and an Armijo backtracking
    line search, so every recorded loss is no larger than the previous one.
    Stops when the gradient norm falls below ``tol`` or after ``max_iter``
    steps, whichever comes first.

    Parameters
    ----------
    X : ndarray, shape (n, d)
    y : array-like of 0/1 labels, shape (n,)
    reg_strength : float
        L2 penalty weight; must be >= 0.
    fit_intercept : bool
        When False the bias is fixed at zero.

    Raises
    ------
    DegenerateTrainingError
        If only one class is present.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise InputError(f"bad training shapes: X {X.shape}, y {y.shape}")
    if X.shape[0] == 0:
        raise DegenerateTrainingError("empty training set")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise NumericDomainError("training data has non-finite entries")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise InputError("labels must be 0 or 1")
    if reg_strength < 0.0:
        raise ParameterError(f"reg_strength must be >= 0, got {reg_strength}")
    if y.min() == y.max():
        raise DegenerateTrainingError("training labels contain a single class")

    w = np.zeros(X.shape[1])
    b = 0.0
    step = 1.0
    loss, gw, gb = _loss_grad(X, y, w, b, reg_strength, fit_intercept)
    history = [loss]
    for _ in range(max_iter):
        gnorm_sq = float(gw @ gw) + gb * gb
        if np.sqrt(gnorm_sq) < tol:
            break
        step = min(step * 2.0, 1e4)
        for _bt in range(MAX_BACKTRACKS):
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new, gw_new, gb_new = _loss_grad(
                X, y, w_new, b_new, reg_strength, fit_intercept
            )
            if loss_new <= loss - ARMIJO_C * step * gnorm_sq:
                break
            step *= 0.5
        else:
            # No acceptable step at machine precision: already at the optimum.
            break
        w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
        history.append(loss)

    return LogisticModel(weights=w, bias=b, reg_strength=reg_strength, loss_history=history)


def predict_proba(model: LogisticModel, x) -> np.ndarray | float:
    """P(y=1 | x). A single vector gives a float, a matrix one value per row."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != model.feature_dim:
            raise InputError(f"x has {x.shape[0]} features, model expects {model.feature_dim}")
        return float(expit(x @ model.weights + model.bias))
    if x.ndim == 2:
        if x.shape[1] != model.feature_dim:
            raise InputError(f"x has {x.shape[1]} features, model expects {model.feature_dim}")
        return expit(x @ model.weights + model.bias)
    raise InputError(f"x must be 1-d or 2-d, got shape {x.shape}")


@dataclass(frozen=True)
class PairwiseVerdict:
    """One decoded preference for a comparison.

    ``probability`` is the confidence-bearing output of the source:
    P(slot 1 preferred) for observation verdicts, P(statement correct) for
    statement, combined and button verdicts. ``preferred_slot`` is the slot
    the source picks, ties resolved toward slot 1 (observation) or the
    statement's first-named slot (others).
    """

    comparison: int
    preferred_slot: int
    probability: float
    source: str

    def __post_init__(self):
        if self.source not in VERDICT_SOURCES:
            raise InputError(f"unknown verdict source {self.source!r}")
        if self.preferred_slot not in (1, 2):
            raise InputError(f"preferred_slot must be 1 or 2, got {self.preferred_slot}")
        if not (0.0 <= self.probability <= 1.0):
            raise NumericDomainError(f"probability {self.probability!r} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "comparison": int(self.comparison),
            "preferred_slot": int(self.preferred_slot),
            "probability": float(self.probability),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d) -> "PairwiseVerdict":
        return cls(
            comparison=int(d["comparison"]),
            preferred_slot=int(d["preferred_slot"]),
            probability=float(d["probability"]),
            source=str(d["source"]),
        )


def confidence(verdict: PairwiseVerdict) -> float:
    """Distance of the verdict probability from indifference at 0.5."""
    return abs(verdict.probability - 0.5)


def verdict_from_observation(p1_far: float, p2_far: float, comparison: int) -> PairwiseVerdict:
    """Fuse the two per-execution far-probabilities into one verdict.

    The probability that slot 1 is preferred treats the two outputs as
    independent evidence:

    ``p = p2 (1 - p1) / (p2 (1 - p1) + p1 (1 - p2))``

    and is 0.5 when both terms vanish (both outputs fully certain in the
    same direction). The preferred slot is the one with the smaller
    far-probability, slot 1 on a tie.
    """
    for name, v in (("p1_far", p1_far), ("p2_far", p2_far)):
        if not (0.0 <= v <= 1.0):
            raise NumericDomainError(f"{name} = {v!r} outside [0, 1]")
    num = p2_far * (1.0 - p1_far)
    den = num + p1_far * (1.0 - p2_far)
    prob = 0.5 if den == 0.0 else num / den
    preferred = 2 if p2_far < p1_far else 1
    return PairwiseVerdict(comparison, preferred, float(prob), "observation")


def verdict_from_statement(
    p_correct: float,
    statement_first_slot: int,
    comparison: int,
    source: str = "statement",
) -> PairwiseVerdict:
    """Turn P(statement correct) into a slot preference.

    The statement names one trajectory as the better one (its slot is
    ``statement_first_slot``); probability above 0.5 backs that slot,
    below 0.5 the other, exactly 0.5 defaults to the named slot.
    """
    if statement_first_slot not in (1, 2):
        raise InputError(f"statement_first_slot must be 1 or 2, got {statement_first_slot}")
    if not (0.0 <= p_correct <= 1.0):
        raise NumericDomainError(f"p_correct = {p_correct!r} outside [0, 1]")
    if source not in ("statement", "combined", "button"):
        raise InputError(f"source {source!r} is not statement-shaped")
    other = 3 - statement_first_slot
    preferred = statement_first_slot if p_correct >= 0.5 else other
    return PairwiseVerdict(comparison, preferred, float(p_correct), source)


def verdict_from_button(
    response_correct: bool, statement_first_slot: int, comparison: int
) -> PairwiseVerdict:
    """Behavioral verdict: the button answer taken at face value.

    Probability is exactly 0 or 1, so every button verdict carries the
    same confidence of 0.5.
    """
    return verdict_from_statement(
        1.0 if response_correct else 0.0, statement_first_slot, comparison, source="button"
    )


def verdict_from_combined(
    meta: LogisticModel,
    p_statement: float,
    p_obs_named: float,
    p_obs_other: float,
    statement_first_slot: int,
    comparison: int,
) -> PairwiseVerdict:
    """Meta-classifier fusion of statement and observation outputs.

    Inputs are ordered: statement correctness probability, then the
    far-probability of the statement's named-better execution, then the
    other execution's. The meta model outputs P(statement correct), which
    maps to a slot like a statement verdict.
    """
    if meta.feature_dim != 3:
        raise InputError(f"combined meta model must take 3 features, has {meta.feature_dim}")
    p = predict_proba(meta, np.array([p_statement, p_obs_named, p_obs_other]))
    return verdict_from_statement(
        float(p), statement_first_slot, comparison, source="combined"
    )
