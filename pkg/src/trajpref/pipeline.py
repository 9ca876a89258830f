"""Decode and rank orchestration over a session bundle.

Decoding runs chronological k-fold over the comparisons: per fold it
trains the observation classifier (covariance tangent space), the
statement classifier (xDAWN-augmented covariance tangent space), and a
combined meta-classifier stacked on both, then emits out-of-fold verdicts
per source. Button verdicts come straight from behavior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classify import (
    LogisticModel,
    predict_proba,
    train_logistic,
    verdict_from_button,
    verdict_from_combined,
    verdict_from_observation,
    verdict_from_statement,
)
from .errors import DataFormatError, InsufficientDataError
from .evaluation import MetricReport, PreferenceTask, build_report, chrono_kfold, comparison_accuracy
from .rank import (
    ComparisonRecord,
    ComparisonSet,
    Ranking,
    borda,
    borda_conf,
    fit_feature_rank,
    score_feature_rank,
    tpp_baseline,
)
from .signals import (
    artifact_flag,
    augment_statement,
    bandpass,
    extract_observation,
    extract_statement,
    fit_xdawn,
    resample_to,
)
from .spd import SPDMatrix, frechet_mean, ledoit_wolf_cov, tangent_project
from .synth import SessionBundle
from .trajectory import features as trajectory_features

SOURCES = ("observation", "statement", "combined", "button")

VERDICTS_FORMAT = "trajpref-verdicts-v1"

_INNER_FOLDS = 3

# The meta model sees 3 probability features, not a wide tangent expansion,
# so it gets a much lighter penalty than the window classifiers. A heavy one
# keeps its outputs pinned near 0.5 even on cleanly separable stacks.
_META_REG = 1e-3


class CovTangentClassifier:
    """Covariance -> tangent space at the training mean -> logistic model.

    Accepts raw windows (channels x samples arrays) or ready SPD
    covariances. Features are tangent coordinates at the training set's
    Frechet mean, standardized per dimension before the logistic fit.
    """

    def __init__(self, reg_strength: float = 1.0):
        self.reg_strength = reg_strength
        self.mean_: SPDMatrix | None = None
        self.model_: LogisticModel | None = None

    @staticmethod
    def _covs(windows) -> list:
        return [
            w if isinstance(w, SPDMatrix) else ledoit_wolf_cov(np.asarray(w, dtype=float))
            for w in windows
        ]

    def fit(self, windows: Sequence, labels) -> "CovTangentClassifier":
        covs = self._covs(windows)
        y = np.asarray(labels, dtype=float)
        if len(covs) != y.shape[0]:
            raise InsufficientDataError(
                f"{len(covs)} windows for {y.shape[0]} labels"
            )
        self.mean_ = frechet_mean(covs)
        feats = np.stack([tangent_project(c, self.mean_).entries for c in covs])
        mu = feats.mean(axis=0)
        sd = feats.std(axis=0)
        sd[sd == 0.0] = 1.0
        self._mu = mu
        self._sd = sd
        self.model_ = train_logistic(
            (feats - mu) / sd, y, reg_strength=self.reg_strength
        )
        return self

    def predict_proba(self, windows: Sequence) -> np.ndarray:
        if self.model_ is None:
            raise InsufficientDataError("classifier is not fitted")
        covs = self._covs(windows)
        feats = np.stack([tangent_project(c, self.mean_).entries for c in covs])
        return np.atleast_1d(predict_proba(self.model_, (feats - self._mu) / self._sd))


@dataclass
class DecodeResult:
    """Out-of-fold verdict records per source, plus run-level summary."""

    records: dict
    accuracy: dict
    artifact_fraction: float
    folds: int

    def summary_lines(self) -> list:
        lines = [f"{s} accuracy {self.accuracy[s]:.4f}" for s in self.records]
        lines.append(f"artifact fraction {self.artifact_fraction:.4f}")
        return lines


def _statement_label(comp, label_correction: bool) -> int:
    return int(comp.response_correct if label_correction else comp.true_correct)


def _train_scaled_logistic(X: np.ndarray, y: np.ndarray, reg: float) -> LogisticModel:
    """Logistic fit on standardized columns, returned in raw coordinates."""
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0.0] = 1.0
    m = train_logistic((X - mu) / sd, y, reg_strength=reg)
    w = m.weights / sd
    return LogisticModel(
        weights=w,
        bias=m.bias - float(w @ mu),
        reg_strength=reg,
        loss_history=m.loss_history,
    )


def _fit_observation(train_comps, obs_cov, obs_flag, d_of, reg, drop_artifacts):
    keys = []
    for c in train_comps:
        for slot in (1, 2):
            k = (c.j, slot)
            if drop_artifacts and obs_flag[k]:
                continue
            keys.append(k)
    if not keys:
        raise InsufficientDataError("no usable observation training windows")
    dists = np.array([d_of[k] for k in keys])
    med = np.median(dists)
    y = (dists >= med).astype(float)
    return CovTangentClassifier(reg).fit([obs_cov[k] for k in keys], y)


def _fit_statement(train_comps, stmt_windows, stmt_flag, label_correction, reg, drop_artifacts):
    wins = []
    y = []
    for c in train_comps:
        if drop_artifacts and stmt_flag[c.j]:
            continue
        lab = _statement_label(c, label_correction)
        wins.append(
            replace(stmt_windows[c.j], label="correct" if lab else "erroneous")
        )
        y.append(float(lab))
    if not wins:
        raise InsufficientDataError("no usable statement training windows")
    xd = fit_xdawn(wins)
    clf = CovTangentClassifier(reg).fit([augment_statement(w, xd).data for w in wins], y)
    return xd, clf


def _predict_statement(comps, stmt_windows, xd, clf) -> np.ndarray:
    aug = [augment_statement(stmt_windows[c.j], xd).data for c in comps]
    return clf.predict_proba(aug)


def _predict_observation(comps, obs_cov, clf) -> np.ndarray:
    covs = [obs_cov[(c.j, slot)] for c in comps for slot in (1, 2)]
    return clf.predict_proba(covs).reshape(len(comps), 2)


def _meta_rows(comps, p_stmt, p_far) -> np.ndarray:
    rows = np.empty((len(comps), 3))
    for i, c in enumerate(comps):
        named = c.statement_first_slot
        rows[i, 0] = p_stmt[i]
        rows[i, 1] = p_far[i, named - 1]
        rows[i, 2] = p_far[i, 2 - named]
    return rows


def decode_session(
    bundle: SessionBundle,
    folds: int = 5,
    reg_strength: float = 1.0,
    label_correction: bool = True,
    strict_past_only: bool = False,
    band: tuple = (0.5, 40.0),
    drop_artifacts: bool = True,
) -> DecodeResult:
    """Run the full decoding chain over one session.

    Preprocessing: band-pass at the native rate for observation windows;
    band-pass then resample to the statement rate for statement windows.
    Comparisons are split into chronological folds; every verdict is
    produced by models that never saw its comparison. With
    ``label_correction`` the statement training labels follow the button
    response instead of the statement's true correctness.
    """
    cfg = bundle.config
    tasks = bundle.task_map()
    comps = sorted(bundle.comparisons, key=lambda c: c.j)

    obs_windows = {}
    stmt_windows = {}
    for task in bundle.tasks:
        rec = bundle.recordings[task.task_id]
        bp = bandpass(rec, band[0], band[1])
        srec = resample_to(bp, cfg.statement_rate)
        for j in task.comparison_ids:
            obs_windows[(j, 1)] = extract_observation(bp, j, 1)
            obs_windows[(j, 2)] = extract_observation(bp, j, 2)
            stmt_windows[j] = extract_statement(srec, j)

    obs_cov = {k: ledoit_wolf_cov(w.data) for k, w in obs_windows.items()}
    obs_flag = {k: artifact_flag(w) for k, w in obs_windows.items()}
    stmt_flag = {j: artifact_flag(w) for j, w in stmt_windows.items()}
    n_windows = len(obs_flag) + len(stmt_flag)
    n_flagged = sum(obs_flag.values()) + sum(stmt_flag.values())

    d_of = {}
    for c in comps:
        task = tasks[c.task_id]
        d_of[(c.j, 1)] = task.d_target[c.ids[0]]
        d_of[(c.j, 2)] = task.d_target[c.ids[1]]

    records = {s: [] for s in SOURCES}

    def record(c, verdict):
        records[verdict.source].append(
            ComparisonRecord(
                j=c.j,
                task_id=c.task_id,
                ids=c.ids,
                statement_first_slot=c.statement_first_slot,
                verdict=verdict,
            )
        )

    for train_idx, test_idx in chrono_kfold(len(comps), folds, strict_past_only):
        train = [comps[i] for i in train_idx]
        test = [comps[i] for i in test_idx]

        obs_clf = _fit_observation(train, obs_cov, obs_flag, d_of, reg_strength, drop_artifacts)
        xd, stmt_clf = _fit_statement(
            train, stmt_windows, stmt_flag, label_correction, reg_strength, drop_artifacts
        )

        # Meta features must be out-of-fold for the meta training set too,
        # so the combined model is stacked over an inner chronological split.
        if len(train) >= 4 * _INNER_FOLDS:
            meta_rows = []
            meta_y = []
            for itr, ite in chrono_kfold(len(train), _INNER_FOLDS):
                inner_train = [train[i] for i in itr]
                inner_test = [train[i] for i in ite]
                io_clf = _fit_observation(
                    inner_train, obs_cov, obs_flag, d_of, reg_strength, drop_artifacts
                )
                ixd, is_clf = _fit_statement(
                    inner_train, stmt_windows, stmt_flag, label_correction,
                    reg_strength, drop_artifacts,
                )
                p_s = _predict_statement(inner_test, stmt_windows, ixd, is_clf)
                p_f = _predict_observation(inner_test, obs_cov, io_clf)
                meta_rows.append(_meta_rows(inner_test, p_s, p_f))
                meta_y.extend(_statement_label(c, label_correction) for c in inner_test)
            meta_X = np.vstack(meta_rows)
        else:
            p_s = _predict_statement(train, stmt_windows, xd, stmt_clf)
            p_f = _predict_observation(train, obs_cov, obs_clf)
            meta_X = _meta_rows(train, p_s, p_f)
            meta_y = [_statement_label(c, label_correction) for c in train]
        meta = _train_scaled_logistic(meta_X, np.asarray(meta_y, dtype=float), _META_REG)

        p_stmt = _predict_statement(test, stmt_windows, xd, stmt_clf)
        p_far = _predict_observation(test, obs_cov, obs_clf)
        for i, c in enumerate(test):
            record(c, verdict_from_observation(p_far[i, 0], p_far[i, 1], c.j))
            record(c, verdict_from_statement(float(p_stmt[i]), c.statement_first_slot, c.j))
            named = c.statement_first_slot
            record(
                c,
                verdict_from_combined(
                    meta,
                    float(p_stmt[i]),
                    float(p_far[i, named - 1]),
                    float(p_far[i, 2 - named]),
                    named,
                    c.j,
                ),
            )

    covered = {c.j for rec in records["observation"] for c in [rec]}
    for c in comps:
        if strict_past_only and c.j not in covered:
            continue
        record(c, verdict_from_button(c.response_correct, c.statement_first_slot, c.j))

    for source in SOURCES:
        records[source].sort(key=lambda r: r.j)
    accuracy = {s: comparison_accuracy(records[s], tasks) for s in SOURCES}
    return DecodeResult(
        records=records,
        accuracy=accuracy,
        artifact_fraction=n_flagged / n_windows,
        folds=folds,
    )


def verdicts_payload(result: DecodeResult) -> dict:
    verdicts = []
    for source in result.records:
        for rec in result.records[source]:
            verdicts.append(
                {
                    "j": rec.j,
                    "task_id": rec.task_id,
                    "slot1": rec.ids[0],
                    "slot2": rec.ids[1],
                    "statement_first_slot": rec.statement_first_slot,
                    "preferred_slot": rec.verdict.preferred_slot,
                    "probability": rec.verdict.probability,
                    "source": source,
                }
            )
    return {
        "format": VERDICTS_FORMAT,
        "sources": list(result.records),
        "accuracy": {s: result.accuracy[s] for s in result.records},
        "artifact_fraction": result.artifact_fraction,
        "folds": result.folds,
        "verdicts": verdicts,
    }


def load_verdicts(path) -> dict:
    """Read a verdicts file into per-source ComparisonRecord lists."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"missing verdicts file: {path}")
    try:
        with open(path, "r") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != VERDICTS_FORMAT:
        raise DataFormatError(f"{path}: not a verdicts file")
    try:
        from .classify import PairwiseVerdict

        records = {str(s): [] for s in payload["sources"]}
        for row in payload["verdicts"]:
            verdict = PairwiseVerdict(
                comparison=int(row["j"]),
                preferred_slot=int(row["preferred_slot"]),
                probability=float(row["probability"]),
                source=str(row["source"]),
            )
            records[row["source"]].append(
                ComparisonRecord(
                    j=int(row["j"]),
                    task_id=str(row["task_id"]),
                    ids=(str(row["slot1"]), str(row["slot2"])),
                    statement_first_slot=int(row["statement_first_slot"]),
                    verdict=verdict,
                )
            )
    except DataFormatError:
        raise
    except Exception as exc:
        raise DataFormatError(f"{path}: malformed verdicts: {exc}") from exc
    return records


def compute_features(bundle: SessionBundle) -> dict:
    """Feature vectors for every ranked candidate in the bundle."""
    feats = {}
    for task in bundle.tasks:
        scene = bundle.scenes[task.task_id]
        for tid in task.universe:
            feats[tid] = trajectory_features(bundle.trajectories[tid], scene)
    return feats


def rank_session(
    records_by_source: Mapping[str, Sequence[ComparisonRecord]],
    tasks: Mapping[str, PreferenceTask],
    features: Mapping,
    methods: Sequence[str],
    feature_reg: float = 0.1,
    tpp_passes: int = 5,
    ndcg_ks: Sequence[int] = (1, 3),
) -> tuple[dict, MetricReport]:
    """Build every requested ranking and score it.

    Returns the rankings keyed by (task_id, source, method) and the
    aggregated report.
    """
    rankings: dict = {}
    for task_id in sorted(tasks):
        task = tasks[task_id]
        for source, recs in records_by_source.items():
            subset = [r for r in recs if r.task_id == task_id]
            cs = ComparisonSet(universe=task.universe, comparisons=subset)
            for method in methods:
                if method == "borda":
                    ranking = borda(cs)
                elif method == "borda_conf":
                    ranking = borda_conf(cs)
                elif method == "feature":
                    model = fit_feature_rank(cs, features, reg_strength=feature_reg)
                    ranking = score_feature_rank(model, features, task.universe)
                elif method == "tpp":
                    model = tpp_baseline(cs, features, passes=tpp_passes)
                    ranking = score_feature_rank(model, features, task.universe, method="tpp")
                else:
                    from .errors import ParameterError

                    raise ParameterError(f"unknown ranking method {method!r}")
                rankings[(task_id, source, method)] = ranking
    report = build_report(records_by_source, rankings, tasks, methods, ndcg_ks)
    return rankings, report
