"""Ground-truth tasks, ranking metrics, and chronological cross-validation.

A preference task fixes the candidate universe and each candidate's true
distance to the target trajectory; metrics compare decoded verdicts and
rankings against those distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError, ParameterError, UndefinedMetricError
from .rank import ComparisonRecord, Ranking


@dataclass(frozen=True)
class PreferenceTask:
    """One target trajectory and the candidates compared against it.

    ``d_target`` maps every candidate id to its true distance from the
    target; smaller is better. ``comparison_ids`` are the global ids of
    the comparisons belonging to this task, in chronological order.
    """

    task_id: str
    target_id: str
    universe: tuple[str, ...]
    comparison_ids: tuple[int, ...]
    d_target: dict

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "comparison_ids", tuple(int(j) for j in self.comparison_ids))
        object.__setattr__(self, "d_target", {str(k): float(v) for k, v in self.d_target.items()})
        if len(set(self.universe)) != len(self.universe):
            raise InputError(f"task {self.task_id!r} has duplicate candidates")
        missing = [i for i in self.universe if i not in self.d_target]
        if missing:
            raise InputError(f"task {self.task_id!r} lacks distances for {missing}")
        for i, v in self.d_target.items():
            if not np.isfinite(v) or v < 0.0:
                raise InputError(f"task {self.task_id!r}: d_target[{i!r}] = {v!r} invalid")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "target_id": self.target_id,
            "universe": list(self.universe),
            "comparison_ids": list(self.comparison_ids),
            "d_target": {k: float(self.d_target[k]) for k in sorted(self.d_target)},
        }

    @classmethod
    def from_dict(cls, d) -> "PreferenceTask":
        return cls(
            task_id=str(d["task_id"]),
            target_id=str(d["target_id"]),
            universe=tuple(d["universe"]),
            comparison_ids=tuple(d["comparison_ids"]),
            d_target=dict(d["d_target"]),
        )


def comparison_accuracy(
    records: Iterable[ComparisonRecord], tasks: Mapping[str, "PreferenceTask"]
) -> float:
    """Fraction of verdicts whose preferred trajectory is truly closer.

    The true winner of a comparison is the id with the smaller distance to
    the target; comparisons whose two distances are exactly equal have no
    winner and are excluded from the denominator.

    Raises
    ------
    UndefinedMetricError
        If every comparison is excluded (or none were given).
    """
    hits = 0
    total = 0
    for rec in records:
        if rec.task_id not in tasks:
            raise InputError(f"comparison {rec.j} references unknown task {rec.task_id!r}")
        d = tasks[rec.task_id].d_target
        a, b = rec.ids
        if a not in d or b not in d:
            raise InputError(f"comparison {rec.j} references ids without distances")
        if d[a] == d[b]:
            continue
        truth = a if d[a] < d[b] else b
        total += 1
        hits += int(rec.preferred_id == truth)
    if total == 0:
        raise UndefinedMetricError("no comparisons with a defined true winner")
    return hits / total


def delta_d(ranking: Ranking, task: PreferenceTask) -> float:
    """Excess distance of the top-ranked candidate over the best available.

    Zero exactly when the ranking puts a minimum-distance candidate first;
    always >= 0.
    """
    if not ranking.order:
        raise UndefinedMetricError("empty ranking")
    missing = [i for i in ranking.order if i not in task.d_target]
    if missing:
        raise InputError(f"ranking contains ids without distances: {missing}")
    best = min(task.d_target[i] for i in ranking.order)
    return task.d_target[ranking.order[0]] - best


def ndcg_at_k(ranking: Ranking, task: PreferenceTask, k: int) -> float:
    """Normalized discounted cumulative gain at cutoff ``k``.

    Relevance of a candidate is ``max_d - d`` over the ranked universe, so
    the farthest candidate has relevance zero. Discounts are
    ``1 / log2(position + 1)``. When the ideal DCG is zero (all candidates
    equally far) the value is defined as 1. ``k`` is clipped to the
    universe size.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if not ranking.order:
        raise UndefinedMetricError("empty ranking")
    missing = [i for i in ranking.order if i not in task.d_target]
    if missing:
        raise InputError(f"ranking contains ids without distances: {missing}")
    k = min(k, len(ranking.order))
    dmax = max(task.d_target[i] for i in ranking.order)
    rel = {i: dmax - task.d_target[i] for i in ranking.order}
    discounts = 1.0 / np.log2(np.arange(1, k + 1) + 1.0)
    dcg = float(sum(rel[i] * w for i, w in zip(ranking.order[:k], discounts)))
    ideal = sorted(rel.values(), reverse=True)[:k]
    idcg = float(sum(r * w for r, w in zip(ideal, discounts)))
    if idcg == 0.0:
        return 1.0
    return dcg / idcg


def chrono_kfold(
    n_items: int, k: int, strict_past_only: bool = False
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Chronological k-fold split over ``n_items`` ordered items.

    Items are cut into ``k`` contiguous blocks (sizes differ by at most
    one, earlier blocks take the remainder). Each block is a test fold in
    turn. By default the training set is everything outside the block;
    with ``strict_past_only`` the training set is only the items before the
    block, and the first block is skipped because it has no past.

    Returns
    -------
    list of (train_indices, test_indices) pairs, in block order.
    """
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    if n_items < k:
        raise ParameterError(f"cannot split {n_items} items into {k} folds")
    blocks = np.array_split(np.arange(n_items), k)
    folds = []
    for bi, block in enumerate(blocks):
        if strict_past_only:
            if bi == 0:
                continue
            train = np.arange(block[0])
        else:
            train = np.concatenate(
                [np.arange(block[0]), np.arange(block[-1] + 1, n_items)]
            )
        folds.append((train, block))
    return folds


@dataclass(frozen=True)
class TaskMetrics:
    """Metrics of one (task, source, method) ranking."""

    task_id: str
    source: str
    method: str
    delta_d: float
    ndcg: dict

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "source": self.source,
            "method": self.method,
            "delta_d_target": float(self.delta_d),
            "ndcg": {str(k): float(v) for k, v in sorted(self.ndcg.items())},
        }


@dataclass
class MetricReport:
    """Aggregated evaluation over all tasks.

    ``accuracy`` maps each verdict source to its comparison accuracy over
    all out-of-fold verdicts; ``table`` maps method -> source -> mean
    metric values; ``per_task`` keeps the unaggregated rows.
    """

    sources: tuple[str, ...]
    methods: tuple[str, ...]
    ndcg_ks: tuple[int, ...]
    accuracy: dict
    per_task: list

    def mean_table(self) -> dict:
        table: dict = {}
        for method in self.methods:
            table[method] = {}
            for source in self.sources:
                rows = [
                    r for r in self.per_task if r.method == method and r.source == source
                ]
                if not rows:
                    continue
                entry = {
                    "delta_d_target": float(np.mean([r.delta_d for r in rows])),
                }
                for k in self.ndcg_ks:
                    entry[f"ndcg@{k}"] = float(np.mean([r.ndcg[k] for r in rows]))
                table[method][source] = entry
        return table

    def to_dict(self) -> dict:
        return {
            "sources": list(self.sources),
            "methods": list(self.methods),
            "ndcg_ks": list(self.ndcg_ks),
            "comparison_accuracy": {s: float(self.accuracy[s]) for s in self.sources},
            "table": self.mean_table(),
            "per_task": [r.to_dict() for r in self.per_task],
        }

    @classmethod
    def from_dict(cls, d) -> "MetricReport":
        try:
            per_task = [
                TaskMetrics(
                    task_id=str(r["task_id"]),
                    source=str(r["source"]),
                    method=str(r["method"]),
                    delta_d=float(r["delta_d_target"]),
                    ndcg={int(k): float(v) for k, v in r["ndcg"].items()},
                )
                for r in d["per_task"]
            ]
            return cls(
                sources=tuple(d["sources"]),
                methods=tuple(d["methods"]),
                ndcg_ks=tuple(int(k) for k in d["ndcg_ks"]),
                accuracy={str(k): float(v) for k, v in d["comparison_accuracy"].items()},
                per_task=per_task,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed report payload: {exc}") from exc


def build_report(
    records_by_source: Mapping[str, Sequence[ComparisonRecord]],
    rankings: Mapping[tuple, Ranking],
    tasks: Mapping[str, PreferenceTask],
    methods: Sequence[str],
    ndcg_ks: Sequence[int] = (1, 3),
) -> MetricReport:
    """Score every (task, source, method) ranking and fold in accuracies.

    ``rankings`` is keyed by (task_id, source, method). Sources and methods
    are reported in the order given; tasks in sorted id order.
    """
    sources = tuple(records_by_source)
    methods = tuple(methods)
    ndcg_ks = tuple(int(k) for k in ndcg_ks)
    accuracy = {
        s: comparison_accuracy(records_by_source[s], tasks) for s in sources
    }
    per_task = []
    for task_id in sorted(tasks):
        task = tasks[task_id]
        for source in sources:
            for method in methods:
                key = (task_id, source, method)
                if key not in rankings:
                    raise InputError(f"missing ranking for {key}")
                ranking = rankings[key]
                per_task.append(
                    TaskMetrics(
                        task_id=task_id,
                        source=source,
                        method=method,
                        delta_d=delta_d(ranking, task),
                        ndcg={k: ndcg_at_k(ranking, task, k) for k in ndcg_ks},
                    )
                )
    return MetricReport(
        sources=sources,
        methods=methods,
        ndcg_ks=ndcg_ks,
        accuracy=accuracy,
        per_task=per_task,
    )


def format_report(report: MetricReport) -> str:
    """Fixed-width text table of the aggregated report."""
    lines = ["comparison accuracy"]
    for s in report.sources:
        lines.append(f"  {s:<12} {report.accuracy[s]:.4f}")
    lines.append("")
    metric_names = ["delta_d_target"] + [f"ndcg@{k}" for k in report.ndcg_ks]
    table = report.mean_table()
    header = f"{'method':<12} {'source':<12}" + "".join(
        f" {m:>15}" for m in metric_names
    )
    lines.append(header)
    lines.append("-" * len(header))
    for method in report.methods:
        for source in report.sources:
            entry = table.get(method, {}).get(source)
            if entry is None:
                continue
            cells = "".join(f" {entry[m]:>15.4f}" for m in metric_names)
            lines.append(f"{method:<12} {source:<12}{cells}")
    return "\n".join(lines) + "\n"


def per_task_csv(report: MetricReport) -> str:
    """Per-task metrics as CSV text, one row per (task, source, method)."""
    ks = report.ndcg_ks
    header = ["task_id", "source", "method", "delta_d_target"] + [f"ndcg@{k}" for k in ks]
    rows = [",".join(header)]
    for r in report.per_task:
        cells = [r.task_id, r.source, r.method, f"{r.delta_d:.6f}"]
        cells += [f"{r.ndcg[k]:.6f}" for k in ks]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"
