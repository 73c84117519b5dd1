"""ROC/AUC, cross-validated method comparison and the timestamp sweep."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .creditmodel import fit_logistic, select_top_k, wald_screen
from .errors import DataError, DegenerateLabels, EmptyWindow, NumericalError
from .mpfeatures import FeatureMatrix

__all__ = [
    "RocCurve",
    "ComparisonReport",
    "SweepPoint",
    "roc_auc",
    "stratified_folds",
    "compare_methods",
    "timestamp_sweep",
    "write_roc_csv",
    "write_sweep_csv",
]


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_auc(scores, labels) -> RocCurve:
    """ROC by a descending-score sweep; tied scores form one diagonal step."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("ROC needs both positive and negative labels")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, np.r_[np.inf, s[ends]], auc)


def stratified_folds(y, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample with each class spread evenly over folds."""
    y = np.asarray(y).astype(int)
    rng = np.random.default_rng(seed)
    assign = np.empty(y.size, dtype=int)
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = (np.arange(idx.size) + offset) % folds
        offset += idx.size
    return assign


@dataclass
class SweepPoint:
    window_start: int
    window_end: int
    metric: float
    per_method: dict = field(default_factory=dict)
    error: str | None = None


@dataclass
class ComparisonReport:
    auc: dict[str, float]
    fold_auc: dict[str, list[float]]
    selected: dict[str, list[list[str]]]
    failures: dict[str, str]
    roc: dict[str, RocCurve] = field(repr=False, default_factory=dict)
    metric: str = "auc"
    sweep: list[SweepPoint] = field(default_factory=list)

    def to_dict(self, dataset: str = "synthetic") -> dict:
        methods = sorted(set(self.auc) | set(self.failures))
        return {
            "metric": self.metric,
            "grid": {m: {dataset: _num(self.auc.get(m, math.nan))} for m in methods},
            "methods": {
                m: {
                    "average": _num(self.auc.get(m, math.nan)),
                    "folds": [_num(v) for v in self.fold_auc.get(m, [])],
                    "selected": self.selected.get(m, []),
                    "failure": self.failures.get(m),
                }
                for m in methods
            },
            "sweep": [
                {
                    "window_start": p.window_start,
                    "window_end": p.window_end,
                    "metric": _num(p.metric),
                    "per_method": {k: _num(v) for k, v in sorted(p.per_method.items())},
                    "error": p.error,
                }
                for p in self.sweep
            ],
        }

    def write_json(self, path, dataset: str = "synthetic") -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(dataset), fh, indent=2)
            fh.write("\n")


def _num(v):
    return None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)


def _labels_for(fm: FeatureMatrix, labels) -> np.ndarray:
    if isinstance(labels, Mapping):
        return np.array([int(bool(labels[i])) for i in fm.row_ids])
    y = np.asarray(labels).astype(int).ravel()
    if y.size != len(fm.row_ids):
        raise ValueError("labels do not match the feature matrix rows")
    return y


def _score(metric, p, y):
    if metric == "accuracy":
        return float(np.mean((p > 0.5) == (y == 1)))
    return roc_auc(p, y).auc


def _evaluate_method(fm, y, fold_of, k, folds, joint, in_sample, metric):
    scores, picks = [], []
    oof = np.full(y.size, np.nan)
    splits = [(np.arange(y.size), np.arange(y.size))] if in_sample else [
        (np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(folds)
    ]
    for train, test in splits:
        ranking = wald_screen(fm, y, rows=train, joint=joint)
        top = select_top_k(ranking, k)
        sub = fm.select(top)
        means = sub.column_means(train)
        x = sub.imputed(means)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit_logistic(x[train], y[train], sub.names)
        p = model.predict_proba(x[test])
        oof[test] = p
        scores.append(_score(metric, p, y[test]))
        picks.append([s.name for s in top])
    return scores, picks, roc_auc(oof, y)


def compare_methods(
    method_feature_sets: Mapping[str, FeatureMatrix],
    labels,
    k: int = 10,
    folds: int = 5,
    seed: int = 0,
    joint: bool = True,
    in_sample: bool = False,
    metric: str = "auc",
) -> ComparisonReport:
    """Held-out score of a top-``k`` Wald-selected logistic model per method.

    Ranking and refitting happen on the training folds only.  Every method
    uses the same stratified folds.  A method that fails to fit is recorded
    in ``failures`` and the others still run.
    """
    if metric not in ("auc", "accuracy"):
        raise ValueError(f"unknown metric {metric!r}")
    names = sorted(method_feature_sets)
    if not names:
        raise ValueError("no methods to compare")
    first = method_feature_sets[names[0]]
    for m in names[1:]:
        if method_feature_sets[m].row_ids != first.row_ids:
            raise ValueError(f"method {m!r} has a different row ordering")
    y = _labels_for(first, labels)
    if y.min() == y.max():
        raise DegenerateLabels("labels contain a single class")
    fold_of = stratified_folds(y, folds, seed)

    report = ComparisonReport({}, {}, {}, {}, {}, metric)
    for m in names:
        try:
            scores, picks, roc = _evaluate_method(
                method_feature_sets[m], y, fold_of, k, folds, joint, in_sample, metric
            )
        except (NumericalError, DataError) as exc:
            report.failures[m] = f"{type(exc).__name__}: {exc}"
            continue
        report.auc[m] = float(np.mean(scores))
        report.fold_auc[m] = scores
        report.selected[m] = picks
        report.roc[m] = roc
    return report


def timestamp_sweep(hin, windows: Sequence[tuple[int, int]], config=None, record_errors: bool = True) -> list[SweepPoint]:
    """Run the full pipeline on each ``as_of`` window.

    The metric of a window is the mean held-out score over the meta-path
    feature methods.
    """
    from .hin import as_of
    from .pipeline import MP_METHODS, PipelineConfig, evaluate

    config = replace(config or PipelineConfig(), as_of=None)
    out = []
    for start, end in windows:
        sub = as_of(hin, start, end)
        try:
            ent = config.root_type
            if not any(sub.nodes[i].risk_label is not None for i in sub.nodes_of_type(ent)):
                raise EmptyWindow(f"no labeled {ent} nodes in window [{start}, {end}]")
            result = evaluate(sub, config, include_baselines=False)
            per = {m: result.report.auc[m] for m in MP_METHODS if m in result.report.auc}
            metric = float(np.mean(list(per.values()))) if per else math.nan
            out.append(SweepPoint(start, end, metric, per))
        except (DataError, NumericalError) as exc:
            if not record_errors:
                raise
            out.append(SweepPoint(start, end, math.nan, {}, f"{type(exc).__name__}: {exc}"))
    return out


def write_roc_csv(roc: RocCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t in zip(roc.fpr, roc.tpr):
            w.writerow([repr(float(f)), repr(float(t))])


def write_sweep_csv(points: Sequence[SweepPoint], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start", "window_end", "metric"])
        for p in points:
            w.writerow([p.window_start, p.window_end, "" if math.isnan(p.metric) else repr(p.metric)])
