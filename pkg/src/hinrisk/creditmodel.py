"""Logistic default model, Wald tests and significance ranking.

The model is fitted by damped Newton iterations on the Bernoulli
log-likelihood over z-scored columns.  Coefficients and standard errors
are reported on the original feature scale.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.special import erfc, expit

from .errors import DegenerateLabels, SeparationDetected, SingularInformation
from .mpfeatures import FeatureMatrix

__all__ = [
    "STAR_LEVELS",
    "FittedModel",
    "RankedFeature",
    "FeatureRanking",
    "log_likelihood",
    "score",
    "information",
    "fit_logistic",
    "chi2_sf",
    "significance_stars",
    "wald_rank",
    "wald_screen",
    "select_top_k",
    "model_report",
    "write_model_report",
    "write_ranking_csv",
]

STAR_LEVELS = ((0.001, "****"), (0.01, "***"), (0.05, "**"), (0.1, "*"))
P_FLOOR = 1e-300
MAX_COEF_NORM = 1e4
RIDGE = 1e-8
LL_RESOLUTION = 1e-12


def significance_stars(p: float) -> str:
    for cut, mark in STAR_LEVELS:
        if p < cut:
            return mark
    return ""


def chi2_sf(stat):
    """Upper tail of chi-square(1): ``erfc(sqrt(stat / 2))``.

    Returns ``(p, clamped)``; tails below 1e-300 are clamped to 1e-300.
    """
    stat = np.asarray(stat, dtype=float)
    p = erfc(np.sqrt(np.maximum(stat, 0.0) / 2.0))
    clamped = p < P_FLOOR
    p = np.where(clamped, P_FLOOR, np.minimum(p, 1.0))
    if p.ndim == 0:
        return float(p), bool(clamped)
    return p, clamped


def _design(z):
    return np.hstack([np.ones((z.shape[0], 1)), z])


def log_likelihood(beta, design, y) -> float:
    eta = design @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(beta, design, y) -> np.ndarray:
    """Gradient of :func:`log_likelihood` with respect to ``beta``."""
    return design.T @ (y - expit(design @ beta))


def information(beta, design) -> np.ndarray:
    p = expit(design @ beta)
    w = p * (1.0 - p)
    return design.T @ (design * w[:, None])


def _solve(h, g):
    try:
        c = linalg.cho_factor(h)
        return linalg.cho_solve(c, g), c
    except linalg.LinAlgError:
        pass
    scale = max(1.0, float(np.max(np.abs(np.diag(h)))))
    hj = h + RIDGE * scale * np.eye(h.shape[0])
    try:
        c = linalg.cho_factor(hj)
        return linalg.cho_solve(c, g), c
    except linalg.LinAlgError:
        raise SingularInformation("information matrix is singular even after ridge jitter") from None


@dataclass(frozen=True)
class FittedModel:
    """A fitted logistic model.

    Arrays indexed by coefficient put the intercept at position 0; feature
    ``names[j]`` sits at position ``j + 1``.
    """

    names: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    wald: np.ndarray
    p_values: np.ndarray
    stars: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray
    coef_std: np.ndarray = field(repr=False)
    cov_std: np.ndarray = field(repr=False)
    dropped: tuple[int, ...] = ()
    p_clamped: tuple[bool, ...] = ()
    iterations: int = 0
    grad_norm: float = math.nan
    converged: bool = False
    separation: bool = False
    loglik_trace: tuple[float, ...] = field(default=(), repr=False)

    def linear_predictor(self, x) -> np.ndarray:
        x = _as_array(x)
        return self.coef[0] + x @ self.coef[1:]

    def predict_proba(self, x) -> np.ndarray:
        return expit(self.linear_predictor(x))

    def standardized_design(self, x) -> np.ndarray:
        x = _as_array(x)
        keep = [j for j in range(x.shape[1]) if j not in self.dropped]
        return _design((x[:, keep] - self.mean[keep]) / self.scale[keep])


def _as_array(x):
    if isinstance(x, FeatureMatrix):
        return x.imputed()
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def fit_logistic(
    X,
    y,
    names: Sequence[str] | None = None,
    standardize: bool = True,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> FittedModel:
    """Maximum-likelihood logistic regression with an intercept.

    ``X`` is an (n, k) array or a :class:`FeatureMatrix` (undefined cells
    take the column mean).  Zero-variance columns are dropped and reported
    with p = 1.
    """
    if names is None and isinstance(X, FeatureMatrix):
        names = X.names
    x = _as_array(X)
    y = np.asarray(y, dtype=float).ravel()
    n, k = x.shape
    if y.shape[0] != n:
        raise ValueError(f"{n} rows but {y.shape[0]} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise DegenerateLabels("labels contain a single class")
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(k))

    mean = x.mean(axis=0) if standardize else np.zeros(k)
    sd = x.std(axis=0) if standardize else np.ones(k)
    dropped = tuple(int(j) for j in np.flatnonzero(np.ptp(x, axis=0) == 0)) if k else ()
    if dropped:
        warnings.warn(f"dropping zero-variance columns {[names[j] for j in dropped]}", stacklevel=2)
    keep = [j for j in range(k) if j not in dropped]
    sd_safe = np.where(sd > 0, sd, 1.0)
    design = _design((x[:, keep] - mean[keep]) / sd_safe[keep])

    beta = np.zeros(design.shape[1])
    ll = log_likelihood(beta, design, y)
    trace = [ll]
    converged = False
    it = 0
    g = score(beta, design, y)
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= tol:
            converged = True
            it -= 1
            break
        h = information(beta, design)
        step, _ = _solve(h, g)
        t = 1.0
        g_inf = np.max(np.abs(g))
        while True:
            cand = beta + t * step
            ll_new = log_likelihood(cand, design, y)
            if ll_new >= ll:
                break
            # below the resolution of the log-likelihood sum, judge by the gradient
            if ll - ll_new <= LL_RESOLUTION * max(1.0, abs(ll)) and np.max(np.abs(score(cand, design, y))) < g_inf:
                break
            t *= 0.5
            if t < 1e-12:
                cand, ll_new = beta, ll
                break
        moved = not np.array_equal(cand, beta)
        beta, ll = cand, ll_new
        trace.append(ll)
        if np.linalg.norm(beta) > MAX_COEF_NORM:
            raise SeparationDetected(f"coefficient norm exceeded {MAX_COEF_NORM:g}")
        g = score(beta, design, y)
        if not moved:
            converged = np.max(np.abs(g)) <= tol
            break
    else:
        converged = np.max(np.abs(g)) <= tol

    fitted = expit(design @ beta)
    if np.all(np.abs(fitted - y) < 1e-6):
        raise SeparationDetected("fitted probabilities reproduce the labels exactly")

    h = information(beta, design)
    try:
        cov_std = linalg.inv(h)
    except linalg.LinAlgError:
        scale = max(1.0, float(np.max(np.abs(np.diag(h)))))
        try:
            cov_std = linalg.inv(h + RIDGE * scale * np.eye(h.shape[0]))
        except linalg.LinAlgError:
            raise SingularInformation("information matrix is not invertible") from None
    if not np.all(np.isfinite(cov_std)) or np.any(np.diag(cov_std) <= 0):
        raise SingularInformation("information matrix is not positive definite")

    # map standardized coefficients back to the original scale
    kk = len(keep)
    t_mat = np.eye(kk + 1)
    t_mat[0, 1:] = -mean[keep] / sd_safe[keep]
    t_mat[1:, 1:] = np.diag(1.0 / sd_safe[keep])
    b_orig = t_mat @ beta
    cov_orig = t_mat @ cov_std @ t_mat.T

    coef = np.zeros(k + 1)
    se = np.full(k + 1, np.nan)
    coef[0] = b_orig[0]
    se[0] = math.sqrt(cov_orig[0, 0])
    for pos, j in enumerate(keep, start=1):
        coef[j + 1] = b_orig[pos]
        se[j + 1] = math.sqrt(cov_orig[pos, pos])
    wald = np.zeros(k + 1)
    ok = np.isfinite(se) & (se > 0)
    wald[ok] = (coef[ok] / se[ok]) ** 2
    p, clamped = chi2_sf(wald)
    p = np.where(ok, p, 1.0)
    clamped = np.where(ok, clamped, False)
    return FittedModel(
        names=names,
        coef=coef,
        se=se,
        wald=wald,
        p_values=p,
        stars=tuple(significance_stars(v) for v in p),
        mean=mean,
        scale=sd_safe,
        coef_std=beta,
        cov_std=cov_std,
        dropped=dropped,
        p_clamped=tuple(bool(c) for c in clamped),
        iterations=it,
        grad_norm=float(np.max(np.abs(g))),
        converged=bool(converged),
        separation=False,
        loglik_trace=tuple(trace),
    )


@dataclass(frozen=True)
class RankedFeature:
    spec: object
    name: str
    p_value: float
    stars: str
    wald: float
    beta: float


@dataclass(frozen=True)
class FeatureRanking:
    items: tuple[RankedFeature, ...]

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    @property
    def specs(self):
        return [r.spec for r in self.items]


def _rank(entries) -> FeatureRanking:
    return FeatureRanking(tuple(sorted(entries, key=lambda r: (r.p_value, r.name))))


def wald_rank(model: FittedModel, specs: Sequence | None = None) -> FeatureRanking:
    """Features ordered by ascending Wald p-value (intercept excluded)."""
    specs = list(specs) if specs is not None else list(model.names)
    if len(specs) != len(model.names):
        raise ValueError("specs do not match the fitted model's features")
    entries = [
        RankedFeature(
            spec=s,
            name=getattr(s, "name", str(s)),
            p_value=float(model.p_values[j + 1]),
            stars=model.stars[j + 1],
            wald=float(model.wald[j + 1]),
            beta=float(model.coef[j + 1]),
        )
        for j, s in enumerate(specs)
    ]
    return _rank(entries)


def wald_screen(fm: FeatureMatrix, y, rows=None, joint: bool = True) -> FeatureRanking:
    """Rank the columns of ``fm`` by Wald p-value.

    ``joint`` fits one model over every column; otherwise each column gets
    its own single-feature model.
    """
    rows = slice(None) if rows is None else rows
    means = fm.column_means(rows)
    x = fm.imputed(means)[rows]
    y = np.asarray(y)[rows]
    if joint:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit_logistic(x, y, fm.names)
        return wald_rank(model, fm.specs)
    entries = []
    for j, s in enumerate(fm.specs):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = fit_logistic(x[:, [j]], y, [s.name])
        entries.append(RankedFeature(s, s.name, float(m.p_values[1]), m.stars[1], float(m.wald[1]), float(m.coef[1])))
    return _rank(entries)


def select_top_k(ranking: FeatureRanking, k: int) -> list:
    if k < 1:
        raise ValueError("k must be >= 1")
    return [r.spec for r in ranking.items[:k]]


def model_report(model: FittedModel) -> dict:
    def entry(name, j):
        return {
            "name": name,
            "beta": float(model.coef[j]),
            "se": None if math.isnan(model.se[j]) else float(model.se[j]),
            "wald": float(model.wald[j]),
            "p_value": float(model.p_values[j]),
            "p_clamped": bool(model.p_clamped[j]),
            "stars": model.stars[j],
        }

    return {
        "intercept": entry("(intercept)", 0),
        "features": [entry(nm, j + 1) for j, nm in enumerate(model.names)],
        "dropped": [model.names[j] for j in model.dropped],
        "convergence": {
            "iterations": model.iterations,
            "grad_norm": model.grad_norm,
            "converged": model.converged,
            "separation_flag": model.separation,
        },
    }


def write_model_report(model: FittedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_report(model), fh, indent=2)
        fh.write("\n")


def write_ranking_csv(ranking: FeatureRanking, path) -> None:
    """Rank, meta-path text, p-value (5 significant digits) and stars."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "p_value", "significance"])
        for i, r in enumerate(ranking, start=1):
            w.writerow([i, r.name, f"{r.p_value:.4e}", r.stars or "-"])
