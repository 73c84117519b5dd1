"""Meta-path risk features for enterprises.

Three families are computed for a meta path ``P`` rooted at enterprise
``x``:

* naive: the share of distinct ``P``-reachable objects that are risky;
* countsim: the number of reachable objects over the link degree of ``x``
  plus the total link degree of the reachable set (no risk term);
* hetesim: the risky share of HeteSim relevance mass over the reachable
  objects.

Single-cell functions walk the graph; :func:`build_feature_matrix` computes
whole columns with sparse matrix products.  The two routes are checked
against each other in the test suite.
"""

from __future__ import annotations

import csv
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import TypeMismatch
from .hin import Hin
from .metapath import MetaPath, format_metapath, parse_metapath, reachable_targets

__all__ = [
    "KINDS",
    "FeatureSpec",
    "AttributeSpec",
    "FeatureMatrix",
    "HeteSimEngine",
    "naive_mp",
    "countsim_mp",
    "hetesim",
    "hetesim_mp",
    "build_feature_matrix",
    "feature_specs",
]

KINDS = ("naive", "countsim", "hetesim")


@dataclass(frozen=True)
class FeatureSpec:
    mp: MetaPath
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")

    @property
    def name(self) -> str:
        return f"{format_metapath(self.mp)}:{self.kind}"

    @classmethod
    def parse(cls, name: str, schema) -> "FeatureSpec":
        text, _, kind = name.rpartition(":")
        return cls(parse_metapath(text, schema), kind)

    def __str__(self):
        return self.name


def feature_specs(paths: Sequence[MetaPath], kind: str) -> list[FeatureSpec]:
    return [FeatureSpec(mp, kind) for mp in paths]


@dataclass(frozen=True)
class AttributeSpec:
    """A column holding an object's own attribute level (ordinal code)."""

    attribute: str
    kind: str = "attribute"

    @property
    def name(self) -> str:
        return f"attr:{self.attribute}"

    def __str__(self):
        return self.name


@dataclass
class FeatureMatrix:
    """Enterprises by features; ``nan`` marks undefined cells."""

    row_ids: tuple[str, ...]
    specs: tuple[FeatureSpec, ...]
    values: np.ndarray

    def __post_init__(self):
        self.row_ids = tuple(self.row_ids)
        self.specs = tuple(self.specs)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.row_ids), len(self.specs)):
            raise ValueError(
                f"values shape {self.values.shape} does not match {len(self.row_ids)} rows x {len(self.specs)} specs"
            )

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    def column_means(self, rows=None) -> np.ndarray:
        v = self.values if rows is None else self.values[rows]
        with np.errstate(invalid="ignore"):
            defined = ~np.isnan(v)
            cnt = defined.sum(axis=0)
            tot = np.where(defined, v, 0.0).sum(axis=0)
        return np.where(cnt > 0, tot / np.maximum(cnt, 1), 0.0)

    def imputed(self, means=None) -> np.ndarray:
        """Values with undefined cells replaced by column means."""
        if means is None:
            means = self.column_means()
        return np.where(np.isnan(self.values), means[None, :], self.values)

    def select(self, specs) -> "FeatureMatrix":
        idx = [self.specs.index(s) for s in specs]
        return FeatureMatrix(self.row_ids, [self.specs[i] for i in idx], self.values[:, idx])

    def take_rows(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=int)
        return FeatureMatrix([self.row_ids[i] for i in idx], self.specs, self.values[idx])

    def hstack(self, other: "FeatureMatrix") -> "FeatureMatrix":
        if other.row_ids != self.row_ids:
            raise ValueError("row ids differ")
        return FeatureMatrix(self.row_ids, self.specs + other.specs, np.hstack([self.values, other.values]))

    def write(self, path) -> dict[str, str]:
        """Write ``path`` (blank = undefined), ``*.imputed.csv`` and a JSON sidecar."""
        path = str(path)
        stem = path[:-4] if path.endswith(".csv") else path
        paths = {"raw": stem + ".csv", "imputed": stem + ".imputed.csv", "sidecar": stem + ".json"}
        means = self.column_means()
        imputed = self.imputed(means)
        for key, mat in (("raw", self.values), ("imputed", imputed)):
            with open(paths[key], "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["enterprise_id"] + self.names)
                for rid, row in zip(self.row_ids, mat):
                    w.writerow([rid] + ["" if math.isnan(v) else repr(float(v)) for v in row])
        missing = self.missing
        side = {
            "rows": len(self.row_ids),
            "features": [
                {
                    "name": s.name,
                    "meta_path": format_metapath(s.mp) if hasattr(s, "mp") else None,
                    "kind": s.kind,
                    "n_missing": int(missing[:, j].sum()),
                    "imputed_mean": float(means[j]),
                }
                for j, s in enumerate(self.specs)
            ],
        }
        with open(paths["sidecar"], "w", encoding="utf-8") as fh:
            json.dump(side, fh, indent=2)
            fh.write("\n")
        return paths

    @classmethod
    def read(cls, path, schema) -> "FeatureMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            specs = [
                AttributeSpec(h[5:]) if h.startswith("attr:") else FeatureSpec.parse(h, schema) for h in header[1:]
            ]
            ids, rows = [], []
            for row in reader:
                ids.append(row[0])
                rows.append([float(v) if v != "" else np.nan for v in row[1:]])
        return cls(ids, specs, np.array(rows, dtype=float).reshape(len(ids), len(specs)))


# ---------------------------------------------------------------------------
# HeteSim


def _row_normalize(m: sp.csr_matrix) -> sp.csr_matrix:
    rs = np.asarray(m.sum(axis=1)).ravel()
    inv = np.divide(1.0, rs, out=np.zeros_like(rs), where=rs > 0)
    return sp.csr_matrix(sp.diags(inv) @ m)


class HeteSimEngine:
    """Cached transition operators for HeteSim relevance over one graph.

    The meta path is split after relation ``ceil(n/2)``.  For an even
    number of relations the two halves meet at an object type; for an odd
    number the middle relation is cut in two and the walks meet on its
    individual links.  Relevance is the cosine of the two reach
    distributions.
    """

    def __init__(self, hin: Hin):
        self.hin = hin
        self._cache: dict = {}
        self._lock = threading.RLock()

    def _cached(self, key, build):
        val = self._cache.get(key)
        if val is None:
            with self._lock:
                val = self._cache.get(key)
                if val is None:
                    val = build()
                    self._cache[key] = val
        return val

    def transition(self, rtype) -> sp.csr_matrix:
        return self._cached(("U", rtype.key), lambda: _row_normalize(self.hin.relation_matrix(rtype)))

    def reach(self, start_type, rels) -> sp.csr_matrix:
        """Product of transition operators along ``rels`` (identity if empty)."""
        rels = tuple(rels)
        if not rels:
            n = len(self.hin.nodes_of_type(start_type))
            return self._cached(("I", start_type.name), lambda: sp.identity(n, format="csr"))
        key = ("R", tuple(r.key for r in rels))
        return self._cached(key, lambda: sp.csr_matrix(self.reach(start_type, rels[:-1]) @ self.transition(rels[-1])))

    def halves(self, mp: MetaPath):
        """Left and right reach operators plus the middle relation (odd paths)."""
        rels = mp.relation_types
        n = len(rels)
        m = (n + 1) // 2
        inv = self.hin.schema.inverse
        if n % 2 == 0:
            left = self.reach(mp.root, rels[:m])
            right = self.reach(mp.terminal, [inv(r) for r in reversed(rels[m:])])
            return left, right, None
        left = self.reach(mp.root, rels[: m - 1])
        right = self.reach(mp.terminal, [inv(r) for r in reversed(rels[m:])])
        return left, right, rels[m - 1]

    def _middle(self, rtype):
        def build():
            w = self.hin.relation_matrix(rtype)
            rs = np.asarray(w.sum(axis=1)).ravel()
            cs = np.asarray(w.sum(axis=0)).ravel()
            irs = np.divide(1.0, rs, out=np.zeros_like(rs), where=rs > 0)
            ics = np.divide(1.0, cs, out=np.zeros_like(cs), where=cs > 0)
            return w, irs, ics

        return self._cached(("M", rtype.key), build)

    def operators(self, mp: MetaPath):
        """``(A, B, left_norm, right_norm)`` with relevance = A[s] . B[t] / norms.

        ``A`` is (root objects x meeting space) and ``B`` is (terminal
        objects x meeting space), both sparse.
        """

        def build():
            left, right, mid = self.halves(mp)
            if mid is None:
                a = left
                b = right
                ln = np.sqrt(np.asarray(left.multiply(left).sum(axis=1)).ravel())
                rn = np.sqrt(np.asarray(right.multiply(right).sum(axis=1)).ravel())
            else:
                w, irs, ics = self._middle(mid)
                a = sp.csr_matrix(left @ sp.diags(irs) @ w)
                b = sp.csr_matrix(right @ sp.diags(ics))
                ln = np.sqrt(np.asarray(left.multiply(left) @ irs).ravel())
                rn = np.sqrt(np.asarray(right.multiply(right) @ ics).ravel())
            return a, b, ln, rn

        return self._cached(("O", tuple(r.key for r in mp.relation_types)), build)

    def relevance(self, s: str, t: str, mp: MetaPath) -> float:
        hin = self.hin
        if hin.node(s).otype != mp.root or hin.node(t).otype != mp.terminal:
            raise TypeMismatch(f"({s!r}, {t!r}) do not match the endpoint types of {format_metapath(mp)}")
        a, b, ln, rn = self.operators(mp)
        i = hin.type_position(mp.root)[s]
        j = hin.type_position(mp.terminal)[t]
        if ln[i] == 0 or rn[j] == 0:
            return 0.0
        num = float(a.getrow(i).multiply(b.getrow(j)).sum())
        return min(1.0, num / (ln[i] * rn[j]))

    def relevance_matrix(self, mp: MetaPath) -> np.ndarray:
        """Dense root-by-terminal relevance matrix (use on small graphs)."""
        a, b, ln, rn = self.operators(mp)
        num = (a @ b.T).toarray()
        den = np.outer(ln, rn)
        return np.minimum(1.0, np.divide(num, den, out=np.zeros_like(num), where=den > 0))


def hetesim(engine: HeteSimEngine, s: str, t: str, mp: MetaPath) -> float:
    """Normalized HeteSim relevance of ``s`` and ``t`` under ``mp``."""
    return engine.relevance(s, t, mp)


# ---------------------------------------------------------------------------
# single cells


def naive_mp(hin: Hin, x: str, mp: MetaPath, risk: Mapping[str, bool], exact: bool = False):
    """Share of distinct reachable objects that are risky; ``nan`` if none are reachable."""
    targets = reachable_targets(hin, x, mp)
    if not targets:
        return None if exact else math.nan
    frac = Fraction(sum(1 for t in targets if risk.get(t, False)), len(targets))
    return frac if exact else float(frac)


def countsim_mp(hin: Hin, x: str, mp: MetaPath) -> float:
    """Reachable count over (links of x + links of the reachable set)."""
    targets = reachable_targets(hin, x, mp)
    den = hin.degree(x) + sum(hin.degree(t) for t in targets)
    if den == 0:
        return math.nan
    return len(targets) / den


def hetesim_mp(hin: Hin, engine: HeteSimEngine, x: str, mp: MetaPath, risk: Mapping[str, bool]) -> float:
    """Risky share of HeteSim relevance over the reachable objects."""
    targets = sorted(reachable_targets(hin, x, mp))
    num = den = 0.0
    for t in targets:
        h = engine.relevance(x, t, mp)
        den += h
        if risk.get(t, False):
            num += h
    if den == 0:
        return math.nan
    return num / den


# ---------------------------------------------------------------------------
# whole columns


def _binarize(m):
    m = sp.csr_matrix(m, copy=True)
    m.eliminate_zeros()
    m.data[:] = 1.0
    return m


def _bool_product(a, b):
    return _binarize(a @ b)


class _ColumnBuilder:
    def __init__(self, hin: Hin, risk: Mapping[str, bool], engine: HeteSimEngine):
        self.hin = hin
        self.engine = engine
        self._risk = risk
        self._cache: dict = {}
        self._lock = threading.RLock()

    def _cached(self, key, build):
        val = self._cache.get(key)
        if val is None:
            with self._lock:
                val = self._cache.get(key)
                if val is None:
                    val = build()
                    self._cache[key] = val
        return val

    def risk_vector(self, otype) -> np.ndarray:
        def build():
            ids = self.hin.nodes_of_type(otype)
            return np.array([1.0 if self._risk.get(i, False) else 0.0 for i in ids])

        return self._cached(("risk", otype.name), build)

    def reach(self, rels) -> sp.csr_matrix:
        rels = tuple(rels)
        key = ("reach", tuple(r.key for r in rels))
        if len(rels) == 1:
            return self._cached(key, lambda: _binarize(self.hin.relation_matrix(rels[0])))
        return self._cached(key, lambda: _bool_product(self.reach(rels[:-1]), self.hin.relation_matrix(rels[-1])))

    def targets(self, mp: MetaPath) -> sp.csr_matrix:
        """0/1 reachability with the start object removed from its own targets."""
        def build():
            r = self.reach(mp.relation_types).tolil()
            if mp.root == mp.terminal:
                r.setdiag(0)
            r = sp.csr_matrix(r)
            r.eliminate_zeros()
            return r

        return self._cached(("targets", tuple(k.key for k in mp.relation_types)), build)

    def column(self, spec: FeatureSpec) -> np.ndarray:
        mp = spec.mp
        if spec.kind == "naive":
            t = self.targets(mp)
            den = np.asarray(t.sum(axis=1)).ravel()
            num = t @ self.risk_vector(mp.terminal)
            return np.divide(num, den, out=np.full_like(den, np.nan), where=den > 0)
        if spec.kind == "countsim":
            t = self.targets(mp)
            num = np.asarray(t.sum(axis=1)).ravel()
            den = self.hin.degree_vector(mp.root) + t @ self.hin.degree_vector(mp.terminal)
            return np.divide(num, den, out=np.full_like(den, np.nan), where=den > 0)
        a, b, ln, rn = self.engine.operators(mp)
        risk = self.risk_vector(mp.terminal)
        irn = np.divide(1.0, rn, out=np.zeros_like(rn), where=rn > 0)
        iln = np.divide(1.0, ln, out=np.zeros_like(ln), where=ln > 0)
        num = iln * (a @ (b.T @ (irn * risk)))
        den = iln * (a @ (b.T @ irn))
        if mp.root == mp.terminal:
            diag = iln * np.asarray(a.multiply(b).sum(axis=1)).ravel() * irn
            num = num - diag * risk
            den = den - diag
        # relevance mass is a sum of nonnegative terms; clip rounding residue
        num = np.clip(num, 0.0, None)
        den = np.where(den > 1e-14, den, 0.0)
        num = np.minimum(num, den)
        return np.divide(num, den, out=np.full_like(den, np.nan), where=den > 0)


def build_feature_matrix(
    hin: Hin,
    specs: Sequence[FeatureSpec],
    risk: Mapping[str, bool],
    engine: HeteSimEngine | None = None,
    workers: int = 1,
) -> FeatureMatrix:
    """Feature values for every node of the specs' root type.

    Columns are independent; ``workers`` > 1 computes them on a thread pool
    and the result does not depend on the worker count.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("at least one feature spec is required")
    root = specs[0].mp.root
    if any(s.mp.root != root for s in specs):
        raise TypeMismatch("all feature specs must share a root type")
    engine = engine or HeteSimEngine(hin)
    builder = _ColumnBuilder(hin, risk, engine)
    rows = hin.nodes_of_type(root)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(builder.column, specs))
    else:
        cols = [builder.column(s) for s in specs]
    values = np.column_stack(cols) if cols else np.empty((len(rows), 0))
    return FeatureMatrix(rows, specs, values.reshape(len(rows), len(specs)))
