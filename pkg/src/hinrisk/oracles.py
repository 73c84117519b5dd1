"""Brute-force reference computations for small inputs.

Nothing here shares traversal or numeric code with the main modules: graph
oracles rescan the raw edge list at every step, probabilities are plain
products, AUC counts pairs, and the chi-square tail comes from the
incomplete-gamma series/continued fraction.
"""

from __future__ import annotations

import math
from itertools import product

from .errors import OracleLimitExceeded

__all__ = [
    "MAX_ORACLE_NODES",
    "oracle_neighbors",
    "oracle_match",
    "oracle_targets",
    "oracle_enumerate",
    "oracle_hetesim",
    "oracle_naive",
    "oracle_countsim",
    "oracle_hetesim_feature",
    "oracle_nb",
    "oracle_auc",
    "oracle_chi2_sf",
]

MAX_ORACLE_NODES = 30


def _limit(hin):
    if len(hin.nodes) > MAX_ORACLE_NODES:
        raise OracleLimitExceeded(f"graph has {len(hin.nodes)} nodes, oracle limit is {MAX_ORACLE_NODES}")


def _steps(hin, v, rel):
    """``(next, edge_id, direction)`` for every way to leave v over rel, by edge-list scan."""
    out = []
    for e in hin.edges.values():
        if e.rtype.key == rel.key and e.src == v:
            out.append((e.dst, e.id, "fwd"))
        if e.rtype.key == rel.inverse_key and e.dst == v:
            out.append((e.src, e.id, "bwd"))
    return out


def oracle_neighbors(hin, v, rel):
    return {n for n, _, _ in _steps(hin, v, rel)}


def oracle_match(hin, start, mp):
    """Set of ``(nodes, edges)`` tuples for every instance of mp from start."""
    _limit(hin)
    found = set()
    rels = mp.relation_types

    def go(nodes, edges):
        i = len(edges)
        if i == len(rels):
            if nodes[-1] != start:
                found.add((tuple(nodes), tuple(edges)))
            return
        if hin.nodes[nodes[-1]].otype != rels[i].source:
            return
        for nxt, eid, _ in _steps(hin, nodes[-1], rels[i]):
            if hin.nodes[nxt].otype == rels[i].target:
                go(nodes + [nxt], edges + [eid])

    if hin.nodes[start].otype == mp.root:
        go([start], [])
    return found


def oracle_targets(hin, start, mp):
    return {nodes[-1] for nodes, _ in oracle_match(hin, start, mp)}


def oracle_enumerate(schema, root, max_relations, allow_backtracking=False):
    """Set of relation-key tuples for all meta paths, by recursive expansion."""
    rels = list(schema.relation_types)
    out = set()

    def grow(path, at):
        if path:
            out.add(tuple(path))
        if len(path) == max_relations:
            return
        for r in rels:
            if r.source.name != at:
                continue
            if path and not allow_backtracking:
                last = path[-1]
                if (r.name, r.source.name, r.target.name) == (last[3], last[2], last[1]):
                    continue
            grow(path + [(r.name, r.source.name, r.target.name, r.inverse_name)], r.target.name)

    grow([], root.name)
    return {tuple(k[:3] for k in p) for p in out}


def _walk(hin, start, rels):
    """Probability distribution of a uniform random walk from start along rels."""
    dist = {start: 1.0}
    for r in rels:
        nxt = {}
        for v, p in dist.items():
            steps = _steps(hin, v, r)
            for n, _, _ in steps:
                nxt[n] = nxt.get(n, 0.0) + p / len(steps)
        dist = nxt
    return dist


def _links_from(hin, v, rel):
    """Individual rel-links leaving v, keyed by (edge id, direction of rel)."""
    return [(eid, d) for _, eid, d in _steps(hin, v, rel)]


def _links_into(hin, v, rel):
    out = []
    for e in hin.edges.values():
        if e.rtype.key == rel.key and e.dst == v:
            out.append((e.id, "fwd"))
        if e.rtype.key == rel.inverse_key and e.src == v:
            out.append((e.id, "bwd"))
    return out


def oracle_hetesim(hin, s, t, mp):
    """Normalized HeteSim from two explicit random walks meeting mid-path."""
    _limit(hin)
    rels = list(mp.relation_types)
    n = len(rels)
    m = (n + 1) // 2
    inv = hin.schema.inverse
    if n % 2 == 0:
        left = _walk(hin, s, rels[:m])
        right = _walk(hin, t, [inv(r) for r in reversed(rels[m:])])
    else:
        mid = rels[m - 1]
        left = {}
        for a, p in _walk(hin, s, rels[: m - 1]).items():
            links = _links_from(hin, a, mid)
            for link in links:
                left[link] = left.get(link, 0.0) + p / len(links)
        right = {}
        for b, p in _walk(hin, t, [inv(r) for r in reversed(rels[m:])]).items():
            links = _links_into(hin, b, mid)
            for link in links:
                right[link] = right.get(link, 0.0) + p / len(links)
    dot = sum(p * right.get(k, 0.0) for k, p in left.items())
    nl = math.sqrt(sum(p * p for p in left.values()))
    nr = math.sqrt(sum(p * p for p in right.values()))
    if nl == 0 or nr == 0:
        return 0.0
    return dot / (nl * nr)


def oracle_naive(hin, x, mp, risk):
    targets = oracle_targets(hin, x, mp)
    if not targets:
        return math.nan
    return sum(1 for t in targets if risk.get(t, False)) / len(targets)


def _incident(hin, v):
    return sum(1 for e in hin.edges.values() if v in (e.src, e.dst))


def oracle_countsim(hin, x, mp):
    targets = oracle_targets(hin, x, mp)
    den = _incident(hin, x) + sum(_incident(hin, t) for t in targets)
    if den == 0:
        return math.nan
    return len(targets) / den


def oracle_hetesim_feature(hin, x, mp, risk):
    targets = sorted(oracle_targets(hin, x, mp))
    rel = {t: oracle_hetesim(hin, x, t, mp) for t in targets}
    den = sum(rel.values())
    if den == 0:
        return math.nan
    return sum(v for t, v in rel.items() if risk.get(t, False)) / den


def oracle_nb(model, attributes):
    """P(y=1 | x) as the plain product ratio, no logarithms."""
    num = model.priors[1]
    alt = model.priors[0]
    for attr, level in attributes.items():
        num *= model.likelihood(attr, level, 1)
        alt *= model.likelihood(attr, level, 0)
    return num / (num + alt)


def oracle_auc(scores, labels):
    """Fraction of (positive, negative) pairs ranked correctly; ties count half."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for a, b in product(pos, neg):
        total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def oracle_chi2_sf(stat, eps=1e-15, max_terms=10000):
    """Upper tail of chi-square(1) via the regularized incomplete gamma Q(1/2, stat/2)."""
    a = 0.5
    x = stat / 2.0
    if x <= 0:
        return 1.0
    log_pref = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1:
        # series for the lower tail P(a, x)
        term = 1.0 / a
        total = term
        for k in range(1, max_terms):
            term *= x / (a + k)
            total += term
            if abs(term) < abs(total) * eps:
                break
        return 1.0 - math.exp(log_pref) * total
    # Lentz continued fraction for the upper tail Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, max_terms):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return math.exp(log_pref) * h
