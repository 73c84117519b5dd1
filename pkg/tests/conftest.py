import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hinrisk.hin import Edge, Hin, Node, default_sme_schema
from hinrisk.metapath import MetaPath

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SCHEMA = default_sme_schema()
TYPES = [t for t in SCHEMA.object_types]


def random_hin(seed, max_nodes=30, max_edges=60, multi=True, timestamps=False, labels=False):
    """A random schema-valid multigraph with at most ``max_nodes`` nodes."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_nodes + 1))
    kinds = rng.integers(0, len(TYPES), size=n)
    kinds[0] = TYPES.index(SCHEMA.object_type("enterprise"))
    nodes = []
    by_type = {}
    for i, k in enumerate(kinds):
        t = TYPES[k]
        nid = f"{t.code.lower()}{i}"
        lab = None
        if labels and rng.random() < 0.8:
            lab = bool(rng.random() < 0.4)
        ts = int(rng.integers(0, 10)) if timestamps and rng.random() < 0.5 else None
        nodes.append(Node(nid, t, {}, ts, lab, None if lab is None else "observed"))
        by_type.setdefault(t, []).append(nid)
    rels = [r for r in SCHEMA.relation_types if by_type.get(r.source) and by_type.get(r.target)]
    edges = []
    seen = set()
    m = int(rng.integers(0, max_edges + 1)) if rels else 0
    for j in range(m):
        r = rels[int(rng.integers(len(rels)))]
        a = by_type[r.source][int(rng.integers(len(by_type[r.source])))]
        b = by_type[r.target][int(rng.integers(len(by_type[r.target])))]
        if a == b:
            continue
        if not multi and (a, b, r.key) in seen:
            continue
        seen.add((a, b, r.key))
        ts = int(rng.integers(0, 10)) if timestamps and rng.random() < 0.8 else None
        edges.append(Edge(f"x{j}", a, b, r, ts))
    return Hin(SCHEMA, nodes, edges)


def random_metapath(rng, root=None, max_len=4, schema=SCHEMA):
    root = root or TYPES[int(rng.integers(len(TYPES)))]
    length = int(rng.integers(1, max_len + 1))
    rels = []
    here = root
    for _ in range(length):
        outs = schema.out_relations(here)
        r = outs[int(rng.integers(len(outs)))]
        rels.append(r)
        here = r.target
    return MetaPath(tuple(rels))


def random_risk(hin, seed):
    rng = np.random.default_rng(seed + 7)
    return {nid: bool(rng.random() < 0.4) for nid in hin.nodes}


@pytest.fixture
def schema():
    return SCHEMA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
