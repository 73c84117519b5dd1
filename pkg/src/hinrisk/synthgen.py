"""Deterministic synthetic SME networks with planted risk contagion.

Persons and commodities carry a latent risk flag that shows through noisy
numeric attributes; some of their labels are hidden.  News carries a risk
polarity.  Each enterprise has an own-risk score visible through its
attributes and, through a second draw, whether it is distressed.

Defaults follow a logistic model on the own score plus z-scored planted
network features: the HeteSim risk share along each planted meta path and
CountSim along the supply path.  ``contagion`` scales every network
coefficient, so at 0 defaults ignore the network entirely.

Stale edges timestamped before ``cutoff`` join random endpoints and play no
part in the default model.  Everything is drawn from one seeded generator.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InfeasibleConfig
from .hin import Edge, Hin, Node, Schema, default_sme_schema, load_hin
from .metapath import parse_metapath
from .mpfeatures import FeatureSpec, build_feature_matrix

__all__ = [
    "GenConfig",
    "GroundTruth",
    "RELATIONS",
    "generate",
    "generate_records",
    "write_records",
    "figure3_fixture",
    "figure5_fixture",
]

# relation key -> (relation name, source type, target type)
RELATIONS = {
    "parent": ("parent", "enterprise", "enterprise"),
    "supply": ("supply", "enterprise", "enterprise"),
    "control": ("control", "enterprise", "person"),
    "shareholder": ("shareholder", "enterprise", "person"),
    "manager": ("manager", "enterprise", "person"),
    "employee": ("employee", "enterprise", "person"),
    "boardmember": ("boardmember", "enterprise", "person"),
    "produce": ("produce", "enterprise", "commodity"),
    "report_e": ("report", "enterprise", "news"),
    "report_p": ("report", "person", "news"),
    "report_c": ("report", "commodity", "news"),
    "relate": ("relate", "person", "person"),
}

COUNT_PATH = "E-[supply]->E"

PREFIX = {"enterprise": "E", "person": "P", "commodity": "C", "news": "N"}


def _default_degrees():
    return {
        "parent": 0.3,
        "supply": 1.5,
        "control": 2.5,
        "shareholder": 1.0,
        "manager": 1.0,
        "employee": 2.0,
        "boardmember": 0.5,
        "produce": 2.5,
        "report_e": 6.0,
        "report_p": 0.2,
        "report_c": 0.2,
        "relate": 0.3,
    }


def _default_paths():
    return {
        "E-[report]->N": 1.0,
        "E-[control]->P": 1.0,
        "E-[produce]->C": 0.8,
        "E-[control]->P-[shareholder]->E": 0.8,
    }


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_enterprise: int = 1500
    n_person: int = 4000
    n_commodity: int = 1500
    n_news: int = 3000
    # mean out-degree per source node, keyed as in RELATIONS
    degrees: dict = field(default_factory=_default_degrees)
    # Pareto shape of target popularity; smaller means heavier hubs
    popularity_shape: float = 2.0
    # scales every planted meta-path coefficient; 0 removes network signal
    contagion: float = 0.9
    path_weights: dict = field(default_factory=_default_paths)
    path_scale: float = 3.0
    count_coef: float = 2.5
    attribute_signal: float = 1.0
    base_logit: float = -1.2
    own_coef: float = 0.5
    distress_logit: float = -1.0
    distress_coef: float = 1.5
    object_risk_rate: float = 0.3
    news_risk_rate: float = 0.3
    hidden_fraction: float = 0.3
    n_person_attrs: int = 4
    n_commodity_attrs: int = 3
    n_enterprise_attrs: int = 6
    stale_fraction: float = 0.25
    cutoff: int = 3285
    horizon: int = 3650

    def validate(self) -> None:
        counts = {
            "enterprise": self.n_enterprise,
            "person": self.n_person,
            "commodity": self.n_commodity,
            "news": self.n_news,
        }
        for k, v in counts.items():
            if v < 0:
                raise InfeasibleConfig(f"count for {k} is negative")
        for name, p in (
            ("contagion", self.contagion),
            ("object_risk_rate", self.object_risk_rate),
            ("news_risk_rate", self.news_risk_rate),
            ("hidden_fraction", self.hidden_fraction),
            ("stale_fraction", self.stale_fraction),
        ):
            if not 0.0 <= p <= 1.0:
                raise InfeasibleConfig(f"{name} must lie in [0, 1], got {p}")
        if self.stale_fraction >= 1.0:
            raise InfeasibleConfig("stale_fraction must be below 1")
        if self.attribute_signal < 0 or self.popularity_shape <= 0:
            raise InfeasibleConfig("attribute_signal must be >= 0 and popularity_shape > 0")
        if not 0 < self.cutoff <= self.horizon:
            raise InfeasibleConfig("need 0 < cutoff <= horizon")
        for key, mean in self.degrees.items():
            if key not in RELATIONS:
                raise InfeasibleConfig(f"unknown relation key {key!r}")
            if mean < 0:
                raise InfeasibleConfig(f"degree for {key} is negative")
            _, s, t = RELATIONS[key]
            avail = counts[t] - (1 if s == t else 0)
            if mean > 0 and (counts[s] == 0 or mean > avail):
                raise InfeasibleConfig(
                    f"mean {key} degree {mean} cannot be met with {counts[s]} {s} and {counts[t]} {t} nodes"
                )
        for w in self.path_weights.values():
            if not 0.0 <= w <= 1.0:
                raise InfeasibleConfig("path weights must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GroundTruth:
    seed: int
    coefficients: dict
    planted_paths: dict
    risky: dict
    distressed: list
    defaults: list
    hidden_labels: list
    stale_edges: list

    def to_dict(self) -> dict:
        return asdict(self)

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _ids(otype, n):
    width = max(4, len(str(n)))
    return [f"{PREFIX[otype]}{i:0{width}d}" for i in range(n)]


def _draw_edges(rng, n_src, n_dst, mean, weights, same_type):
    """Distinct (src, dst) index pairs with Poisson out-degrees and weighted targets."""
    if mean <= 0 or n_src == 0 or n_dst == 0:
        return np.empty((0, 2), dtype=int)
    deg = rng.poisson(mean, size=n_src)
    src = np.repeat(np.arange(n_src), deg)
    cdf = np.cumsum(weights)
    dst = np.searchsorted(cdf, rng.random(src.size) * cdf[-1], side="right")
    dst = np.minimum(dst, n_dst - 1)
    pairs = np.column_stack([src, dst])
    if same_type:
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    _, first = np.unique(pairs, axis=0, return_index=True)
    return pairs[np.sort(first)]


def _logit(z):
    return 1.0 / (1.0 + np.exp(-z))


def _zscore(v):
    v = np.where(np.isnan(v), np.nanmean(v) if np.any(~np.isnan(v)) else 0.0, v)
    sd = v.std()
    return (v - v.mean()) / sd if sd > 0 else np.zeros_like(v)


def generate_records(config: GenConfig = GenConfig()):
    """Build the four record tables plus the ground truth.

    Returns ``(records, truth)`` with ``records`` a dict holding ``nodes``,
    ``edges``, ``attributes`` and ``labels`` row lists in the CSV layout.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    schema = default_sme_schema()
    counts = {
        "enterprise": config.n_enterprise,
        "person": config.n_person,
        "commodity": config.n_commodity,
        "news": config.n_news,
    }
    ids = {t: _ids(t, n) for t, n in counts.items()}

    # latent risk of individual objects
    latent = {
        "person": rng.random(counts["person"]) < config.object_risk_rate,
        "commodity": rng.random(counts["commodity"]) < config.object_risk_rate,
        "news": rng.random(counts["news"]) < config.news_risk_rate,
    }
    own = rng.standard_normal(counts["enterprise"])
    attrs = {
        "person": latent["person"][:, None] * config.attribute_signal
        + rng.standard_normal((counts["person"], config.n_person_attrs)),
        "commodity": latent["commodity"][:, None] * config.attribute_signal
        + rng.standard_normal((counts["commodity"], config.n_commodity_attrs)),
        "enterprise": own[:, None] * config.attribute_signal
        + rng.standard_normal((counts["enterprise"], config.n_enterprise_attrs)) * 1.5,
    }
    hidden = {
        t: rng.random(counts[t]) < config.hidden_fraction for t in ("person", "commodity")
    }
    popularity = {t: rng.pareto(config.popularity_shape, size=n) + 1.0 for t, n in counts.items()}

    # current (recent) and stale edges
    edge_rows = []
    stale_ids = []
    n_edge = 0
    for key in sorted(config.degrees):
        name, s, t = RELATIONS[key]
        mean = config.degrees[key]
        same = s == t
        recent = _draw_edges(rng, counts[s], counts[t], mean * (1 - config.stale_fraction), popularity[t], same)
        stale = _draw_edges(rng, counts[s], counts[t], mean * config.stale_fraction, popularity[t], same)
        t_recent = rng.integers(config.cutoff, config.horizon + 1, size=len(recent))
        t_stale = rng.integers(0, config.cutoff, size=len(stale))
        seen = set()
        for pairs, times, is_stale in ((recent, t_recent, False), (stale, t_stale, True)):
            for (a, b), ts in zip(pairs.tolist(), times.tolist()):
                pair = (a, b) if not (same and name == "relate") else tuple(sorted((a, b)))
                if pair in seen:
                    continue
                seen.add(pair)
                eid = f"L{n_edge:06d}"
                n_edge += 1
                edge_rows.append(
                    {"id": eid, "src": ids[s][a], "dst": ids[t][b], "relation": name, "timestamp": str(ts), "_stale": is_stale}
                )
                if is_stale:
                    stale_ids.append(eid)

    node_rows = [{"id": i, "type": t, "timestamp": ""} for t in counts for i in ids[t]]
    attr_rows = []
    for t, mat in attrs.items():
        for i, nid in enumerate(ids[t]):
            for j in range(mat.shape[1]):
                attr_rows.append({"id": nid, "attr_name": f"a{j}", "attr_value": repr(round(float(mat[i, j]), 6))})

    # planted features are computed on the recent graph with the true risk
    types = {nid: t for t in counts for nid in ids[t]}
    recent_hin = Hin(
        schema,
        [Node(r["id"], schema.object_type(r["type"])) for r in node_rows],
        [
            Edge(r["id"], r["src"], r["dst"], _relation(schema, r, types), None)
            for r in edge_rows
            if not r["_stale"]
        ],
    )
    true_risk = {}
    for t in ("person", "commodity", "news"):
        true_risk.update({nid: bool(v) for nid, v in zip(ids[t], latent[t])})

    # enterprise distress is what other enterprises see as risk along E-ending paths
    distress = rng.random(counts["enterprise"]) < _logit(config.distress_logit + config.distress_coef * own)
    true_risk.update({nid: bool(v) for nid, v in zip(ids["enterprise"], distress)})

    paths = sorted(config.path_weights)
    specs = [FeatureSpec(parse_metapath(p, schema), "hetesim") for p in paths]
    specs.append(FeatureSpec(parse_metapath(COUNT_PATH, schema), "countsim"))
    planted = build_feature_matrix(recent_hin, specs, true_risk).values
    z = np.column_stack([_zscore(planted[:, j]) for j in range(planted.shape[1])])
    beta = np.array(
        [config.contagion * config.path_scale * config.path_weights[p] for p in paths]
        + [config.contagion * config.count_coef]
    )
    eta = config.base_logit + config.own_coef * own + z @ beta
    default = rng.random(counts["enterprise"]) < _logit(eta)

    label_rows = []
    for t in ("person", "commodity"):
        for nid, risky, hid in zip(ids[t], latent[t], hidden[t]):
            if not hid:
                label_rows.append({"id": nid, "risky": str(int(risky))})
    for nid, risky in zip(ids["news"], latent["news"]):
        label_rows.append({"id": nid, "risky": str(int(risky))})
    for nid, d in zip(ids["enterprise"], default):
        label_rows.append({"id": nid, "risky": str(int(d))})

    for r in edge_rows:
        del r["_stale"]
    records = {"nodes": node_rows, "edges": edge_rows, "attributes": attr_rows, "labels": label_rows}
    truth = GroundTruth(
        seed=config.seed,
        coefficients={
            "intercept": config.base_logit,
            "own_score": config.own_coef,
            **{s.name: float(b) for s, b in zip(specs, beta)},
        },
        planted_paths={p: float(b) for p, b in zip(paths, beta)},
        risky={
            t: [nid for nid, v in zip(ids[t], latent[t]) if v] for t in ("person", "commodity", "news")
        },
        distressed=[nid for nid, v in zip(ids["enterprise"], distress) if v],
        defaults=[nid for nid, v in zip(ids["enterprise"], default) if v],
        hidden_labels=[nid for t in ("person", "commodity") for nid, h in zip(ids[t], hidden[t]) if h],
        stale_edges=stale_ids,
    )
    return records, truth


def _relation(schema: Schema, row, types):
    s = schema.object_type(types[row["src"]])
    t = schema.object_type(types[row["dst"]])
    return schema.relation(row["relation"], s, t)


def generate(config: GenConfig = GenConfig()) -> tuple[Hin, GroundTruth]:
    """A schema-valid network loaded through the same path as the CSV files."""
    records, truth = generate_records(config)
    hin = load_hin(
        default_sme_schema(), records["nodes"], records["edges"], records["labels"], records["attributes"]
    )
    return hin, truth


def write_records(records, truth: GroundTruth | None, directory) -> dict[str, str]:
    """Write nodes/edges/attributes/labels CSVs (and ground_truth.json)."""
    os.makedirs(directory, exist_ok=True)
    headers = {
        "nodes": ["id", "type", "timestamp"],
        "edges": ["id", "src", "dst", "relation", "timestamp"],
        "attributes": ["id", "attr_name", "attr_value"],
        "labels": ["id", "risky"],
    }
    paths = {}
    for name, cols in headers.items():
        p = os.path.join(directory, f"{name}.csv")
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
            w.writeheader()
            w.writerows(records[name])
        paths[name] = p
    if truth is not None:
        paths["ground_truth"] = os.path.join(directory, "ground_truth.json")
        truth.write_json(paths["ground_truth"])
    return paths


# ---------------------------------------------------------------------------
# worked-example fixtures


def _build(spec_nodes, spec_edges, labels=None):
    schema = default_sme_schema()
    types = {}
    nodes = []
    for nid, tname in spec_nodes:
        types[nid] = schema.object_type(tname)
        risk = None if labels is None or nid not in labels else labels[nid]
        nodes.append(Node(nid, types[nid], {}, None, risk, None if risk is None else "observed"))
    edges = [
        Edge(eid, a, b, schema.relation(rel, types[a], types[b])) for eid, a, rel, b in spec_edges
    ]
    return Hin(schema, nodes, edges)


def figure3_fixture() -> Hin:
    """Small SME network with three enterprises, three persons, two commodities and five news items."""
    nodes = [
        ("v1", "enterprise"), ("v2", "enterprise"), ("v7", "enterprise"),
        ("v3", "person"), ("v4", "person"), ("v8", "person"),
        ("v6", "commodity"), ("v9", "commodity"),
        ("v5", "news"), ("v10", "news"), ("v11", "news"), ("v12", "news"), ("v13", "news"),
    ]
    edges = [
        ("e1", "v1", "parent", "v2"),
        ("e2", "v1", "control", "v3"),
        ("e3", "v1", "employee", "v4"),
        ("e4", "v1", "report", "v5"),
        ("e5", "v1", "produce", "v6"),
        ("e6", "v2", "supply", "v7"),
        ("e7", "v7", "control", "v8"),
        ("e8", "v7", "produce", "v9"),
        ("e9", "v2", "report", "v10"),
        ("e10", "v7", "report", "v11"),
        ("e11", "v7", "report", "v12"),
        ("e12", "v2", "report", "v13"),
        ("e13", "v3", "relate", "v4"),
    ]
    return _build(nodes, edges)


def figure5_fixture() -> Hin:
    """Two target enterprises J and K sharing controller L2.

    Along enterprise-control-person-shareholder-enterprise, J reaches five
    enterprises and K four, three of which are risky in each case.
    """
    nodes = [("J", "enterprise"), ("K", "enterprise")]
    nodes += [(f"L{i}", "person") for i in (1, 2, 3)]
    nodes += [(f"Q{i}", "enterprise") for i in range(1, 7)]
    edges = [
        ("c1", "J", "control", "L1"),
        ("c2", "J", "control", "L2"),
        ("c3", "K", "control", "L2"),
        ("c4", "K", "control", "L3"),
        ("s1", "Q1", "shareholder", "L1"),
        ("s2", "Q2", "shareholder", "L1"),
        ("s3", "Q5", "shareholder", "L1"),
        ("s4", "Q3", "shareholder", "L2"),
        ("s5", "Q4", "shareholder", "L2"),
        ("s6", "Q2", "shareholder", "L3"),
        ("s7", "Q6", "shareholder", "L3"),
    ]
    labels = {"Q1": False, "Q2": True, "Q3": True, "Q4": True, "Q5": False, "Q6": False}
    return _build(nodes, edges, labels)
