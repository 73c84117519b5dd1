"""Naive Bayes risk inference for individual objects.

Each object type gets its own categorical model over the object's
discretized attributes.  Posteriors are accumulated in log space in sorted
attribute-name order.  News objects carry their risk directly in their
polarity label and never go through the model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import MissingModel, NoLabeledNodes, SingleClassError, UnknownAttribute
from .hin import Hin, Node, ObjectType

__all__ = [
    "NaiveBayesModel",
    "RiskAssessment",
    "fit_nb",
    "fit_all",
    "posterior",
    "posterior_complement",
    "gamma",
    "assess",
    "impute_labels",
    "risk_indicators",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

NEWS = "news"


@dataclass(frozen=True)
class NaiveBayesModel:
    """Class priors and Laplace-smoothed per-level likelihoods.

    ``likelihoods[attr][level]`` is ``(P(level | y=0), P(level | y=1))`` and
    ``class_counts[attr]`` the number of labeled nodes of each class that
    carry the attribute.
    """

    otype: str
    alpha: float
    priors: tuple[float, float]
    registry: Mapping[str, tuple[str, ...]]
    class_counts: Mapping[str, tuple[int, int]]
    likelihoods: Mapping[str, Mapping[str, tuple[float, float]]] = field(repr=False)

    def likelihood(self, attr: str, level: str, y: int) -> float:
        try:
            table = self.likelihoods[attr]
        except KeyError:
            raise UnknownAttribute(f"attribute {attr!r} is not in the {self.otype} registry") from None
        p = table.get(level)
        if p is not None:
            return p[y]
        n_levels = len(self.registry[attr])
        return self.alpha / (self.class_counts[attr][y] + self.alpha * n_levels)


@dataclass(frozen=True)
class RiskAssessment:
    node_id: str
    posterior: float
    gamma: bool
    source: str  # "observed-label" | "inferred" | "news-polarity"


def fit_nb(hin: Hin, otype, alpha: float = 1.0) -> NaiveBayesModel:
    """Fit priors and smoothed likelihoods from the labeled nodes of ``otype``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    name = otype.name if isinstance(otype, ObjectType) else otype
    labeled = [hin.nodes[i] for i in hin.nodes_of_type(name) if hin.nodes[i].risk_label is not None]
    if not labeled:
        raise NoLabeledNodes(f"no labeled {name} nodes")
    n1 = sum(1 for n in labeled if n.risk_label)
    n0 = len(labeled) - n1
    if n0 == 0 or n1 == 0:
        raise SingleClassError(f"{name} labels contain a single class")

    registry = hin.attribute_registry(name)
    counts: dict[str, tuple[int, int]] = {}
    tables: dict[str, dict[str, tuple[float, float]]] = {}
    for attr, levels in registry.items():
        c = {lvl: [0, 0] for lvl in levels}
        tot = [0, 0]
        for n in labeled:
            lvl = n.attributes.get(attr)
            if lvl is None:
                continue
            y = int(n.risk_label)
            c[lvl][y] += 1
            tot[y] += 1
        k = len(levels)
        counts[attr] = (tot[0], tot[1])
        tables[attr] = {
            lvl: tuple((c[lvl][y] + alpha) / (tot[y] + alpha * k) for y in (0, 1)) for lvl in levels
        }
    return NaiveBayesModel(name, float(alpha), (n0 / len(labeled), n1 / len(labeled)), registry, counts, tables)


def fit_all(hin: Hin, alpha: float = 1.0, skip_errors: bool = True) -> dict[str, NaiveBayesModel]:
    """One model per non-news object type that has labels of both classes."""
    models = {}
    for t in hin.schema.object_types:
        if t.name == NEWS:
            continue
        try:
            models[t.name] = fit_nb(hin, t, alpha)
        except (NoLabeledNodes, SingleClassError):
            if not skip_errors:
                raise
    return models


def _attributes(x):
    return x.attributes if isinstance(x, Node) else x


def _log_joint(model: NaiveBayesModel, x, y: int) -> float:
    s = math.log(model.priors[y])
    attrs = _attributes(x)
    for attr in sorted(attrs):
        s += math.log(model.likelihood(attr, attrs[attr], y))
    return s


def posterior(model: NaiveBayesModel, x) -> float:
    """``P(y=1 | x)``; ``x`` is a :class:`Node` or an attribute mapping."""
    d = _log_joint(model, x, 0) - _log_joint(model, x, 1)
    # logistic of the log-odds, written to avoid overflow on both sides
    if d >= 0:
        z = math.exp(-d)
        return z / (1.0 + z)
    return 1.0 / (1.0 + math.exp(d))


def posterior_complement(model: NaiveBayesModel, x) -> float:
    """``P(y=0 | x)``, computed from its own log-odds."""
    d = _log_joint(model, x, 1) - _log_joint(model, x, 0)
    if d >= 0:
        z = math.exp(-d)
        return z / (1.0 + z)
    return 1.0 / (1.0 + math.exp(d))


def gamma(model: NaiveBayesModel | None, x: Node) -> bool:
    """Binary risk indicator; strictly above one half counts as risky."""
    if isinstance(x, Node) and x.otype.name == NEWS:
        return bool(x.risk_label)
    return posterior(model, x) > 0.5


def assess(hin: Hin, models: Mapping[str, NaiveBayesModel]) -> dict[str, RiskAssessment]:
    out = {}
    for nid, n in hin.nodes.items():
        if n.otype.name == NEWS:
            g = bool(n.risk_label)
            out[nid] = RiskAssessment(nid, float(g), g, "news-polarity")
            continue
        model = models.get(n.otype.name)
        p = posterior(model, n) if model is not None else float("nan")
        if n.risk_label is not None and n.label_source != "imputed":
            out[nid] = RiskAssessment(nid, p, bool(n.risk_label), "observed-label")
        elif model is None:
            raise MissingModel(f"no model for object type {n.otype.name!r}")
        else:
            out[nid] = RiskAssessment(nid, p, p > 0.5, "inferred")
    return out


def impute_labels(
    hin: Hin, models: Mapping[str, NaiveBayesModel], threshold: float = 0.75, strict: bool = True
) -> Hin:
    """Label every unlabeled non-news node as risky iff its posterior exceeds ``threshold``.

    With ``strict=False`` nodes of a type that has no model stay unlabeled
    instead of raising :class:`MissingModel`.
    """
    if not 0.5 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0.5, 1]")
    new = {}
    for nid, n in hin.nodes.items():
        if n.risk_label is not None or n.otype.name == NEWS:
            continue
        model = models.get(n.otype.name)
        if model is None:
            if not strict:
                continue
            raise MissingModel(f"no model for unlabeled {n.otype.name} node {nid!r}")
        new[nid] = posterior(model, n) > threshold
    if not new:
        return hin
    return hin.with_labels(new, source="imputed")


def risk_indicators(hin: Hin, models: Mapping[str, NaiveBayesModel] | None = None) -> dict[str, bool]:
    """Gamma for every node: its label when present, else the model's call.

    Unlabeled news and nodes without a model count as not risky.
    """
    out = {}
    models = models or {}
    for nid, n in hin.nodes.items():
        if n.risk_label is not None:
            out[nid] = bool(n.risk_label)
        elif n.otype.name != NEWS and n.otype.name in models:
            out[nid] = gamma(models[n.otype.name], n)
        else:
            out[nid] = False
    return out


# -- serialization -----------------------------------------------------------


def model_to_dict(model: NaiveBayesModel) -> dict:
    return {
        "otype": model.otype,
        "alpha": model.alpha,
        "priors": {"0": model.priors[0], "1": model.priors[1]},
        "registry": {k: list(v) for k, v in model.registry.items()},
        "class_counts": {k: list(v) for k, v in model.class_counts.items()},
        "likelihoods": {
            a: {lvl: {"0": p[0], "1": p[1]} for lvl, p in t.items()} for a, t in model.likelihoods.items()
        },
    }


def model_from_dict(d: dict) -> NaiveBayesModel:
    return NaiveBayesModel(
        otype=d["otype"],
        alpha=float(d["alpha"]),
        priors=(float(d["priors"]["0"]), float(d["priors"]["1"])),
        registry={k: tuple(v) for k, v in d["registry"].items()},
        class_counts={k: (int(v[0]), int(v[1])) for k, v in d["class_counts"].items()},
        likelihoods={
            a: {lvl: (float(p["0"]), float(p["1"])) for lvl, p in t.items()} for a, t in d["likelihoods"].items()
        },
    )


def save_model(model: NaiveBayesModel, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> NaiveBayesModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
