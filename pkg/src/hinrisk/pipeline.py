"""End-to-end assembly: risk inference, feature matrices and method comparison.

The CLI and the timestamp sweep both go through :func:`evaluate`.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import DataError, NoLabeledNodes
from .evalharness import ComparisonReport, compare_methods
from .hin import Hin, Schema, as_of
from .metapath import MetaPath, enumerate_metapaths, read_metapaths
from .mpfeatures import KINDS, AttributeSpec, FeatureMatrix, HeteSimEngine, build_feature_matrix, feature_specs
from .riskbayes import fit_all, impute_labels, risk_indicators

__all__ = [
    "MP_METHODS",
    "BASELINES",
    "KIND_METHOD",
    "PipelineConfig",
    "PipelineResult",
    "candidate_paths",
    "infer_risk",
    "attribute_matrix",
    "homogeneous_paths",
    "method_matrices",
    "enterprise_labels",
    "evaluate",
]

KIND_METHOD = {"naive": "Naive MP", "countsim": "CountSim MP", "hetesim": "HeteSim MP"}
MP_METHODS = tuple(KIND_METHOD[k] for k in KINDS)
BASELINES = ("SME CV", "SME HPF")


@dataclass(frozen=True)
class PipelineConfig:
    max_relations: int = 5
    max_paths: int | None = 40
    feature_kinds: tuple[str, ...] = KINDS
    alpha: float = 1.0
    threshold: float = 0.75
    top_k: int = 10
    folds: int = 5
    seed: int = 0
    as_of: tuple[int, int] | None = None
    workers: int = 1
    joint_wald: bool = True
    in_sample: bool = False
    metric: str = "auc"
    allow_backtracking: bool = False
    root_type: str = "enterprise"
    paths_file: str | None = None

    def __post_init__(self):
        kinds = tuple(self.feature_kinds)
        object.__setattr__(self, "feature_kinds", kinds)
        if not kinds or any(k not in KINDS for k in kinds):
            raise ValueError(f"feature kinds must be drawn from {KINDS}, got {kinds}")
        if self.as_of is not None:
            object.__setattr__(self, "as_of", (int(self.as_of[0]), int(self.as_of[1])))
        if self.max_relations < 1:
            raise ValueError("max_relations must be >= 1")
        if self.top_k < 1 or self.folds < 2 or self.workers < 1:
            raise ValueError("top_k and workers must be >= 1 and folds >= 2")
        if not 0.5 < self.threshold <= 1.0:
            raise ValueError("threshold must lie in (0.5, 1]")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature_kinds"] = list(self.feature_kinds)
        d["as_of"] = list(self.as_of) if self.as_of is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys {unknown}")
        d = dict(d)
        if isinstance(d.get("feature_kinds"), str):
            d["feature_kinds"] = tuple(k.strip() for k in d["feature_kinds"].split(",") if k.strip())
        if isinstance(d.get("as_of"), str):
            d["as_of"] = parse_window(d["as_of"])
        return cls(**d)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def parse_window(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(-?\d+)\s*:\s*(-?\d+)\s*", text)
    if not m:
        raise ValueError(f"window must look like START:END, got {text!r}")
    return int(m.group(1)), int(m.group(2))


@dataclass
class PipelineResult:
    hin: Hin
    paths: list[MetaPath]
    risk: dict[str, bool]
    matrices: dict[str, FeatureMatrix]
    labels: dict[str, bool]
    report: ComparisonReport
    models: dict = field(default_factory=dict, repr=False)


def candidate_paths(schema: Schema, config: PipelineConfig = PipelineConfig()) -> list[MetaPath]:
    """Meta paths from the root type in shortlex order, truncated to ``max_paths``."""
    if config.paths_file:
        paths = read_metapaths(config.paths_file, schema)
    else:
        root = schema.object_type(config.root_type)
        paths = enumerate_metapaths(schema, root, config.max_relations, config.allow_backtracking)
    if config.max_paths is not None:
        paths = paths[: config.max_paths]
    return paths


def infer_risk(hin: Hin, alpha: float = 1.0, threshold: float = 0.75):
    """Fit per-type models, impute missing labels and return ``(hin, models, risk)``."""
    models = fit_all(hin, alpha)
    labeled = impute_labels(hin, models, threshold, strict=False)
    return labeled, models, risk_indicators(labeled, models)


def _level_code(level: str, levels: tuple[str, ...]) -> float:
    m = re.fullmatch(r"q(\d+)", level)
    if m and all(re.fullmatch(r"q\d+", v) for v in levels):
        return float(m.group(1))
    return float(levels.index(level))


def attribute_matrix(hin: Hin, otype="enterprise") -> FeatureMatrix:
    """Own-attribute baseline: one ordinal column per attribute."""
    rows = hin.nodes_of_type(otype)
    registry = hin.attribute_registry(otype)
    specs = [AttributeSpec(a) for a in registry]
    values = np.full((len(rows), len(specs)), np.nan)
    for i, nid in enumerate(rows):
        attrs = hin.nodes[nid].attributes
        for j, a in enumerate(registry):
            if a in attrs:
                values[i, j] = _level_code(attrs[a], registry[a])
    return FeatureMatrix(rows, specs, values)


def homogeneous_paths(schema: Schema, root_type="enterprise") -> list[MetaPath]:
    """Single-relation paths from the root type back to itself."""
    root = schema.object_type(root_type) if isinstance(root_type, str) else root_type
    return [MetaPath((r,)) for r in schema.out_relations(root) if r.target == root]


def method_matrices(
    hin: Hin,
    paths: list[MetaPath],
    risk,
    config: PipelineConfig = PipelineConfig(),
    include_baselines: bool = True,
) -> dict[str, FeatureMatrix]:
    engine = HeteSimEngine(hin)
    out = {}
    if include_baselines:
        if hin.attribute_registry(config.root_type):
            out["SME CV"] = attribute_matrix(hin, config.root_type)
        hom = homogeneous_paths(hin.schema, config.root_type)
        if hom:
            out["SME HPF"] = build_feature_matrix(hin, feature_specs(hom, "naive"), risk, engine, config.workers)
    for kind in config.feature_kinds:
        out[KIND_METHOD[kind]] = build_feature_matrix(hin, feature_specs(paths, kind), risk, engine, config.workers)
    return out


def enterprise_labels(hin: Hin, otype="enterprise") -> dict[str, bool]:
    """Observed (not imputed) labels of the root type."""
    out = {}
    for nid in hin.nodes_of_type(otype):
        n = hin.nodes[nid]
        if n.risk_label is not None and n.label_source != "imputed":
            out[nid] = bool(n.risk_label)
    return out


def evaluate(hin: Hin, config: PipelineConfig = PipelineConfig(), include_baselines: bool = True) -> PipelineResult:
    """Run risk inference, build every method's features and compare them."""
    if config.as_of is not None:
        hin = as_of(hin, *config.as_of)
    labels = enterprise_labels(hin, config.root_type)
    if not labels:
        raise NoLabeledNodes(f"no labeled {config.root_type} nodes")
    paths = candidate_paths(hin.schema, config)
    if not paths:
        raise DataError("no candidate meta paths")
    labeled, models, risk = infer_risk(hin, config.alpha, config.threshold)
    mats = method_matrices(labeled, paths, risk, config, include_baselines)
    rows = [i for i, nid in enumerate(next(iter(mats.values())).row_ids) if nid in labels]
    mats = {m: fm.take_rows(rows) for m, fm in mats.items()}
    report = compare_methods(
        mats,
        labels,
        k=config.top_k,
        folds=config.folds,
        seed=config.seed,
        joint=config.joint_wald,
        in_sample=config.in_sample,
        metric=config.metric,
    )
    return PipelineResult(labeled, paths, risk, mats, labels, report, models)


def with_overrides(config: PipelineConfig, **kw) -> PipelineConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
