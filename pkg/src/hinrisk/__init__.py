"""Credit-risk features for small enterprises from heterogeneous information networks."""

from .errors import DataError, HinRiskError, InvariantViolation, NumericalError
from .hin import Hin, Schema, as_of, default_sme_schema, load_hin, write_hin
from .metapath import MetaPath, enumerate_metapaths, match_instances, parse_metapath
from .mpfeatures import FeatureMatrix, FeatureSpec, HeteSimEngine, build_feature_matrix, countsim_mp, hetesim_mp, naive_mp
from .riskbayes import fit_nb, posterior
from .creditmodel import fit_logistic, wald_rank
from .evalharness import compare_methods, roc_auc, timestamp_sweep
from .pipeline import PipelineConfig, evaluate
from .synthgen import GenConfig, figure3_fixture, figure5_fixture, generate

__version__ = "0.1.0"

__all__ = [
    "DataError", "HinRiskError", "InvariantViolation", "NumericalError",
    "Hin", "Schema", "as_of", "default_sme_schema", "load_hin", "write_hin",
    "MetaPath", "enumerate_metapaths", "match_instances", "parse_metapath",
    "FeatureMatrix", "FeatureSpec", "HeteSimEngine", "build_feature_matrix", "countsim_mp", "hetesim_mp", "naive_mp",
    "fit_nb", "posterior", "fit_logistic", "wald_rank",
    "compare_methods", "roc_auc", "timestamp_sweep",
    "PipelineConfig", "evaluate",
    "GenConfig", "figure3_fixture", "figure5_fixture", "generate",
]
