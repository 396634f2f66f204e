"""Linked-shrinkage Bayesian regression with all two-way interactions.

The package fits a hierarchical shrinkage prior over main effects and every
admissible pairwise interaction, then explains the fitted model through
exact interventional attribution values and personalized unit-change
effects. A reference least-squares implementation, a synthetic-data
generator, and a repeated-subset evaluation harness round out the toolkit.
"""
from .design import (
    DesignMatrix,
    FeatureMap,
    RawDataset,
    apply_feature_map,
    fit_feature_map,
)
from .diagnostics import Diagnostics, compute_diagnostics
from .errors import DataError, InternalError
from .evaluate import EvalReport, ProtocolConfig, run_protocol, write_report
from .importance import (
    GlobalImportance,
    UnitEffect,
    global_importance,
    unit_effect_posterior,
)
from .model import VARIANTS, ModelSpec, ModelState
from .reference_ols import OlsFit, fit_ols, t_two_sided_p
from .sampler import (
    PosteriorDraws,
    SamplerConfig,
    posterior_summary,
    run_sampler,
)
from .shapley import (
    ShapleyQuery,
    ShapleyResult,
    shapley_bruteforce,
    shapley_fast,
    shapley_posterior,
)
from .synth import (
    MasterData,
    Structure,
    SynthConfig,
    generate_master,
    split_training_sets,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DesignMatrix",
    "Diagnostics",
    "EvalReport",
    "FeatureMap",
    "GlobalImportance",
    "InternalError",
    "MasterData",
    "ModelSpec",
    "ModelState",
    "OlsFit",
    "PosteriorDraws",
    "ProtocolConfig",
    "RawDataset",
    "SamplerConfig",
    "ShapleyQuery",
    "ShapleyResult",
    "Structure",
    "SynthConfig",
    "UnitEffect",
    "VARIANTS",
    "apply_feature_map",
    "compute_diagnostics",
    "fit_feature_map",
    "fit_ols",
    "generate_master",
    "global_importance",
    "posterior_summary",
    "run_protocol",
    "run_sampler",
    "shapley_bruteforce",
    "shapley_fast",
    "shapley_posterior",
    "split_training_sets",
    "t_two_sided_p",
    "unit_effect_posterior",
    "write_report",
    "__version__",
]
