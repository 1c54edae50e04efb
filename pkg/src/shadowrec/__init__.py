"""shadowrec - exact shadows of perturbed linear recurrences"""

__version__ = "0.1.0"
__author__ = "shadowrec contributors"
__description__ = "Hyers-Ulam shadowing of x_{n+1} = a_n x_n + b_n with verified error sets"

# Numeric model
from .core import (
    Field,
    Seminorm,
    SeminormFamily,
    CoefficientSpec,
    ForcingSpec,
    Regime,
    ShadowrecError
)

# Sets and recurrences
from .sets import BoundSet, HullRep, symmetric_convex_hull, contains, gauge
from .recurrence import Orbit, PseudoOrbit, Sampler, propagate, closed_form, generate_pseudo_orbit

# Constructions
from .shadowing import (
    ShadowResult,
    classify_regime,
    construct_shadow,
    shadow_expanding,
    shadow_constant_expanding,
    shadow_contracting,
    shadow_constant_contracting,
    uniqueness_divergence,
    remark_audit
)

# Configuration, reports and batch runs
from .config import ConfigError, RunConfig, load_run_config
from .reports import Report
from .batch import BatchVerifier
from .cli import CLIError, main

__all__ = [
    # Numeric model
    "Field",
    "Seminorm",
    "SeminormFamily",
    "CoefficientSpec",
    "ForcingSpec",
    "Regime",
    "ShadowrecError",

    # Sets and recurrences
    "BoundSet",
    "HullRep",
    "symmetric_convex_hull",
    "contains",
    "gauge",
    "Orbit",
    "PseudoOrbit",
    "Sampler",
    "propagate",
    "closed_form",
    "generate_pseudo_orbit",

    # Constructions
    "ShadowResult",
    "classify_regime",
    "construct_shadow",
    "shadow_expanding",
    "shadow_constant_expanding",
    "shadow_contracting",
    "shadow_constant_contracting",
    "uniqueness_divergence",
    "remark_audit",

    # Config, reports, batch, CLI
    "ConfigError",
    "RunConfig",
    "load_run_config",
    "Report",
    "BatchVerifier",
    "CLIError",
    "main",

    # Meta
    "__version__",
    "__author__",
    "__description__"
]
