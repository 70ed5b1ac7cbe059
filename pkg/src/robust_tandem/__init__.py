"""Minimax robust detection and social learning in tandem chains of agents."""

from .engine import (
    AsymptoticError,
    ChainConfig,
    ConstantEps,
    ExplicitEps,
    HarmonicEps,
    StageError,
    asymptotic_error,
    learnability_check,
    phi_delta_scheme,
    propagate,
    social_trajectory,
)
from .estimators import LFDTransformer, RobustTandemClassifier
from .exceptions import (
    ClassesNotDisjointError,
    ConfigError,
    DegeneratePosteriorError,
    DomainError,
    DominanceViolationError,
    NoContractionError,
    RobustTandemError,
    SchemeInapplicableError,
    VerificationError,
)
from .lfd import (
    LFDPair,
    UncertaintySpec,
    clipped_lr,
    lfd_density,
    lfd_event_prob,
    lfd_from,
    nominal_event_prob,
    sample_lfd,
    solve_breakpoints,
)
from .models import DiscretePMF, ExponentialMeans, GaussianShift, NominalPair, model_from_dict
from .optimize import (
    OptimizationReport,
    optimize_asymptotic_dd,
    optimize_finite_dd,
    optimize_unknown_sl,
)
from .rules import FirstAgentRule, Priors, RelayRule, first_agent_rule, kernel_prob, social_rule
from .simulation import (
    ContaminationSpec,
    SimResult,
    adversarial_search,
    ordering_check,
    simulate_chain,
    tail_bound_check,
)

__version__ = "0.1.0"


__all__ = [
    "AsymptoticError",
    "ChainConfig",
    "ClassesNotDisjointError",
    "ConfigError",
    "ConstantEps",
    "ContaminationSpec",
    "DegeneratePosteriorError",
    "DiscretePMF",
    "DomainError",
    "DominanceViolationError",
    "ExplicitEps",
    "ExponentialMeans",
    "FirstAgentRule",
    "GaussianShift",
    "HarmonicEps",
    "LFDPair",
    "LFDTransformer",
    "NoContractionError",
    "NominalPair",
    "OptimizationReport",
    "Priors",
    "RelayRule",
    "RobustTandemClassifier",
    "RobustTandemError",
    "SchemeInapplicableError",
    "SimResult",
    "StageError",
    "UncertaintySpec",
    "VerificationError",
    "adversarial_search",
    "asymptotic_error",
    "clipped_lr",
    "first_agent_rule",
    "kernel_prob",
    "learnability_check",
    "lfd_density",
    "lfd_event_prob",
    "lfd_from",
    "model_from_dict",
    "nominal_event_prob",
    "optimize_asymptotic_dd",
    "optimize_finite_dd",
    "optimize_unknown_sl",
    "ordering_check",
    "phi_delta_scheme",
    "propagate",
    "sample_lfd",
    "simulate_chain",
    "social_rule",
    "social_trajectory",
    "solve_breakpoints",
    "tail_bound_check",
]
