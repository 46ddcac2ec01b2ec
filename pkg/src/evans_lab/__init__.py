"""Evans-function shooting for travelling waves with Magnus, exponential
midpoint and Gauss-Legendre integrators, plus error estimates and sweeps."""

from .evans import EvansResult, evans_asymptotic, evans_fn, evans_reference
from .integrators import StepperKind
from .problem import WaveProblem, fisher_problem, get_problem, region_check, spectral_context

__all__ = [
    "EvansResult",
    "StepperKind",
    "WaveProblem",
    "evans_asymptotic",
    "evans_fn",
    "evans_reference",
    "fisher_problem",
    "get_problem",
    "region_check",
    "spectral_context",
]
