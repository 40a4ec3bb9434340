"""Desk-scale laboratory for large-friction limits of kinetic swarming models.

Three solvers (kinetic phase-space, pressureless Euler particles, aggregation
particles) share one set of potentials and are compared through exact 1-d
Wasserstein metrology, energy/entropy functionals, and sweep harnesses.
"""

__version__ = "0.1.0"

from .errors import FrictionLabError
from .measures import DensityProfile, ParticleEnsemble
from .potentials import (
    ConfinementSpec,
    GaussianKernel,
    HypothesisReport,
    InteractionKernel,
    QuadraticKernel,
    TabulatedKernel,
    check_hypothesis,
    convolve_grad,
    estimate_cW,
    eval_confinement_grad,
    eval_kernel_grad,
    load_tabulated_kernel,
)
from .transport import quantile, w2_discrete_exact, wasserstein_1d

__all__ = [
    "ConfinementSpec",
    "DensityProfile",
    "FrictionLabError",
    "GaussianKernel",
    "HypothesisReport",
    "InteractionKernel",
    "ParticleEnsemble",
    "QuadraticKernel",
    "TabulatedKernel",
    "check_hypothesis",
    "convolve_grad",
    "estimate_cW",
    "eval_confinement_grad",
    "eval_kernel_grad",
    "load_tabulated_kernel",
    "quantile",
    "w2_discrete_exact",
    "wasserstein_1d",
    "__version__",
]
