"""Traveling vortex rings for the fractional axisymmetric active vector system.

Layers: ``kernel`` (the θ-integral F_a and its table), ``fields`` (grids,
fields, integrals, file format), ``biot_savart`` (stream function and
velocity), ``functionals`` (E, E_2, admissibility), ``rearrange``
(Steiner symmetrization, scalings, translation), ``travelwave`` (the
fixed-point solver) and ``evolve`` (semi-Lagrangian transport).
"""
from .errors import (ConvergenceError, DomainError, FormatError, InfeasibleError, NumericalError,
                     ResolutionError, RingwaveError, SingularityError, SupportError, ValidationError)
from .fields import (HalfPlaneGrid, ScalarField, VelocityField, impulse, load_field, lp_norm, mass,
                     save_field, weighted_integral)
from .kernel import FractionalOrder, KernelEval, eval_F, eval_F_prime, eval_G, similarity_variable

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DomainError", "FormatError", "InfeasibleError", "NumericalError",
    "ResolutionError", "RingwaveError", "SingularityError", "SupportError", "ValidationError",
    "HalfPlaneGrid", "ScalarField", "VelocityField", "impulse", "load_field", "lp_norm", "mass",
    "save_field", "weighted_integral",
    "FractionalOrder", "KernelEval", "eval_F", "eval_F_prime", "eval_G", "similarity_variable",
]
