"""Energy, penalized energy and membership in the admissible classes."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .biot_savart import stream
from .fields import ScalarField, impulse, lp_norm, mass, weighted_integral
from .kernel import FractionalOrder


def energy(order: FractionalOrder, xi: ScalarField, rule: str = "cell-average") -> float:
    """E[ξ] = ∫ ψ ξ dx with ψ = 𝒢_a[ξ]."""
    psi = stream(order, xi, rule)
    return float(np.sum(psi * xi.values * xi.grid.cell_volumes()))


def bilinear_energy(order: FractionalOrder, xi1: ScalarField, xi2: ScalarField,
                    rule: str = "cell-average") -> float:
    """∫ 𝒢_a[ξ1] ξ2 dx."""
    psi = stream(order, xi1, rule)
    return float(np.sum(psi * xi2.values * xi2.grid.cell_volumes()))


def penalized_energy(order: FractionalOrder, xi: ScalarField, rule: str = "cell-average") -> float:
    """E_2[ξ] = E[ξ] - ∫ ξ² dx."""
    return energy(order, xi, rule) - weighted_integral(xi, "self")


@dataclass(frozen=True)
class AdmissibleReport:
    impulse_value: float
    mass_value: float
    l2_norm: float
    in_K_mu: bool
    in_K_mu_prime: bool
    mu: float

    def as_dict(self) -> dict:
        return asdict(self)


def check_admissible(xi: ScalarField, mu: float, rel_tol: float = 1e-8,
                     sign_tol: float = 1e-12) -> AdmissibleReport:
    """Membership of ξ in K_μ (impulse = μ) and K_μ' (impulse <= μ).

    Both classes require ξ >= 0 (up to ``sign_tol``) and mass <= 1.
    """
    I = impulse(xi)
    M = mass(xi)
    nonneg = bool(np.all(xi.values >= -sign_tol))
    mass_ok = M <= 1.0 + rel_tol
    in_prime = nonneg and mass_ok and I <= mu * (1.0 + rel_tol)
    in_k = nonneg and mass_ok and abs(I - mu) <= rel_tol * mu
    return AdmissibleReport(I, M, lp_norm(xi, 2), bool(in_k), bool(in_prime), mu)


def functionals_row(order: FractionalOrder, xi: ScalarField, rule: str = "cell-average") -> dict:
    """E, E_2, impulse, mass and the L^1, L^2, L^∞ norms of one field."""
    E = energy(order, xi, rule)
    return {
        "a": order.a,
        "E": E,
        "E2": E - weighted_integral(xi, "self"),
        "impulse": impulse(xi),
        "mass": mass(xi),
        "L1": lp_norm(xi, 1),
        "L2": lp_norm(xi, 2),
        "Linf": lp_norm(xi, np.inf),
    }
