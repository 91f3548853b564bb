"""Traveling vortex rings as maximizers of the penalized energy.

Maximizers of E_2[ξ] = E[ξ] - ∫ξ² over the class
{ξ >= 0, ½∫r²ξ = μ, ∫ξ <= 1} satisfy ξ = (ψ[ξ] - ½Wr² - γ)_+ with
multipliers W > 0 (speed) and γ >= 0 (flux constant).  The solver iterates

    ξ <- (1 - ω) ξ + ω · steiner[(ψ[ξ] - ½W r² - γ)_+],

choosing (W, γ) each time so that the bracketed profile lies in the
admissible class, and halving ω whenever E_2 drops.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import biot_savart
from .errors import ConvergenceError, DomainError, InfeasibleError, ResolutionError, SupportError
from .fields import HalfPlaneGrid, ScalarField, impulse, mass, support_margin
from .kernel import FractionalOrder
from .rearrange import ball_indicator, scale_impulse_preserving, steiner, symmetric_decreasing_defects

log = logging.getLogger(__name__)

_XTOL = 1e-15


@dataclass(frozen=True)
class Multipliers:
    W: float
    gamma: float
    mass_binding: bool


def _profile(psi, half_r2, W, gamma):
    return np.maximum(psi - W * half_r2 - gamma, 0.0)


def multiplier_solve(psi: ScalarField, mu: float, tol: float = _XTOL) -> Multipliers:
    """Find (W, γ) so that (ψ - ½Wr² - γ)_+ has impulse μ and mass <= 1.

    Impulse and mass both decrease in W and in γ, so nested bracketing
    root finds suffice: first W at γ = 0; if the mass then exceeds one,
    γ is raised (with W re-solved for the impulse) until the mass is one.
    """
    if not mu > 0:
        raise DomainError(f"impulse target must be positive, got {mu}")
    g = psi.grid
    v = psi.values
    vol = g.cell_volumes()
    half_r2 = 0.5 * (g.r**2)[:, None]
    w_imp = half_r2 * vol

    def imp(W, gam):
        return float(np.sum(_profile(v, half_r2, W, gam) * w_imp))

    def mas(W, gam):
        return float(np.sum(_profile(v, half_r2, W, gam) * vol))

    if imp(0.0, 0.0) <= mu:
        raise InfeasibleError(f"no W > 0 reaches impulse {mu}: stream function too weak on this box")
    W_hi = float(np.max(v / half_r2))

    def W_of(gam):
        if imp(0.0, gam) <= mu:
            return 0.0
        return brentq(lambda W: imp(W, gam) - mu, 0.0, W_hi, xtol=tol * W_hi, rtol=4 * np.finfo(float).eps)

    W0 = W_of(0.0)
    if mas(W0, 0.0) <= 1.0:
        return Multipliers(W0, 0.0, False)
    # largest γ for which some W >= 0 still reaches μ
    gam_max = brentq(lambda gm: imp(0.0, gm) - mu, 0.0, float(v.max()), xtol=tol * float(v.max()))
    if mas(0.0, gam_max) > 1.0:
        raise InfeasibleError(f"impulse {mu} cannot be met with mass <= 1 on this box")
    gam = brentq(lambda gm: mas(W_of(gm), gm) - 1.0, 0.0, gam_max, xtol=tol * gam_max,
                 rtol=4 * np.finfo(float).eps)
    return Multipliers(W_of(gam), gam, True)


@dataclass
class SolverOptions:
    tol: float = 1e-6
    e2_tol: float = 1e-10
    max_iter: int = 2000
    omega: float = 0.5
    omega_min: float = 1.0 / 1024
    transient: int = 10
    seed_profile: str = "ball"
    rule: str = "cell-average"
    min_support_cells: int = 4
    min_margin_cells: int = 4


@dataclass
class TravelingWave:
    xi: ScalarField
    W: float
    gamma: float
    mu: float
    order: FractionalOrder
    residual: float
    E2_value: float
    iterations: int
    mass_binding: bool = False
    history: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        g = self.xi.grid
        return {
            "a": self.order.a,
            "c_a": self.order.c_a,
            "mu": self.mu,
            "W": self.W,
            "gamma": self.gamma,
            "E2": self.E2_value,
            "residual": self.residual,
            "iterations": self.iterations,
            "mass": mass(self.xi),
            "impulse": impulse(self.xi),
            "branch": "mass-binding" if self.mass_binding else "mass-slack",
            "support_margin": support_margin(self.xi),
            "grid": {"r_max": g.r_max, "z_max": g.z_max, "n_r": g.n_r, "n_z": g.n_z},
        }


def _energy_parts(psi, xi, vol):
    E = float(np.sum(psi * xi * vol))
    L2 = float(np.sum(xi * xi * vol))
    return E, E - L2


def seed_profile(order: FractionalOrder, mu: float, grid: HalfPlaneGrid, kind: str = "ball",
                 rule: str = "cell-average") -> ScalarField:
    """Admissible starting field with impulse μ and mass <= 1.

    ``ball``: the indicator of the centred ball with impulse μ, rescaled by
    ξ_σ = σ^5 ξ(σx) with σ maximizing E_2[ξ_σ] = σ^{5-2a}(E - σ^{2+2a}∫ξ²)
    subject to the mass bound.  ``gaussian``: a Gaussian torus inside that
    ball, scaled to impulse μ and capped in mass the same way.
    """
    a = order.a
    rho = (15.0 * mu / (4.0 * math.pi)) ** 0.2
    if kind == "ball":
        base = ball_indicator(grid, rho)
    elif kind == "gaussian":
        R0 = 0.6 * rho
        d = 0.3 * rho
        base = ScalarField.from_function(
            grid, lambda r, z: np.exp(-((r - R0) ** 2 + z**2) / d**2) * (r * r + z * z <= rho * rho), True)
    else:
        raise DomainError(f"unknown seed profile {kind!r}")
    if not np.any(base.values > 0):
        raise ResolutionError("seed profile is unresolved on this grid")
    base = base.with_values(base.values * (mu / impulse(base)))
    vol = grid.cell_volumes()
    psi = biot_savart.stream(order, base, rule)
    E, E2 = _energy_parts(psi, base.values, vol)
    L2 = E - E2
    sigma = min(((5 - 2 * a) * E / (7 * L2)) ** (1.0 / (2 + 2 * a)), 1.0)
    sigma = min(sigma, math.sqrt(1.0 / mass(base)))
    xi = _rescale_into_class(base, sigma, mu)
    return xi


def _rescale_into_class(xi: ScalarField, sigma: float, mu: float) -> ScalarField:
    for _ in range(60):
        out = scale_impulse_preserving(xi, sigma) if sigma != 1.0 else xi
        # bilinear resampling perturbs the impulse slightly; restore it exactly
        out = out.with_values(out.values * (mu / impulse(out)))
        if mass(out) <= 1.0:
            return out
        sigma *= 0.98
    raise InfeasibleError("could not bring the seed profile to mass <= 1")


def prepare_initial(xi0: ScalarField, mu: float) -> ScalarField:
    """Normalize a user-supplied nonnegative field into the admissible class."""
    if np.any(xi0.values < 0):
        raise DomainError("initial vorticity must be nonnegative")
    if impulse(xi0) <= 0:
        raise DomainError("initial vorticity has zero impulse")
    xi = xi0.with_values(xi0.values * (mu / impulse(xi0)), nonnegative=True)
    if mass(xi) > 1.0:
        xi = _rescale_into_class(xi, math.sqrt(1.0 / mass(xi)), mu)
    return xi


def _check_support(xi: ScalarField, opts: SolverOptions):
    g = xi.grid
    margin = support_margin(xi)
    if margin < opts.min_margin_cells * max(g.h_r, g.h_z):
        raise SupportError(f"wave support reaches the box boundary (margin {margin:.3g}); enlarge the box")
    mask = xi.values > 0
    n_r_cells = int(mask.any(axis=1).sum())
    n_z_cells = int(mask.any(axis=0).sum())
    if min(n_r_cells, n_z_cells) < opts.min_support_cells:
        raise ResolutionError(f"wave spans only {n_r_cells}x{n_z_cells} cells; refine the grid")


def solve_traveling_wave(order: FractionalOrder, mu: float, grid: HalfPlaneGrid,
                         opts: SolverOptions | None = None, init: ScalarField | None = None,
                         callback=None) -> TravelingWave:
    opts = opts or SolverOptions()
    if not mu > 0:
        raise DomainError(f"impulse target must be positive, got {mu}")
    if not 0 < opts.omega <= 1:
        raise DomainError(f"relaxation omega must lie in (0, 1], got {opts.omega}")
    if init is None:
        xi = seed_profile(order, mu, grid, opts.seed_profile, opts.rule)
    else:
        xi = prepare_initial(init, mu)
    op = biot_savart.get_operator(order, grid, opts.rule)
    vol = grid.cell_volumes()
    half_r2 = 0.5 * (grid.r**2)[:, None]

    def image(values):
        psi = op.apply(values)
        E, E2 = _energy_parts(psi, values, vol)
        m = multiplier_solve(ScalarField(grid, psi), mu)
        target = _profile(psi, half_r2, m.W, m.gamma)
        norm = math.sqrt(float(np.sum(values**2 * vol))) or 1.0
        res = math.sqrt(float(np.sum((target - values) ** 2 * vol))) / norm
        return E2, m, target, res

    history = []
    omega = opts.omega
    cur = xi.values
    E2, m, target, res = image(cur)
    prev_E2 = None
    for it in range(opts.max_iter + 1):
        rec = {"iteration": it, "E2": E2, "W": m.W, "gamma": m.gamma, "residual": res,
               "omega": omega, "mass": float(np.sum(cur * vol))}
        history.append(rec)
        if callback is not None:
            callback(rec)
        if prev_E2 is not None and res < opts.tol and abs(E2 - prev_E2) <= opts.e2_tol * abs(E2):
            break
        if it == opts.max_iter:
            raise ConvergenceError(f"no convergence in {opts.max_iter} iterations (residual {res:.3e})", history)
        sym = steiner(ScalarField(grid, target, True)).values
        while True:
            trial = (1.0 - omega) * cur + omega * sym
            tE2, tm, ttarget, tres = image(trial)
            if it < opts.transient or tE2 >= E2 - opts.e2_tol * abs(E2):
                break
            omega *= 0.5
            log.debug("E2 decreased at iteration %d; omega -> %g", it, omega)
            if omega < opts.omega_min:
                raise ConvergenceError(f"E2 decreased at iteration {it} even with omega < {opts.omega_min}",
                                       history)
        prev_E2 = E2
        cur, E2, m, target, res = trial, tE2, tm, ttarget, tres
    # one undamped step so that the support is exactly {Ψ > 0}
    final = steiner(ScalarField(grid, target, True)).values
    fE2, fm, _, fres = image(final)
    if fres > max(res, opts.tol):
        final, fE2, fm, fres = cur, E2, m, res
    wave = ScalarField(grid, final, True)
    _check_support(wave, opts)
    return TravelingWave(wave, fm.W, fm.gamma, mu, order, fres, fE2, len(history) - 1, fm.mass_binding, history)


# ---------------------------------------------------------------------------
# verification


@dataclass
class FirstOrderReport:
    max_defect_on_support: float
    max_positive_off_support: float
    W_positive: bool
    gamma_nonnegative: bool
    evenness_defect: float
    monotonicity_defect: float
    support_margin: float
    speed_identity_defect: float
    W_mass: float
    vz_moment: float
    ok: bool

    def as_dict(self) -> dict:
        return asdict(self)


def verify_first_order(tw: TravelingWave, tol: float = 1e-5, identity_tol: float = 1e-3,
                       rule: str = "cell-average") -> FirstOrderReport:
    """Check ξ = Ψ_+ and the other properties of a computed wave.

    Pointwise defects are relative to max ξ.  The speed identity compares
    W ∫ξ dx with ∫ v^z ξ dx, which holds for any ξ = Ψ_+.
    """
    xi = tw.xi
    g = xi.grid
    vol = g.cell_volumes()
    psi = biot_savart.compute_stream(tw.order, xi, rule).psi
    Psi = psi.values - 0.5 * tw.W * (g.r**2)[:, None] - tw.gamma
    v = xi.values
    scale = float(v.max()) or 1.0
    on = v > 0
    d_on = float(np.max(np.abs(Psi - v)[on], initial=0.0)) / scale
    d_off = float(np.max(np.maximum(Psi, 0.0)[~on], initial=0.0)) / scale
    even, mono = symmetric_decreasing_defects(xi)
    vel = biot_savart.velocity_from_stream(psi)
    W_mass = tw.W * float(np.sum(v * vol))
    vz_mom = float(np.sum(vel.v_z * v * vol))
    ident = abs(W_mass - vz_mom) / max(abs(vz_mom), 1e-300)
    margin = support_margin(xi)
    ok = (d_on <= tol and d_off <= tol and tw.W > 0 and tw.gamma >= 0 and even <= tol
          and mono <= tol and margin > 0 and ident <= identity_tol)
    return FirstOrderReport(d_on, d_off, tw.W > 0, tw.gamma >= 0, even, mono, margin, ident,
                            W_mass, vz_mom, bool(ok))
