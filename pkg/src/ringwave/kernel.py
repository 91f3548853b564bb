"""Azimuthally integrated fractional Green function.

For the inverse fractional Laplacian ``(-Δ)^{-a}`` in R^3 acting on an
azimuthal vector field, integrating out the angle leaves the half-plane
kernel

    G_a(r, z, rb, zb) = (r rb)^(a - 1/2) F_a(s),
    s = ((r - rb)^2 + (z - zb)^2) / (r rb),
    F_a(s) = ∫_0^π cos θ (2(1 - cos θ) + s)^(-(3-2a)/2) dθ.

F_a is evaluated by adaptive quadrature on geometrically graded panels,
or, for the O(N^2) summations, from a cubic Hermite table in (ln s, ln F)
that carries exact slopes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit
from scipy import integrate
from scipy.special import gamma

from .errors import DomainError, SingularityError

DEFAULT_F_TOL = 1e-10
DEFAULT_FPRIME_TOL = 1e-9


def riesz_constant(a: float) -> float:
    """Normalization of the Riesz potential for (-Δ)^{-a} in R^3."""
    return gamma((3.0 - 2.0 * a) / 2.0) / (4.0**a * math.pi**1.5 * gamma(a))


@dataclass(frozen=True)
class FractionalOrder:
    """Fractional exponent ``a`` in the open interval (1/2, 1).

    ``c_a`` defaults to the Riesz-potential constant; pass a value to
    override the normalization of the stream function.
    """

    a: float
    c_a: float = field(default=float("nan"))

    def __post_init__(self):
        a = float(self.a)
        if not (0.5 < a < 1.0) or not math.isfinite(a):
            raise DomainError(f"fractional order a={self.a!r} must lie in the open interval (1/2, 1)")
        object.__setattr__(self, "a", a)
        c = float(self.c_a)
        if math.isnan(c):
            c = riesz_constant(a)
        if not (c > 0.0 and math.isfinite(c)):
            raise DomainError(f"normalization c_a={self.c_a!r} must be positive and finite")
        object.__setattr__(self, "c_a", c)

    @property
    def p(self) -> float:
        """Exponent (3 - 2a)/2 of the angular integrand."""
        return (3.0 - 2.0 * self.a) / 2.0

    @property
    def exponent_tau_low(self) -> float:
        return 1.0 - self.a

    @property
    def exponent_tau_high(self) -> float:
        return 2.5 - self.a


@dataclass(frozen=True)
class KernelEval:
    value: float
    abs_error_estimate: float

    def __float__(self):
        return self.value


def similarity_variable(r, z, rbar, zbar):
    """s = ((r - rbar)^2 + (z - zbar)^2) / (r rbar); vectorized."""
    r = np.asarray(r, dtype=float)
    rbar = np.asarray(rbar, dtype=float)
    if np.any(r <= 0) or np.any(rbar <= 0):
        raise DomainError("radii must be strictly positive")
    s = ((r - rbar) ** 2 + (np.asarray(z, float) - np.asarray(zbar, float)) ** 2) / (r * rbar)
    return s if s.ndim else float(s)


def _panels(s: float) -> list[float]:
    # the integrand peaks in a window of width ~sqrt(s) around θ = 0
    pts = [0.0]
    b = math.sqrt(s)
    while b < math.pi:
        pts.append(b)
        b *= 4.0
    pts.append(math.pi)
    return pts


def _angular_quad(func, s, epsabs, epsrel):
    total = 0.0
    err = 0.0
    pts = _panels(s)
    npan = len(pts) - 1
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = integrate.quad(func, lo, hi, epsabs=epsabs / npan / 10, epsrel=epsrel / 10, limit=200)
        total += v
        err += e
    return total, err


def _check_s(s):
    s = float(s)
    if not s > 0.0 or not math.isfinite(s):
        raise DomainError(f"similarity variable s={s!r} must be positive and finite")
    return s


def _large_s_series(p: float, s: float, deriv: bool):
    """Binomial expansion of the integrand in powers of 2cosθ/(s+2).

    Only odd powers of cos θ survive the angular integral, and
    ∫_0^π cos^{2m} θ dθ = π (2m-1)!!/(2m)!!.  Converges geometrically with
    ratio (2/(s+2))^2; used where quadrature would lose digits to
    cancellation.
    """
    q = 2.0 / (s + 2.0)
    base = s + 2.0
    total = 0.0
    poch = p  # (p)_k / k! for k = 1
    wallis = 0.5  # (2m-1)!!/(2m)!! for m = 1
    k = 1
    term = 0.0
    while True:
        coef = poch * q**k * math.pi * wallis
        if deriv:
            term = -(p + k) * coef * base ** (-p - 1.0)
        else:
            term = coef * base ** (-p)
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
        # advance k by two: (p)_{k+2}/(k+2)! and the next Wallis ratio
        poch *= (p + k) * (p + k + 1) / ((k + 1) * (k + 2))
        wallis *= (k + 2) / (k + 3)
        k += 2
    return total, abs(term)


LARGE_S = 100.0


def eval_F(order: FractionalOrder, s: float, epsabs: float = DEFAULT_F_TOL,
           epsrel: float = DEFAULT_F_TOL) -> KernelEval:
    s = _check_s(s)
    p = order.p
    if s >= LARGE_S:
        return KernelEval(*_large_s_series(p, s, False))
    ref = (s + 2.0) ** (-p)

    # ∫ cos θ dθ = 0 on [0, π]; subtracting the mean level reduces the
    # cancellation at moderate s
    def f(t):
        return math.cos(t) * ((4.0 * math.sin(0.5 * t) ** 2 + s) ** (-p) - ref)

    v, e = _angular_quad(f, s, epsabs, epsrel)
    return KernelEval(v, e)


def eval_F_prime(order: FractionalOrder, s: float, epsabs: float = DEFAULT_FPRIME_TOL,
                 epsrel: float = DEFAULT_FPRIME_TOL) -> KernelEval:
    s = _check_s(s)
    p = order.p
    if s >= LARGE_S:
        return KernelEval(*_large_s_series(p, s, True))
    ref = (s + 2.0) ** (-p - 1.0)

    def f(t):
        return -p * math.cos(t) * ((4.0 * math.sin(0.5 * t) ** 2 + s) ** (-p - 1.0) - ref)

    v, e = _angular_quad(f, s, epsabs, epsrel)
    return KernelEval(v, e)


def eval_G(order: FractionalOrder, r, z, rbar, zbar, **tol) -> KernelEval:
    s = similarity_variable(r, z, rbar, zbar)
    if s == 0.0:
        raise SingularityError("G_a is singular at coincident points; use the singular-cell rule")
    pref = (r * rbar) ** (order.a - 0.5)
    F = eval_F(order, s, **tol)
    return KernelEval(pref * F.value, pref * F.abs_error_estimate)


# ---------------------------------------------------------------------------
# tabulation


@njit(cache=True)
def _hermite_eval(x0, dx, y, d, xlo_slope, xhi_slope, s):
    """ln F and d ln F / d ln s at s from the uniform-in-ln s table."""
    x = math.log(s)
    n = y.shape[0]
    t = (x - x0) / dx
    if t <= 0.0:
        return y[0] + xlo_slope * (x - x0), xlo_slope
    if t >= n - 1:
        xe = x0 + (n - 1) * dx
        return y[n - 1] + xhi_slope * (x - xe), xhi_slope
    k = int(t)
    if k > n - 2:
        k = n - 2
    u = t - k
    y0 = y[k]
    y1 = y[k + 1]
    m0 = d[k] * dx
    m1 = d[k + 1] * dx
    u2 = u * u
    u3 = u2 * u
    val = (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * y1 + (u3 - u2) * m1
    der = ((6 * u2 - 6 * u) * y0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * y1 + (3 * u2 - 2 * u) * m1) / dx
    return val, der


@njit(cache=True)
def table_F(tab, s):
    x0, dx, y, d, lo, hi = tab
    v, _ = _hermite_eval(x0, dx, y, d, lo, hi, s)
    return math.exp(v)


@njit(cache=True)
def table_F_and_prime(tab, s):
    x0, dx, y, d, lo, hi = tab
    v, g = _hermite_eval(x0, dx, y, d, lo, hi, s)
    F = math.exp(v)
    return F, F * g / s


@njit(cache=True)
def _table_F_vec(tab, s, out, outp):
    for i in range(s.shape[0]):
        out[i], outp[i] = table_F_and_prime(tab, s[i])


class KernelTable:
    """F_a tabulated on a log-uniform s grid.

    Interpolation is cubic Hermite in (ln s, ln F) using the exact slopes
    s F'/F, which keeps the interpolant monotone decreasing here and gives
    fourth-order accuracy in the log spacing.  Outside the tabulated range
    ln F is continued linearly, matching the power-law asymptotics
    F ~ s^{-(1-a)} as s -> 0 and F ~ s^{-(5/2-a)} as s -> ∞.
    """

    def __init__(self, order: FractionalOrder, s_min: float = 1e-14, s_max: float = 1e12,
                 n: int = 2400):
        self.order = order
        self.s_min = s_min
        self.s_max = s_max
        xs = np.linspace(math.log(s_min), math.log(s_max), n)
        F = np.empty(n)
        Fp = np.empty(n)
        with warnings.catch_warnings():
            # tight requests trip quad's roundoff warning; accuracy is checked by validate()
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for k, x in enumerate(xs):
                s = math.exp(x)
                F[k] = eval_F(order, s, epsabs=1e-300, epsrel=1e-12).value
                Fp[k] = eval_F_prime(order, s, epsabs=1e-300, epsrel=1e-12).value
        self.s = np.exp(xs)
        self.F = F
        self.F_prime = Fp
        y = np.log(F)
        d = self.s * Fp / F
        self.packed = (float(xs[0]), float(xs[1] - xs[0]), y, d, float(d[0]), float(d[-1]))

    def __call__(self, s):
        return self.evaluate(s)[0]

    def evaluate(self, s):
        """Return (F, F') arrays at the points ``s``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s <= 0):
            raise DomainError("similarity variable must be positive")
        flat = np.ascontiguousarray(s.ravel())
        out = np.empty_like(flat)
        outp = np.empty_like(flat)
        _table_F_vec(self.packed, flat, out, outp)
        return out.reshape(s.shape), outp.reshape(s.shape)

    def validate(self, samples=None):
        """Max relative error of the table against direct quadrature."""
        if samples is None:
            # midpoints between nodes are where Hermite error peaks
            xs = np.log(self.s)
            samples = np.exp(0.5 * (xs[:-1] + xs[1:]))[::37]
        samples = np.asarray(samples, dtype=float)
        Ft, Fpt = self.evaluate(samples)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            Fq = np.array([eval_F(self.order, s, epsabs=1e-300, epsrel=1e-12).value for s in samples])
            Fpq = np.array([eval_F_prime(self.order, s, epsabs=1e-300, epsrel=1e-12).value
                            for s in samples])
        return float(np.max(np.abs(Ft / Fq - 1))), float(np.max(np.abs(Fpt / Fpq - 1)))


@lru_cache(maxsize=8)
def get_table(a: float) -> KernelTable:
    return KernelTable(FractionalOrder(a))


def kernel_table_rows(order: FractionalOrder, s_values):
    """Rows (a, s, F, F', abs_err) for the kernel-table CSV."""
    rows = []
    for s in s_values:
        F = eval_F(order, s)
        Fp = eval_F_prime(order, s)
        rows.append((order.a, float(s), F.value, Fp.value, F.abs_error_estimate))
    return rows
