"""Stream function and velocity from relative vorticity.

The discrete stream function is the midpoint sum

    ψ(r_i, z_k) = c_a h_r h_z Σ_{j,l} K_ij[k - l] ξ_jl r_j,
    K_ij[m] = G_a(r_i, m h_z, r_j, 0),

with the singular self term K_ii[0] replaced by a cell-integrated
weight.  Because K_ij depends on z only through the offset m, every
radial pair (i, j) contributes a 1-D convolution in z, evaluated exactly
(up to round-off) by zero-padded FFTs.  K_ij = K_ji and K_ij[m] is even in
m, so only the upper triangle of real spectra is stored.
"""
from __future__ import annotations

import math
import os
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from numba import njit

from .errors import DomainError, ValidationError
from .fields import HalfPlaneGrid, ScalarField, VelocityField, support_margin
from .kernel import FractionalOrder, get_table, table_F, table_F_and_prime

RULES = ("cell-average", "subtract")

# Gauss-Legendre nodes on [0, 1] for the singular self-cell rule
_GL_N = 16
_gl_x, _gl_w = np.polynomial.legendre.leggauss(_GL_N)
GL_X = 0.5 * (_gl_x + 1.0)
GL_W = 0.5 * _gl_w


@njit(cache=True)
def _G(tab, a, r, z, rb, zb):
    s = ((r - rb) ** 2 + (z - zb) ** 2) / (r * rb)
    return (r * rb) ** (a - 0.5) * table_F(tab, s)


@njit(cache=True)
def _cell_integral_polar(tab, a, r0, hr, hz, gx, gw):
    """∫ over the cell centred at (r0, 0) of G(r0, 0; rb, zb) rb drb dzb.

    Polar coordinates about the singular centre, split into the four
    triangles that join the centre to the cell edges.  The radial map
    ρ = R u^{1/(2a)} absorbs the ρ^{1-2(1-a)} behaviour of the integrand.
    """
    total = 0.0
    q = 1.0 / (2.0 * a)
    phi0 = math.atan2(hz, hr)
    # (angle start, angle end, edge half-width, use cos)
    for side in range(4):
        if side == 0:
            lo, hi, half, use_cos = -phi0, phi0, 0.5 * hr, True
        elif side == 1:
            lo, hi, half, use_cos = phi0, math.pi - phi0, 0.5 * hz, False
        elif side == 2:
            lo, hi, half, use_cos = math.pi - phi0, math.pi + phi0, 0.5 * hr, True
        else:
            lo, hi, half, use_cos = math.pi + phi0, 2 * math.pi - phi0, 0.5 * hz, False
        for ip in range(gx.shape[0]):
            phi = lo + (hi - lo) * gx[ip]
            wphi = (hi - lo) * gw[ip]
            c = math.cos(phi)
            sn = math.sin(phi)
            R = half / abs(c) if use_cos else half / abs(sn)
            for iu in range(gx.shape[0]):
                u = gx[iu]
                rho = R * u**q
                jac = R * q * u ** (q - 1.0)
                rb = r0 + rho * c
                zb = rho * sn
                total += wphi * gw[iu] * jac * rho * rb * _G(tab, a, r0, 0.0, rb, zb)
    return total


@njit(cache=True)
def _cell_integral_leading(amp, a, r0, hr, hz, gx, gw):
    """Same cell integral for the leading singular term amp r0^2 ρ^{-2(1-a)}."""
    total = 0.0
    phi0 = math.atan2(hz, hr)
    for side in range(4):
        if side == 0:
            lo, hi, half, use_cos = -phi0, phi0, 0.5 * hr, True
        elif side == 1:
            lo, hi, half, use_cos = phi0, math.pi - phi0, 0.5 * hz, False
        elif side == 2:
            lo, hi, half, use_cos = math.pi - phi0, math.pi + phi0, 0.5 * hr, True
        else:
            lo, hi, half, use_cos = math.pi + phi0, 2 * math.pi - phi0, 0.5 * hz, False
        for ip in range(gx.shape[0]):
            phi = lo + (hi - lo) * gx[ip]
            wphi = (hi - lo) * gw[ip]
            R = half / abs(math.cos(phi)) if use_cos else half / abs(math.sin(phi))
            total += wphi * R ** (2 * a) / (2 * a)
    return amp * r0 * r0 * total


def leading_amplitude(a: float) -> float:
    """lim_{s->0} s^{1-a} F_a(s) = ∫_0^∞ (θ^2 + 1)^{-(3-2a)/2} dθ."""
    return math.sqrt(math.pi) * math.gamma(1.0 - a) / (2.0 * math.gamma(1.5 - a))


def self_cell_weights(order: FractionalOrder, grid: HalfPlaneGrid, rule: str = "cell-average"):
    """Effective self-interaction kernel values K_ii[0] for every radial row.

    Chosen so that K_ii[0] r_i h_r h_z equals the cell integral of the
    kernel against the cell's own centre.
    """
    tab = get_table(order.a).packed
    r = grid.r
    hr, hz = grid.h_r, grid.h_z
    out = np.empty(grid.n_r)
    for i, ri in enumerate(r):
        if rule == "cell-average":
            val = _cell_integral_polar(tab, order.a, ri, hr, hz, GL_X, GL_W)
        elif rule == "subtract":
            val = _cell_integral_leading(leading_amplitude(order.a), order.a, ri, hr, hz, GL_X, GL_W)
        else:
            raise ValidationError(f"unknown singular-cell rule {rule!r}; choose from {RULES}")
        out[i] = val / (ri * hr * hz)
    return out


@njit(cache=True)
def _fill_rows(tab, a, r, hz, i, nz, buf):
    """buf[j - i, :] = circularly wrapped K_ij[m] for j >= i."""
    ri = r[i]
    L = 2 * nz
    for j in range(i, r.shape[0]):
        rj = r[j]
        pref = (ri * rj) ** (a - 0.5)
        dr2 = (ri - rj) ** 2
        row = j - i
        for m in range(nz + 1):
            if m == 0 and j == i:
                buf[row, 0] = 0.0
                continue
            dz = m * hz
            v = pref * table_F(tab, (dr2 + dz * dz) / (ri * rj))
            buf[row, m] = v
            if 0 < m < nz:
                buf[row, L - m] = v


@njit(cache=True)
def _apply_packed(khat, offsets, X, acc):
    n_r = X.shape[0]
    nf = X.shape[1]
    for i in range(n_r):
        base = offsets[i]
        for j in range(i, n_r):
            k = khat[base + j - i]
            if j == i:
                for q in range(nf):
                    acc[i, q] += k[q] * X[i, q]
            else:
                for q in range(nf):
                    acc[i, q] += k[q] * X[j, q]
                    acc[j, q] += k[q] * X[i, q]


class StreamOperator:
    """Precomputed discrete 𝒢_a on one grid.

    Memory is n_r (n_r + 1)/2 (n_z + 1) doubles.
    """

    def __init__(self, order: FractionalOrder, grid: HalfPlaneGrid, rule: str = "cell-average"):
        if rule not in RULES:
            raise ValidationError(f"unknown singular-cell rule {rule!r}; choose from {RULES}")
        self.order = order
        self.grid = grid
        self.rule = rule
        n_r, n_z = grid.shape
        self.L = 2 * n_z
        self.nf = n_z + 1
        tab = get_table(order.a).packed
        r = grid.r
        self.self_weights = self_cell_weights(order, grid, rule)
        other = "subtract" if rule == "cell-average" else "cell-average"
        self.self_weight_spread = np.abs(self.self_weights - self_cell_weights(order, grid, other))
        offsets = np.zeros(n_r, dtype=np.int64)
        offsets[1:] = np.cumsum(np.arange(n_r, 1, -1))
        self.offsets = offsets
        khat = np.empty((n_r * (n_r + 1) // 2, self.nf))
        buf = np.empty((n_r, self.L))
        for i in range(n_r):
            rows = n_r - i
            view = buf[:rows]
            _fill_rows(tab, order.a, r, grid.h_z, i, n_z, view)
            view[0, 0] = self.self_weights[i]
            khat[offsets[i]:offsets[i] + rows] = sfft.rfft(view, axis=1).real
        self.khat = khat

    def apply(self, values: np.ndarray) -> np.ndarray:
        g = self.grid
        src = values * g.r[:, None]
        X = sfft.rfft(src, n=self.L, axis=1)
        acc = np.zeros_like(X)
        _apply_packed(self.khat, self.offsets, X, acc)
        out = sfft.irfft(acc, n=self.L, axis=1)[:, :g.n_z]
        return out * (self.order.c_a * g.h_r * g.h_z)

    def self_error_estimate(self, values: np.ndarray) -> float:
        """Bound on |ψ| change if the self-cell rule were swapped."""
        g = self.grid
        c = self.order.c_a * g.h_r * g.h_z
        return float(np.max(np.abs(values) * (self.self_weight_spread * g.r)[:, None]) * c)


_CACHE: "OrderedDict[tuple, StreamOperator]" = OrderedDict()
_CACHE_BYTES = int(float(os.environ.get("RINGWAVE_OPERATOR_CACHE_MB", "1600")) * 2**20)


def get_operator(order: FractionalOrder, grid: HalfPlaneGrid, rule: str = "cell-average") -> StreamOperator:
    key = (order, grid, rule)
    op = _CACHE.get(key)
    if op is not None:
        _CACHE.move_to_end(key)
        return op
    need = grid.n_r * (grid.n_r + 1) // 2 * (grid.n_z + 1) * 8
    while _CACHE and sum(o.khat.nbytes for o in _CACHE.values()) + need > _CACHE_BYTES:
        _CACHE.popitem(last=False)
    op = StreamOperator(order, grid, rule)
    _CACHE[key] = op
    return op


def clear_operator_cache():
    _CACHE.clear()


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StreamSolveReport:
    psi: ScalarField
    singular_cell_rule: str
    est_quadrature_error: float
    support_margin: float
    support_warning: bool

    def summary(self) -> dict:
        return {
            "rule": self.singular_cell_rule,
            "est_quadrature_error": self.est_quadrature_error,
            "max_psi": float(np.max(self.psi.values)),
            "support_margin": self.support_margin,
            "support_warning": self.support_warning,
        }


def compute_stream(order: FractionalOrder, xi: ScalarField, rule: str = "cell-average") -> StreamSolveReport:
    op = get_operator(order, xi.grid, rule)
    psi = op.apply(xi.values)
    margin = support_margin(xi)
    g = xi.grid
    return StreamSolveReport(
        psi=ScalarField(g, psi, nonnegative=bool(xi.nonnegative)),
        singular_cell_rule=rule,
        est_quadrature_error=op.self_error_estimate(xi.values),
        support_margin=margin,
        support_warning=margin < min(g.h_r, g.h_z),
    )


def stream(order: FractionalOrder, xi: ScalarField, rule: str = "cell-average") -> np.ndarray:
    """ψ values only."""
    return get_operator(order, xi.grid, rule).apply(xi.values)


# ---------------------------------------------------------------------------
# velocity


def _diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order centred difference, one-sided second order at the ends."""
    return np.gradient(f, h, axis=axis, edge_order=2)


def velocity_from_stream(psi: ScalarField) -> VelocityField:
    g = psi.grid
    r = g.r[:, None]
    v_r = -_diff(psi.values, g.h_z, 1) / r
    v_z = _diff(psi.values, g.h_r, 0) / r
    return VelocityField(g, v_r, v_z)


def divergence(v: VelocityField, form: str = "conservative") -> np.ndarray:
    """Discrete divergence of an axisymmetric velocity.

    ``"conservative"``: ∂_r(r v^r) + ∂_z(r v^z); on the stream path this
    vanishes to round-off because the difference operators commute.
    ``"cylindrical"``: ∂_r v^r + v^r/r + ∂_z v^z, whose residual measures
    the truncation error of the velocity field.
    """
    g = v.grid
    r = g.r[:, None]
    if form == "conservative":
        return _diff(r * v.v_r, g.h_r, 0) + _diff(r * v.v_z, g.h_z, 1)
    if form == "cylindrical":
        return _diff(v.v_r, g.h_r, 0) + v.v_r / r + _diff(v.v_z, g.h_z, 1)
    raise DomainError(f"unknown divergence form {form!r}")


@njit(cache=True)
def _fill_velocity_rows(tab, a, r, hz, i, nz, bufr, bufz, self_vz):
    """Direct velocity kernels for target row i and every source row j.

    v^r kernel: 2 (zb - z) F'(s) / (r (r rb)^{3/2-a}), odd in the z offset
                (from -∂_z of the stream kernel).
    v^z kernel: 2 (r - rb) F'(s) / (r (r rb)^{3/2-a})
                + (r rb)^{a-1/2} / r^2 [(a - 1/2) F(s) - s F'(s)].
    The offset m = zb - z is laid out circularly with length 2 nz.
    """
    ri = r[i]
    L = 2 * nz
    for j in range(r.shape[0]):
        rj = r[j]
        prod = ri * rj
        p1 = 1.0 / (ri * prod ** (1.5 - a))
        p2 = prod ** (a - 0.5) / (ri * ri)
        dr = ri - rj
        for m in range(nz + 1):
            if m == 0 and j == i:
                bufr[j, 0] = 0.0
                bufz[j, 0] = self_vz
                continue
            dz = m * hz
            s = (dr * dr + dz * dz) / prod
            F, Fp = table_F_and_prime(tab, s)
            kz = 2.0 * dr * p1 * Fp + p2 * ((a - 0.5) * F - s * Fp)
            kr = 2.0 * dz * p1 * Fp  # source above the target: zb - z = +dz
            bufz[j, m] = kz
            bufr[j, m] = kr
            if 0 < m < nz:
                bufz[j, L - m] = kz
                bufr[j, L - m] = -kr
        bufr[j, nz] = 0.0


@njit(cache=True)
def _self_vz_integral(tab, a, r0, hr, hz, gx, gw):
    """Cell integral of the integrable part of the v^z kernel about its centre.

    The 2(r - rb)F' part is odd about the centre at leading order and is
    taken as a principal value (zero).
    """
    total = 0.0
    q = 1.0 / (2.0 * a)
    phi0 = math.atan2(hz, hr)
    for side in range(4):
        if side == 0:
            lo, hi, half, use_cos = -phi0, phi0, 0.5 * hr, True
        elif side == 1:
            lo, hi, half, use_cos = phi0, math.pi - phi0, 0.5 * hz, False
        elif side == 2:
            lo, hi, half, use_cos = math.pi - phi0, math.pi + phi0, 0.5 * hr, True
        else:
            lo, hi, half, use_cos = math.pi + phi0, 2 * math.pi - phi0, 0.5 * hz, False
        for ip in range(gx.shape[0]):
            phi = lo + (hi - lo) * gx[ip]
            wphi = (hi - lo) * gw[ip]
            c = math.cos(phi)
            sn = math.sin(phi)
            R = half / abs(c) if use_cos else half / abs(sn)
            for iu in range(gx.shape[0]):
                u = gx[iu]
                rho = R * u**q
                jac = R * q * u ** (q - 1.0)
                rb = r0 + rho * c
                zb = rho * sn
                prod = r0 * rb
                s = ((r0 - rb) ** 2 + zb * zb) / prod
                F, Fp = table_F_and_prime(tab, s)
                k = prod ** (a - 0.5) / (r0 * r0) * ((a - 0.5) * F - s * Fp)
                total += wphi * gw[iu] * jac * rho * rb * k
    return total


def velocity_direct(order: FractionalOrder, xi: ScalarField) -> VelocityField:
    """Velocity by direct summation of the differentiated kernel.

    Cost is one kernel build per call (no caching), O(n_r^2 n_z log n_z).
    """
    if not np.all(np.isfinite(xi.values)):
        raise ValidationError("non-finite vorticity")
    g = xi.grid
    n_r, n_z = g.shape
    L = 2 * n_z
    tab = get_table(order.a).packed
    r = g.r
    X = sfft.rfft(xi.values * r[:, None], n=L, axis=1)
    bufr = np.empty((n_r, L))
    bufz = np.empty((n_r, L))
    vr = np.empty((n_r, n_z))
    vz = np.empty((n_r, n_z))
    for i in range(n_r):
        sv = _self_vz_integral(tab, order.a, r[i], g.h_r, g.h_z, GL_X, GL_W) / (r[i] * g.h_r * g.h_z)
        _fill_velocity_rows(tab, order.a, r, g.h_z, i, n_z, bufr, bufz, sv)
        # the sum is over source offsets zb - z, i.e. a correlation in z
        Kr = np.conj(sfft.rfft(bufr, axis=1))
        Kz = np.conj(sfft.rfft(bufz, axis=1))
        vr[i] = sfft.irfft(np.sum(Kr * X, axis=0), n=L)[:n_z]
        vz[i] = sfft.irfft(np.sum(Kz * X, axis=0), n=L)[:n_z]
    c = order.c_a * g.h_r * g.h_z
    return VelocityField(g, vr * c, vz * c)
