"""Rearrangements and rescalings of nonnegative vorticity fields.

Steiner symmetrization permutes each radial row; the scalings and the
off-axis translation resample the field with bilinear interpolation and
zero extension, which cannot overshoot and so keeps ξ >= 0.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, SupportError
from .fields import HalfPlaneGrid, ScalarField


def steiner_order(n_z: int) -> np.ndarray:
    """z-indices sorted by increasing |z|, lower half first within a tie."""
    c = n_z // 2
    if n_z % 2:
        order = [c]
        for k in range(1, c + 1):
            order += [c - k, c + k]
    else:
        order = []
        for k in range(c):
            order += [c - 1 - k, c + k]
    return np.array(order, dtype=np.intp)


def steiner(xi: ScalarField) -> ScalarField:
    """Row-wise symmetric-decreasing rearrangement in z about z = 0."""
    v = xi.values
    if np.any(v < 0):
        raise DomainError("Steiner symmetrization needs a nonnegative field")
    slots = steiner_order(xi.grid.n_z)
    out = np.empty_like(v)
    # stable sort keeps the placement deterministic for ties
    out[:, slots] = -np.sort(-v, axis=1, kind="stable")
    return ScalarField(xi.grid, out, True)


def _resample(xi: ScalarField, r_src: np.ndarray, z_src: np.ndarray) -> np.ndarray:
    """Bilinear samples of ``xi`` at (r_src, z_src), zero outside the box.

    Below the innermost node the even extension ξ(-r) = ξ(r) is used.
    """
    g = xi.grid
    r_nodes = np.concatenate(([-g.r[0]], g.r, [g.r_max]))
    z_nodes = np.concatenate(([g.z_min], g.z, [g.z_max]))
    padded = np.zeros((g.n_r + 2, g.n_z + 2))
    padded[1:-1, 1:-1] = xi.values
    padded[0, 1:-1] = xi.values[0]
    # box edges hold zero so the field decays linearly to the boundary
    interp = RegularGridInterpolator((r_nodes, z_nodes), padded, bounds_error=False, fill_value=0.0)
    pts = np.stack([np.abs(r_src).ravel(), z_src.ravel()], axis=-1)
    return interp(pts).reshape(r_src.shape)


def _support_extent(xi: ScalarField) -> tuple[float, float]:
    """Outer radius and |z| extent (cell edges) of the support."""
    g = xi.grid
    mask = xi.values != 0
    if not mask.any():
        return 0.0, 0.0
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    r_ext = (rows[-1] + 1) * g.h_r
    z_ext = max(-(g.z_min + cols[0] * g.h_z), g.z_min + (cols[-1] + 1) * g.h_z)
    return r_ext, z_ext


def scale_impulse_preserving(xi: ScalarField, sigma: float) -> ScalarField:
    """ξ_σ(x) = σ^5 ξ(σx); keeps the impulse, multiplies the mass by σ^2."""
    return _scale(xi, sigma, 5.0)


def scale_energy_preserving(xi: ScalarField, sigma: float, a: float) -> ScalarField:
    """ξ^σ(x) = σ^{5/2+a} ξ(σx); keeps E, multiplies ∫ξ² by σ^{2+2a}."""
    return _scale(xi, sigma, 2.5 + a)


def _scale(xi: ScalarField, sigma: float, power: float) -> ScalarField:
    if not sigma > 0:
        raise DomainError(f"scale factor must be positive, got {sigma}")
    if sigma == 1.0:
        return xi
    g = xi.grid
    r_ext, z_ext = _support_extent(xi)
    if r_ext / sigma > g.r_max or z_ext / sigma > g.z_max:
        raise SupportError(f"rescaling by {sigma} moves the support outside the box {g.r_max} x ±{g.z_max}")
    R, Z = g.mesh()
    out = sigma**power * _resample(xi, sigma * R, sigma * Z)
    return ScalarField(xi.grid, np.maximum(out, 0.0), xi.nonnegative)


def translate_off_axis(xi: ScalarField, tau: float) -> ScalarField:
    """ξ_τ(r, z) = (r - τ)/r ξ(r - τ, z) for r >= τ, zero for r < τ."""
    if np.any(xi.values < 0):
        raise DomainError("translation needs a nonnegative field")
    if tau < 0:
        raise DomainError(f"translation distance must be nonnegative, got {tau}")
    if tau == 0:
        return xi
    g = xi.grid
    R, Z = g.mesh()
    shifted = R - tau
    out = np.where(shifted >= 0, _resample(xi, shifted, Z) * np.maximum(shifted, 0.0) / R, 0.0)
    # anything beyond r_max - τ would be pushed out of the box
    lost = xi.values[g.r > g.r_max - tau]
    if np.any(lost > 0):
        raise SupportError(f"translation by {tau} pushes the support past r_max={g.r_max}")
    return ScalarField(g, out, True)


def symmetric_decreasing_defects(xi: ScalarField) -> tuple[float, float]:
    """(evenness defect, monotonicity defect), relative to max ξ.

    Monotonicity is measured for z > 0 along each row.
    """
    v = xi.values
    scale = float(np.max(np.abs(v))) or 1.0
    even = float(np.max(np.abs(v - v[:, ::-1]))) / scale
    z = xi.grid.z
    upper = v[:, z > 0]
    mono = float(np.max(np.maximum(np.diff(upper, axis=1), 0.0), initial=0.0)) / scale
    return even, mono


def ball_indicator(grid: HalfPlaneGrid, radius: float) -> ScalarField:
    R, Z = grid.mesh()
    return ScalarField(grid, (R**2 + Z**2 < radius**2).astype(float), True)
