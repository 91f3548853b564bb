"""Shared fixtures: the Gaussian torus and small helpers."""
import math

import numpy as np

from ringwave.fields import HalfPlaneGrid, ScalarField

R0 = 0.8
DELTA = 0.15
CUTOFF = 1e-14


def torus_values(r, z, amp=1.0, r0=R0, delta=DELTA):
    v = amp * np.exp(-((r - r0) ** 2 + z**2) / delta**2)
    return np.where(v > CUTOFF * amp, v, 0.0)


def torus(grid: HalfPlaneGrid, **kw) -> ScalarField:
    return ScalarField.from_function(grid, lambda r, z: torus_values(r, z, **kw), True)


def torus_energy_scaled(grid, sigma, a, **kw):
    """ξ^σ sampled analytically."""
    return ScalarField.from_function(grid, lambda r, z: sigma ** (2.5 + a) * torus_values(sigma * r, sigma * z, **kw), True)


def torus_impulse_scaled(grid, sigma, **kw):
    """ξ_σ sampled analytically."""
    return ScalarField.from_function(grid, lambda r, z: sigma**5 * torus_values(sigma * r, sigma * z, **kw), True)


def torus_mass_exact(r0=R0, delta=DELTA):
    """∫ 2π r exp(-((r-r0)² + z²)/δ²) dr dz over r > 0 (no cutoff)."""
    radial = r0 * 0.5 * math.sqrt(math.pi) * delta * (1 + math.erf(r0 / delta)) + 0.5 * delta**2 * math.exp(-(r0 / delta) ** 2)
    return 2 * math.pi * math.sqrt(math.pi) * delta * radial


def random_field(grid, rng, kind="blobs"):
    """Nonnegative random field with compact support away from the box edges."""
    R, Z = grid.mesh()
    if kind == "cells":
        v = rng.random(grid.shape) * (rng.random(grid.shape) < 0.3)
    else:
        v = np.zeros(grid.shape)
        for _ in range(rng.integers(1, 5)):
            rc = rng.uniform(0.2, 0.6) * grid.r_max
            zc = rng.uniform(-0.4, 0.4) * grid.z_max
            w = rng.uniform(0.05, 0.15) * grid.r_max
            v += rng.uniform(0.2, 2.0) * np.exp(-((R - rc) ** 2 + (Z - zc) ** 2) / w**2)
    inner = (R < 0.75 * grid.r_max) & (np.abs(Z) < 0.75 * grid.z_max)
    return ScalarField(grid, np.where(inner, v, 0.0), True)


def rel_l2(a, b, grid):
    vol = grid.cell_volumes()
    return math.sqrt(float(np.sum((a - b) ** 2 * vol)) / float(np.sum(b**2 * vol)))
