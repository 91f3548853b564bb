"""Half-plane grids, scalar/velocity fields and their axisymmetric integrals.

The computational box is [0, r_max] x [-z_max, z_max], split into
n_r x n_z cells.  Nodes sit at cell centres, so no node lies on the axis
and the z-nodes are mirror symmetric about z = 0.  Arrays are indexed
``values[i_r, i_z]``.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, ValidationError

MAGIC = b"AXIF1"
HEADER_SIZE = 64
_HEADER = struct.Struct("<8sdddqqq")  # magic, a, r_max, z_max, n_r, n_z, flags
_TRAILER_TAG = b"AXIM"


@dataclass(frozen=True)
class HalfPlaneGrid:
    r_max: float
    z_max: float
    n_r: int
    n_z: int

    def __post_init__(self):
        if self.n_r < 4 or self.n_z < 4:
            raise DomainError("grid needs at least 4 cells in each direction")
        if not (self.r_max > 0 and self.z_max > 0) or not math.isfinite(self.r_max + self.z_max):
            raise DomainError("box extents must be positive and finite")
        object.__setattr__(self, "r_max", float(self.r_max))
        object.__setattr__(self, "z_max", float(self.z_max))
        object.__setattr__(self, "n_r", int(self.n_r))
        object.__setattr__(self, "n_z", int(self.n_z))

    @property
    def h_r(self) -> float:
        return self.r_max / self.n_r

    @property
    def h_z(self) -> float:
        return 2.0 * self.z_max / self.n_z

    @property
    def z_min(self) -> float:
        return -self.z_max

    @property
    def r_min(self) -> float:
        """Radius of the innermost node."""
        return 0.5 * self.h_r

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.h_r

    @property
    def z(self) -> np.ndarray:
        return -self.z_max + (np.arange(self.n_z) + 0.5) * self.h_z

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_z)

    def mesh(self):
        return np.meshgrid(self.r, self.z, indexing="ij")

    def refined(self, factor: int = 2) -> "HalfPlaneGrid":
        return HalfPlaneGrid(self.r_max, self.z_max, self.n_r * factor, self.n_z * factor)

    def cell_volumes(self) -> np.ndarray:
        """3-D volume 2π r h_r h_z of each cell's ring, broadcastable to values."""
        return (2.0 * math.pi * self.h_r * self.h_z * self.r)[:, None]


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: HalfPlaneGrid
    values: np.ndarray
    nonnegative: bool = False

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.grid.shape:
            raise ValidationError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("field contains non-finite values")
        if self.nonnegative and np.any(v < 0):
            raise DomainError("field flagged nonnegative has negative values")
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return (self.grid == other.grid and self.nonnegative == other.nonnegative
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def with_values(self, values, nonnegative=None) -> "ScalarField":
        nn = self.nonnegative if nonnegative is None else nonnegative
        return ScalarField(self.grid, values, nn)

    @classmethod
    def zeros(cls, grid: HalfPlaneGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape), True)

    @classmethod
    def from_function(cls, grid: HalfPlaneGrid, func, nonnegative: bool = False) -> "ScalarField":
        R, Z = grid.mesh()
        return cls(grid, func(R, Z), nonnegative)


@dataclass(frozen=True, eq=False)
class VelocityField:
    grid: HalfPlaneGrid
    v_r: np.ndarray
    v_z: np.ndarray

    def __post_init__(self):
        vr, vz = _frozen(self.v_r), _frozen(self.v_z)
        if vr.shape != self.grid.shape or vz.shape != self.grid.shape:
            raise ValidationError("velocity components do not match the grid")
        if not (np.all(np.isfinite(vr)) and np.all(np.isfinite(vz))):
            raise ValidationError("velocity contains non-finite values")
        object.__setattr__(self, "v_r", vr)
        object.__setattr__(self, "v_z", vz)

    def max_speed(self) -> float:
        return float(np.sqrt(np.max(self.v_r**2 + self.v_z**2)))


# ---------------------------------------------------------------------------
# integrals

def weighted_integral(f: ScalarField, weight: str = "1", p: float | None = None) -> float:
    """Midpoint-rule value of the axisymmetric integral ∫_{R^3} w f dx.

    ``weight`` is ``"1"`` (mass), ``"r2"`` (second radial moment),
    ``"self"`` (w = f, giving ∫ f^2) or ``"abs_pow"``, in which case the
    integrand is |f|^p itself.
    """
    v = f.values
    if weight == "1":
        integrand = v
    elif weight == "r2":
        integrand = v * (f.grid.r**2)[:, None]
    elif weight == "self":
        integrand = v * v
    elif weight == "abs_pow":
        if p is None:
            raise ValidationError("weight 'abs_pow' needs an exponent p")
        integrand = np.abs(v) ** p
    else:
        raise ValidationError(f"unknown weight {weight!r}")
    return float(np.sum(integrand * f.grid.cell_volumes()))


def mass(f: ScalarField) -> float:
    return weighted_integral(f, "1")


def impulse(xi: ScalarField) -> float:
    """½ ∫ r² ξ dx."""
    return 0.5 * weighted_integral(xi, "r2")


def lp_norm(f: ScalarField, p: float) -> float:
    if p == math.inf:
        return float(np.max(np.abs(f.values)))
    if not p >= 1:
        raise DomainError(f"L^p norm needs p >= 1, got {p}")
    return weighted_integral(f, "abs_pow", p) ** (1.0 / p)


def support_margin(f: ScalarField, threshold: float = 0.0) -> float:
    """Distance from the support {|f| > threshold} to the outer box edges.

    The axis is not a boundary.  Returns the box half-diagonal for an
    empty support.
    """
    g = f.grid
    mask = np.abs(f.values) > threshold
    if not mask.any():
        return math.hypot(g.r_max, g.z_max)
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    r_out = g.r_max - (rows[-1] + 1) * g.h_r
    z_lo = cols[0] * g.h_z
    z_hi = g.z_max - (g.z_min + (cols[-1] + 1) * g.h_z)
    return float(min(r_out, z_lo, z_hi))


def pad_z(f: ScalarField, extra: int) -> ScalarField:
    """Embed ``f`` in a box taller by ``extra`` cells on each side (zeros)."""
    if extra < 0:
        raise DomainError("padding must be nonnegative")
    g = f.grid
    big = HalfPlaneGrid(g.r_max, g.z_max + extra * g.h_z, g.n_r, g.n_z + 2 * extra)
    return ScalarField(big, np.pad(f.values, ((0, 0), (extra, extra))), f.nonnegative)


# ---------------------------------------------------------------------------
# serialization

def save_field(path, f: ScalarField, a: float = math.nan, meta: dict | None = None) -> None:
    """Write ``f`` as a 64-byte header plus little-endian float64 payload.

    An optional JSON block (``meta``) is appended after the payload.
    """
    g = f.grid
    flags = 1 if f.nonnegative else 0
    header = _HEADER.pack(MAGIC.ljust(8, b"\0"), float(a), g.r_max, g.z_max, g.n_r, g.n_z, flags)
    header = header.ljust(HEADER_SIZE, b"\0")
    payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        if meta is not None:
            blob = json.dumps(meta, sort_keys=True).encode()
            fh.write(_TRAILER_TAG + struct.pack("<q", len(blob)) + blob)


def read_field_file(path):
    """Return ``(field, a, meta)`` from a field file."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header")
    magic, a, r_max, z_max, n_r, n_z, flags = _HEADER.unpack_from(data, 0)
    magic = magic.rstrip(b"\0")
    if magic != MAGIC:
        raise FormatError(f"{path}: unsupported format tag {magic!r}, expected {MAGIC!r}")
    try:
        grid = HalfPlaneGrid(r_max, z_max, n_r, n_z)
    except ValidationError as exc:
        raise FormatError(f"{path}: bad grid in header ({exc})") from exc
    nbytes = 8 * n_r * n_z
    body = data[HEADER_SIZE:HEADER_SIZE + nbytes]
    if len(body) != nbytes:
        raise FormatError(f"{path}: payload has {len(body)} bytes, header implies {nbytes}")
    values = np.frombuffer(body, dtype="<f8").reshape(n_r, n_z).astype(np.float64)
    meta = None
    rest = data[HEADER_SIZE + nbytes:]
    if rest:
        if rest[:4] != _TRAILER_TAG or len(rest) < 12:
            raise FormatError(f"{path}: trailing bytes after payload")
        (n,) = struct.unpack_from("<q", rest, 4)
        if len(rest) != 12 + n:
            raise FormatError(f"{path}: truncated metadata block")
        meta = json.loads(rest[12:].decode())
    return ScalarField(grid, values, bool(flags & 1)), a, meta


def load_field(path) -> ScalarField:
    return read_field_file(path)[0]
