"""Double-null lattice, mode conventions, and data containers.

The lattice is a uniform square grid in (u, v) with equal step h on both
axes.  Node (i, j) sits at (u_min + i h, v_min + j h); the corner relations
u_min = -v_max and v_min = -u_max put the t = 0 anti-diagonal exactly
through the nodes with i + j = n, so Cauchy data seeds the full future
triangle.  Along an anti-diagonal i + j = d the time is constant,
t = (d - n) h / 2, and r_* steps by h per node.

Geometry depends on (u, v) only through r_* = (v - u)/2, i.e. on k = j - i,
so all per-node caches are one-dimensional arrays indexed by k + n in
[0, 2n].  Types are immutable after construction and safe to share
read-only across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .background import (
    BlackHoleParams,
    LambdaProfile,
    horizon_gap_of_rstar,
)

__all__ = [
    "SPHERICALLY_SYMMETRIC",
    "NORMALIZED_HARMONIC",
    "ModeSpec",
    "GridError",
    "SupportError",
    "CornerCompatibilityError",
    "NullGrid",
    "GridField",
    "CauchyData",
    "BoundaryData",
    "GaussianPulse",
    "make_grid",
    "make_flat_grid",
    "sample_gaussian",
    "resample_cauchy",
    "write_csv",
    "read_csv",
]

SPHERICALLY_SYMMETRIC = "spherically-symmetric"
NORMALIZED_HARMONIC = "normalized-harmonic"


class GridError(ValueError):
    """Invalid grid construction parameters."""


class SupportError(ValueError):
    """Data support incompatible with the grid or slice."""


class CornerCompatibilityError(ValueError):
    """Radiation pair disagrees at the shared north-east corner node."""


@dataclass(frozen=True)
class ModeSpec:
    """Angular sector of the field.

    ``l`` is the spherical-harmonic degree of the single mode evolved.  The
    cubic self-interaction closes only in spherical symmetry, so
    ``nonlinear`` requires l = 0 with the spherically symmetric convention.

    The convention fixes the angular normalisation: a spherically symmetric
    profile carries the full sphere area 4*pi as angular factor, a
    unit-normalised harmonic carries 1.  The gradient factor l(l+1) weights
    the angular-derivative terms in the energy densities.
    """

    l: int = 0
    nonlinear: bool = False
    convention: str = SPHERICALLY_SYMMETRIC

    def __post_init__(self):
        if self.l < 0 or int(self.l) != self.l:
            raise ValueError(f"l must be a non-negative integer, got {self.l}")
        if self.convention not in (SPHERICALLY_SYMMETRIC, NORMALIZED_HARMONIC):
            raise ValueError(f"unknown convention {self.convention!r}")
        if self.nonlinear and (
            self.l != 0 or self.convention != SPHERICALLY_SYMMETRIC
        ):
            raise ValueError(
                "nonlinear mode requires l = 0 with the spherically "
                "symmetric convention"
            )

    @property
    def angular_factor(self) -> float:
        return 4.0 * np.pi if self.convention == SPHERICALLY_SYMMETRIC else 1.0

    @property
    def gradient_factor(self) -> float:
        return float(self.l * (self.l + 1))

    @property
    def kappa(self) -> float:
        """Cubic coupling switch: 1 for the defocusing term, else 0."""
        return 1.0 if self.nonlinear else 0.0


@dataclass(frozen=True, eq=False)
class NullGrid:
    """Uniform double-null lattice with per-node geometry caches.

    The 1-D caches are indexed by k = (j - i) + n.  ``eps_diag`` stores
    r - 2M directly; near the horizon this is the only accurate source for
    F = eps/r, since r itself rounds to 2M.  ``v_pot_diag`` caches the
    linear potential F (l(l+1)/r^2 + 2M/r^3) of the grid's mode and
    ``cubic_diag`` the coefficient F/r^2 multiplying the cubic term.

    A flat grid (``flat=True``) is the zero-mass limit used by transport
    and exactness tests: F = 1, all potential/coupling caches vanish, and
    ``r_fh_flat`` stands in for the foliation matching radius.
    """

    u_min: float
    u_max: float
    v_min: float
    v_max: float
    n: int
    h: float
    params: BlackHoleParams | None
    mode: ModeSpec
    rstar_diag: np.ndarray = field(repr=False)
    eps_diag: np.ndarray = field(repr=False)
    r_diag: np.ndarray = field(repr=False)
    F_diag: np.ndarray = field(repr=False)
    v_pot_diag: np.ndarray = field(repr=False)
    cubic_diag: np.ndarray = field(repr=False)
    lam_diag: np.ndarray = field(repr=False)
    dlam_diag: np.ndarray = field(repr=False)
    flat: bool = False
    r_fh_flat: float = 10.0

    @property
    def us(self) -> np.ndarray:
        return self.u_min + self.h * np.arange(self.n + 1)

    @property
    def vs(self) -> np.ndarray:
        return self.v_min + self.h * np.arange(self.n + 1)

    @property
    def rstar_min(self) -> float:
        return float(self.rstar_diag[0])

    @property
    def rstar_max(self) -> float:
        return float(self.rstar_diag[-1])

    def diag_index(self, i, j):
        return j - i + self.n

    def node_rstar(self, i, j):
        return self.rstar_diag[self.diag_index(i, j)]

    def node_t(self, i, j):
        return 0.5 * (self.u_min + self.v_min) + 0.5 * self.h * (
            np.asarray(i) + np.asarray(j)
        )

    @property
    def diagonal_rstar(self) -> np.ndarray:
        """r_* at the n+1 nodes of the t = 0 anti-diagonal (even k)."""
        return self.rstar_diag[::2]


def make_grid(
    u_max: float, v_max: float, n: int, params: BlackHoleParams, mode: ModeSpec
) -> NullGrid:
    """Build the lattice and fill its geometry caches.

    Requires u_max > -v_max (non-degenerate t = 0 diagonal) and n >= 8.
    Identical inputs produce bit-identical caches.
    """
    if not u_max > -v_max:
        raise GridError(f"require u_max > -v_max, got {u_max} <= {-v_max}")
    if n < 8:
        raise GridError(f"n must be >= 8, got {n}")
    u_min = -float(v_max)
    v_min = -float(u_max)
    h = (u_max - u_min) / n
    k = np.arange(2 * n + 1)
    rstar_diag = 0.5 * (v_min - u_min) + 0.5 * h * (k - n)
    eps = horizon_gap_of_rstar(rstar_diag, params)
    r = 2.0 * params.M + eps
    F = eps / r
    gl = mode.gradient_factor
    v_pot = F * (gl / r**2 + 2.0 * params.M / r**3)
    cubic = F / r**2
    prof = LambdaProfile.for_params(params)
    outer = r >= prof.r_break
    lam = np.where(outer, rstar_diag, prof.rstar_break + prof.slope_inner * (r - prof.r_break))
    dlam = np.where(outer, 1.0 / F, prof.slope_inner)
    return NullGrid(
        u_min=u_min,
        u_max=float(u_max),
        v_min=v_min,
        v_max=float(v_max),
        n=int(n),
        h=float(h),
        params=params,
        mode=mode,
        rstar_diag=rstar_diag,
        eps_diag=eps,
        r_diag=r,
        F_diag=F,
        v_pot_diag=v_pot,
        cubic_diag=cubic,
        lam_diag=lam,
        dlam_diag=dlam,
    )


def make_flat_grid(
    u_max: float, v_max: float, n: int, mode: ModeSpec | None = None,
    r_fh: float = 10.0,
) -> NullGrid:
    """Zero-mass lattice: unit F, vanishing potential and cubic coupling."""
    if mode is None:
        mode = ModeSpec()
    if not u_max > -v_max:
        raise GridError(f"require u_max > -v_max, got {u_max} <= {-v_max}")
    if n < 8:
        raise GridError(f"n must be >= 8, got {n}")
    u_min = -float(v_max)
    v_min = -float(u_max)
    h = (u_max - u_min) / n
    k = np.arange(2 * n + 1)
    rstar_diag = 0.5 * (v_min - u_min) + 0.5 * h * (k - n)
    zeros = np.zeros(2 * n + 1)
    return NullGrid(
        u_min=u_min,
        u_max=float(u_max),
        v_min=v_min,
        v_max=float(v_max),
        n=int(n),
        h=float(h),
        params=None,
        mode=mode,
        rstar_diag=rstar_diag,
        eps_diag=np.full(2 * n + 1, np.inf),
        r_diag=np.full(2 * n + 1, np.inf),
        F_diag=np.ones(2 * n + 1),
        v_pot_diag=zeros,
        cubic_diag=zeros.copy(),
        lam_diag=rstar_diag.copy(),
        dlam_diag=np.ones(2 * n + 1),
        flat=True,
        r_fh_flat=float(r_fh),
    )


@dataclass
class GridField:
    """Samples of the mode-reduced rescaled field on a NullGrid.

    ``values[i, j]`` holds the field at node (u_i, v_j); ``mask`` marks the
    nodes actually computed.  Any non-finite value inside the mask is a
    hard failure, checked during the march and by ``require_finite``.
    """

    grid: NullGrid
    mode: ModeSpec
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.mode != self.grid.mode:
            raise ValueError("field mode must match the grid mode")
        shape = (self.grid.n + 1, self.grid.n + 1)
        if self.values.shape != shape or self.mask.shape != shape:
            raise ValueError(f"arrays must have shape {shape}")

    @classmethod
    def empty(cls, grid: NullGrid) -> "GridField":
        shape = (grid.n + 1, grid.n + 1)
        return cls(
            grid=grid,
            mode=grid.mode,
            values=np.zeros(shape),
            mask=np.zeros(shape, dtype=bool),
        )

    def max_abs(self) -> float:
        if not np.any(self.mask):
            return 0.0
        return float(np.max(np.abs(self.values[self.mask])))

    def require_finite(self):
        if not np.all(np.isfinite(self.values[self.mask])):
            bad = np.argwhere(self.mask & ~np.isfinite(self.values))
            raise FloatingPointError(
                f"non-finite field value at node {tuple(bad[0])}"
            )


def _validate_samples(rstar, *arrays):
    rstar = np.asarray(rstar, dtype=float)
    if rstar.ndim != 1 or rstar.size < 3:
        raise ValueError("need at least 3 one-dimensional samples")
    if not np.all(np.diff(rstar) > 0):
        raise ValueError("sample coordinates must be strictly increasing")
    out = [rstar]
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if a.shape != rstar.shape:
            raise ValueError("sample arrays must share one shape")
        if not np.all(np.isfinite(a)):
            raise ValueError("sample values must be finite")
        out.append(a)
    return out


@dataclass
class CauchyData:
    """Initial pair (field, time derivative) on the t = 0 slice."""

    rstar: np.ndarray
    psi0: np.ndarray
    psi1: np.ndarray
    mode: ModeSpec

    def __post_init__(self):
        self.rstar, self.psi0, self.psi1 = _validate_samples(
            self.rstar, self.psi0, self.psi1
        )

    def endpoint_magnitude(self) -> float:
        """Largest data value at the two sample ends (compactness check)."""
        return float(
            max(
                abs(self.psi0[0]), abs(self.psi0[-1]),
                abs(self.psi1[0]), abs(self.psi1[-1]),
            )
        )

    def scale(self) -> float:
        return float(max(np.max(np.abs(self.psi0)), np.max(np.abs(self.psi1))))


@dataclass
class BoundaryData:
    """Radiation pair on the two future truncation edges.

    ``xi`` lives on the u = u_max edge (horizon proxy, indexed by v) and
    ``zeta`` on the v = v_max edge (null-infinity proxy, indexed by u).
    The two edges share the north-east corner node, where the samples must
    agree.  Tangential derivatives are carried along when extracted from an
    evolution, for flux use.  Either component may be empty (a norm-only
    container); the corner check applies when both are present with a grid.
    """

    v: np.ndarray
    xi: np.ndarray
    u: np.ndarray
    zeta: np.ndarray
    mode: ModeSpec
    grid: NullGrid | None = None
    dxi_dv: np.ndarray | None = None
    dzeta_du: np.ndarray | None = None

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=float)
        if self.xi.shape != self.v.shape or self.zeta.shape != self.u.shape:
            raise ValueError("edge samples must match their coordinates")
        if self.xi.size and self.zeta.size and self.grid is not None:
            scale = max(
                np.max(np.abs(self.xi)), np.max(np.abs(self.zeta)), 1e-300
            )
            gap = abs(self.xi[-1] - self.zeta[-1])
            if gap > 1e-9 * scale:
                raise CornerCompatibilityError(
                    f"corner mismatch {gap:.3e} exceeds 1e-9 of data scale"
                )

    def scale(self) -> float:
        vals = [1e-300]
        if self.xi.size:
            vals.append(float(np.max(np.abs(self.xi))))
        if self.zeta.size:
            vals.append(float(np.max(np.abs(self.zeta))))
        return max(vals)


@dataclass(frozen=True)
class GaussianPulse:
    """Gaussian initial-data family, hard-truncated outside c +- 5w.

    ``kind`` selects the time derivative: "time-symmetric" (zero),
    "outgoing" (-d/dr_* of the profile) or "ingoing" (+d/dr_*).
    """

    A: float = 1.0
    c: float = 10.0
    w: float = 2.0
    kind: str = "time-symmetric"

    def __post_init__(self):
        if self.w <= 0:
            raise ValueError("width must be positive")
        if self.kind not in ("time-symmetric", "outgoing", "ingoing"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")

    def profile(self, x):
        x = np.asarray(x, dtype=float)
        s = (x - self.c) / self.w
        return np.where(np.abs(s) > 5.0, 0.0, self.A * np.exp(-(s**2)))

    def profile_prime(self, x):
        x = np.asarray(x, dtype=float)
        s = (x - self.c) / self.w
        return np.where(
            np.abs(s) > 5.0, 0.0, -2.0 * s / self.w * self.A * np.exp(-(s**2))
        )

    def realize(self, rstar: np.ndarray, mode: ModeSpec) -> CauchyData:
        psi0 = self.profile(rstar)
        if self.kind == "time-symmetric":
            psi1 = np.zeros_like(psi0)
        elif self.kind == "outgoing":
            psi1 = -self.profile_prime(rstar)
        else:
            psi1 = self.profile_prime(rstar)
        return CauchyData(rstar=np.asarray(rstar, float), psi0=psi0, psi1=psi1, mode=mode)


def sample_gaussian(
    A: float, c: float, w: float, grid: NullGrid, kind: str = "time-symmetric"
) -> CauchyData:
    """Sample a Gaussian pulse on the grid's t = 0 diagonal nodes.

    The truncated support [c - 5w, c + 5w] must fit inside the diagonal's
    r_* range (checked only for nonzero amplitude).
    """
    pulse = GaussianPulse(A=A, c=c, w=w, kind=kind)
    if A != 0.0 and (c - 5 * w < grid.rstar_min or c + 5 * w > grid.rstar_max):
        raise SupportError(
            f"support [{c - 5 * w}, {c + 5 * w}] exceeds grid r_* range "
            f"[{grid.rstar_min}, {grid.rstar_max}]"
        )
    return pulse.realize(grid.diagonal_rstar, grid.mode)


def resample_cauchy(data: CauchyData, rstar_new: np.ndarray) -> CauchyData:
    """Cubic resampling onto new coordinates, zero outside the old range."""
    rstar_new = np.asarray(rstar_new, dtype=float)
    out = []
    for arr in (data.psi0, data.psi1):
        spline = CubicSpline(data.rstar, arr, extrapolate=False)
        vals = spline(rstar_new)
        out.append(np.where(np.isfinite(vals), vals, 0.0))
    return CauchyData(rstar=rstar_new, psi0=out[0], psi1=out[1], mode=data.mode)


def write_csv(path, header: str, columns):
    """Write columns as CSV with 17 significant digits (lossless floats)."""
    arr = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in arr:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_csv(path, expect_header: str | None = None):
    """Read a CSV written by write_csv; returns (header, columns)."""
    with open(path) as fh:
        header = fh.readline().strip()
    if expect_header is not None and header != expect_header:
        raise ValueError(
            f"{path}: expected header {expect_header!r}, found {header!r}"
        )
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, [data[:, k] for k in range(data.shape[1])]
