"""Trace operators, the scattering map, and continuity probes.

The forward trace sends Cauchy data on t = 0 to the radiation pair on the
future truncation edges; the Goursat solve inverts it.  The past trace is
realised through the time reflection (u, v) -> (-v, -u): the background is
static and the equation is invariant under t -> -t with psi1 -> -psi1, so
past-boundary data of (psi0, psi1) are the reflected future-boundary data
of (psi0, -psi1).  A direct backward march is also provided purely as a
cross-check of that identity.

Norms follow the energy module: Cauchy differences are measured in the
slice energy norm on the grid diagonal, radiation differences in the
edge-derivative norm.  Probes are independent pipelines over immutable
inputs; sweeps can run probe instances concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyBreakdown, audit_energy, norm_H, norm_Hplus
from .evolve import (
    evolve_forward,
    evolve_goursat,
    extract_radiation,
    init_band_from_cauchy,
    march_past,
    restrict_to_cauchy,
)
from .fields import (
    BoundaryData,
    CauchyData,
    GaussianPulse,
    ModeSpec,
    NullGrid,
    resample_cauchy,
)

__all__ = [
    "PastBoundaryData",
    "ScatteringReport",
    "reflect_to_past",
    "reflect_to_future",
    "trace_forward",
    "trace_backward",
    "trace_backward_direct",
    "inverse_trace",
    "inverse_trace_past",
    "scattering_map",
    "data_norm_on_grid",
    "data_difference_norm",
    "boundary_difference_norm",
    "roundtrip_residual",
    "lipschitz_probe",
    "lipschitz_sweep",
    "build_scattering_report",
]


@dataclass
class PastBoundaryData:
    """Radiation pair on the two past truncation edges.

    ``xi`` lives on the v = v_min edge (past-horizon proxy, indexed by u)
    and ``zeta`` on the u = u_min edge (past-null-infinity proxy, indexed
    by v); the edges share the south-west corner node.
    """

    u: np.ndarray
    xi: np.ndarray
    v: np.ndarray
    zeta: np.ndarray
    mode: ModeSpec
    grid: NullGrid | None = None
    dxi_du: np.ndarray | None = None
    dzeta_dv: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=float)
        if self.xi.size and self.zeta.size and self.grid is not None:
            scale = max(
                np.max(np.abs(self.xi)), np.max(np.abs(self.zeta)), 1e-300
            )
            if abs(self.xi[0] - self.zeta[0]) > 1e-9 * scale:
                raise ValueError("past radiation pair disagrees at the corner")


def reflect_to_past(bdata: BoundaryData) -> PastBoundaryData:
    """Relabel future radiation as past radiation under (u,v) -> (-v,-u).

    The future horizon edge at u = u_max maps onto the past horizon edge
    at v = v_min with u' = -v (reversed order), and likewise for the
    infinity edges; tangential derivatives pick up a sign.
    """
    grid = bdata.grid
    return PastBoundaryData(
        u=-bdata.v[::-1],
        xi=bdata.xi[::-1].copy(),
        v=-bdata.u[::-1],
        zeta=bdata.zeta[::-1].copy(),
        mode=bdata.mode,
        grid=grid,
        dxi_du=None if bdata.dxi_dv is None else -bdata.dxi_dv[::-1],
        dzeta_dv=None if bdata.dzeta_du is None else -bdata.dzeta_du[::-1],
    )


def reflect_to_future(pbdata: PastBoundaryData) -> BoundaryData:
    """Inverse relabelling of reflect_to_past."""
    return BoundaryData(
        v=-pbdata.u[::-1],
        xi=pbdata.xi[::-1].copy(),
        u=-pbdata.v[::-1],
        zeta=pbdata.zeta[::-1].copy(),
        mode=pbdata.mode,
        grid=pbdata.grid,
        dxi_dv=None if pbdata.dxi_du is None else -pbdata.dxi_du[::-1],
        dzeta_du=None if pbdata.dzeta_dv is None else -pbdata.dzeta_dv[::-1],
    )


def trace_forward(
    data: CauchyData, grid: NullGrid, mode: ModeSpec | None = None
) -> BoundaryData:
    """Future radiation of the Cauchy development."""
    return extract_radiation(evolve_forward(data, grid, mode))


def _flip_time(data: CauchyData) -> CauchyData:
    return CauchyData(
        rstar=data.rstar.copy(),
        psi0=data.psi0.copy(),
        psi1=-data.psi1,
        mode=data.mode,
    )


def trace_backward(
    data: CauchyData, grid: NullGrid, mode: ModeSpec | None = None
) -> PastBoundaryData:
    """Past radiation via the time-reflection identity (single code path)."""
    return reflect_to_past(trace_forward(_flip_time(data), grid, mode))


def trace_backward_direct(
    data: CauchyData, grid: NullGrid, mode: ModeSpec | None = None
) -> PastBoundaryData:
    """Past radiation by marching into the past triangle directly.

    Exists to cross-check trace_backward; the two must agree to round-off.
    """
    n, h = grid.n, grid.h
    field = init_band_from_cauchy(data, grid, mode, bands=(n, n + 1))
    march_past(field)
    xi = field.values[:, 0].copy()
    zeta = field.values[0, :].copy()
    return PastBoundaryData(
        u=grid.us,
        xi=xi,
        v=grid.vs,
        zeta=zeta,
        mode=field.mode,
        grid=grid,
        dxi_du=np.gradient(xi, h, edge_order=2),
        dzeta_dv=np.gradient(zeta, h, edge_order=2),
    )


def inverse_trace(
    bdata: BoundaryData, grid: NullGrid, mode: ModeSpec | None = None
) -> CauchyData:
    """Cauchy data reconstructed from future radiation (Goursat solve)."""
    return restrict_to_cauchy(evolve_goursat(bdata, grid, mode))


def inverse_trace_past(
    pbdata: PastBoundaryData, grid: NullGrid, mode: ModeSpec | None = None
) -> CauchyData:
    """Cauchy data reconstructed from past radiation, via reflection."""
    rec = inverse_trace(reflect_to_future(pbdata), grid, mode)
    return _flip_time(rec)


def scattering_map(
    pbdata: PastBoundaryData, grid: NullGrid, mode: ModeSpec | None = None
) -> BoundaryData:
    """Past radiation -> future radiation (inverse past trace, then forward)."""
    return trace_forward(inverse_trace_past(pbdata, grid, mode), grid, mode)


# ---------------------------------------------------------------------------
# norms and probes
# ---------------------------------------------------------------------------

def data_norm_on_grid(data: CauchyData, grid: NullGrid) -> float:
    """Energy norm of data resampled onto the grid diagonal."""
    local = resample_cauchy(data, grid.diagonal_rstar)
    return norm_H(local, grid.params)


def data_difference_norm(d_a: CauchyData, d_b: CauchyData, grid: NullGrid) -> float:
    """Energy norm of the difference, on the common diagonal sampling."""
    a = resample_cauchy(d_a, grid.diagonal_rstar)
    b = resample_cauchy(d_b, grid.diagonal_rstar)
    diff = CauchyData(
        rstar=grid.diagonal_rstar,
        psi0=a.psi0 - b.psi0,
        psi1=a.psi1 - b.psi1,
        mode=d_a.mode,
    )
    return norm_H(diff, grid.params)


def boundary_difference_norm(b_a: BoundaryData, b_b: BoundaryData) -> float:
    """Radiation-norm of the difference of two pairs on the same grid."""
    if b_a.xi.shape != b_b.xi.shape or b_a.zeta.shape != b_b.zeta.shape:
        raise ValueError("radiation pairs live on different grids")

    def dd(x, y):
        if x is None or y is None:
            return None
        return x - y

    diff = BoundaryData(
        v=b_a.v,
        xi=b_a.xi - b_b.xi,
        u=b_a.u,
        zeta=b_a.zeta - b_b.zeta,
        mode=b_a.mode,
        grid=None,
        dxi_dv=dd(b_a.dxi_dv, b_b.dxi_dv),
        dzeta_du=dd(b_a.dzeta_du, b_b.dzeta_du),
    )
    return norm_Hplus(diff)


def roundtrip_residual(
    data: CauchyData, grid: NullGrid, mode: ModeSpec | None = None
) -> float:
    """Relative energy-norm defect of inverse_trace(trace_forward(data))."""
    rec = inverse_trace(trace_forward(data, grid, mode), grid, mode)
    denom = data_norm_on_grid(data, grid)
    if denom <= 1e-300:
        return 0.0
    return data_difference_norm(rec, data, grid) / denom


def lipschitz_probe(
    d_a: CauchyData,
    d_b: CauchyData,
    grid: NullGrid,
    mode: ModeSpec | None = None,
) -> float:
    """Radiation-norm over data-norm ratio for a pair of data sets."""
    denom = data_difference_norm(d_a, d_b, grid)
    scale = max(data_norm_on_grid(d_a, grid), data_norm_on_grid(d_b, grid), 1e-300)
    if denom <= 1e-12 * scale:
        raise ValueError("data pair coincides; Lipschitz ratio undefined")
    b_a = trace_forward(d_a, grid, mode)
    b_b = trace_forward(d_b, grid, mode)
    return boundary_difference_norm(b_a, b_b) / denom


def lipschitz_sweep(
    base: CauchyData,
    grid: NullGrid,
    mode: ModeSpec | None = None,
    n_pairs: int = 20,
    ball_radius: float = 0.5,
    seed: int = 0,
):
    """Max Lipschitz ratio over random perturbations within an energy ball.

    Perturbations are Gaussian bumps in both the field and its time
    derivative, rescaled to a random fraction of ``ball_radius`` times the
    base data norm.  The operator's continuity constants are not asserted,
    only measured: returns (max_ratio, rows) with one
    (pair_id, relative_radius, ratio) row per probe.
    """
    rng = np.random.default_rng(seed)
    base_norm = data_norm_on_grid(base, grid)
    if base_norm <= 0:
        raise ValueError("base data must be nonzero for a Lipschitz sweep")
    x = base.rstar
    span = x[-1] - x[0]
    rows = []
    max_ratio = 0.0
    b_base = trace_forward(base, grid, mode)
    for pid in range(n_pairs):
        w = span / 40.0 * rng.uniform(0.5, 2.0)
        c = rng.uniform(x[0] + 6 * w, x[-1] - 6 * w)
        bump0 = GaussianPulse(A=rng.uniform(-1, 1), c=c, w=w)
        bump1 = GaussianPulse(A=rng.uniform(-1, 1), c=c, w=w)
        delta = CauchyData(
            rstar=x,
            psi0=bump0.profile(x),
            psi1=bump1.profile(x),
            mode=base.mode,
        )
        delta_norm = norm_H(delta, grid.params)
        radius = ball_radius * rng.uniform(0.1, 1.0)
        s = radius * base_norm / max(delta_norm, 1e-300)
        d_b = CauchyData(
            rstar=x,
            psi0=base.psi0 + s * delta.psi0,
            psi1=base.psi1 + s * delta.psi1,
            mode=base.mode,
        )
        num = boundary_difference_norm(trace_forward(d_b, grid, mode), b_base)
        den = data_difference_norm(d_b, base, grid)
        ratio = num / den
        rows.append((pid, radius, ratio))
        max_ratio = max(max_ratio, ratio)
    return max_ratio, rows


@dataclass
class ScatteringReport:
    """Summary of the forward trace, round trip, and continuity probes."""

    forward_norm_ratio: float
    roundtrip_residual: float
    lipschitz_ratio: float
    ball_radius: float
    energies: EnergyBreakdown

    def __post_init__(self):
        vals = [
            self.forward_norm_ratio,
            self.roundtrip_residual,
            self.lipschitz_ratio,
            self.ball_radius,
        ]
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValueError("report entries must be finite and nonnegative")


def build_scattering_report(
    data: CauchyData,
    grid: NullGrid,
    mode: ModeSpec | None = None,
    n_pairs: int = 20,
    ball_radius: float = 0.5,
    seed: int = 0,
):
    """Evolve once and assemble the full scattering report.

    Returns (report, lipschitz_rows).
    """
    field = evolve_forward(data, grid, mode)
    bdata = extract_radiation(field)
    energies = audit_energy(field)
    denom = data_norm_on_grid(data, grid)
    fwd = norm_Hplus(bdata) / max(denom, 1e-300)
    rt = roundtrip_residual(data, grid, mode)
    lip, rows = lipschitz_sweep(
        data, grid, mode, n_pairs=n_pairs, ball_radius=ball_radius, seed=seed
    )
    report = ScatteringReport(
        forward_norm_ratio=fwd,
        roundtrip_residual=rt,
        lipschitz_ratio=lip,
        ball_radius=ball_radius,
        energies=energies,
    )
    return report, rows
