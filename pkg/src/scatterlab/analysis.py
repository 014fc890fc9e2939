"""Decay fits, the half-cylinder embedding probe, inequality audits, and
convergence studies.

Decay checks are exponent-only: the constants in the decay envelopes are
not computable from first principles here, so acceptance thresholds use
the weakest admissible exponents (slope <= -1 for the late-surface energy
against sqrt(4 + tau^2), slope <= -1/2 for the near-horizon amplitude,
slope <= 0 for the exterior rescaled amplitude).  Fit windows should
exclude the early quasinormal transient and the last stretch before the
truncation-contaminated end of the series; the runner defaults follow
that practice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import LambdaProfile, rstar_of_r
from .energy import (
    EnergyBreakdown,
    quartic_free_energy,
    sample_field,
    tilted_truncation_radius,
)
from .evolve import evolve_forward, extract_slice
from .fields import CauchyData, GaussianPulse, GridField, ModeSpec, make_flat_grid, make_grid
from .scattering import roundtrip_residual

__all__ = [
    "DecayFit",
    "InequalityRow",
    "ConvergenceReport",
    "fit_loglog",
    "fit_energy_decay",
    "pointwise_series_near_horizon",
    "exterior_rescaled_amplitude",
    "exterior_envelope",
    "fit_pointwise_decay",
    "random_bump_profiles",
    "sobolev_ratio",
    "inequality_audit",
    "convergence_study",
]


@dataclass(frozen=True)
class DecayFit:
    """Least-squares power-law fit over a window of a positive series."""

    tau_lo: float
    tau_hi: float
    slope: float
    intercept: float
    r2: float
    n_points: int

    def __post_init__(self):
        if not self.tau_hi > self.tau_lo >= 0:
            raise ValueError("window must satisfy tau_hi > tau_lo >= 0")


def fit_loglog(x, y):
    """Slope, intercept, r^2 of log y against log x.

    Scaling y by k > 0 shifts the intercept by log k and leaves the slope
    unchanged (the fit is affine in log space).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit requires positive samples")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sstot = float(np.sum((ly - np.mean(ly)) ** 2))
    if sstot == 0.0:
        r2 = 1.0
    else:
        r2 = 1.0 - float(np.sum(resid**2)) / sstot
    return float(slope), float(intercept), float(r2)


def fit_energy_decay(taus, energies, window=None) -> DecayFit:
    """Fit log E against log sqrt(4 + tau^2) over the window.

    A decay envelope with exponent gamma0 appears as slope -gamma0; the
    acceptance property downstream is slope <= -1.
    """
    taus = np.asarray(taus, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if window is None:
        window = (float(taus[0]), float(taus[-1]))
    lo, hi = window
    sel = (taus >= lo) & (taus <= hi)
    if np.count_nonzero(sel) < 5:
        raise ValueError("need at least 5 points inside the fit window")
    if np.any(energies[sel] <= 0):
        raise ValueError("nonpositive energies inside the fit window")
    x = np.sqrt(4.0 + taus[sel] ** 2)
    slope, intercept, r2 = fit_loglog(x, energies[sel])
    return DecayFit(
        tau_lo=float(lo), tau_hi=float(hi), slope=slope,
        intercept=intercept, r2=r2, n_points=int(np.count_nonzero(sel)),
    )


# ---------------------------------------------------------------------------
# pointwise decay probes (the unrescaled amplitude psi = phi / r)
# ---------------------------------------------------------------------------

def pointwise_series_near_horizon(
    field: GridField, tv_values, r_max_factor: float = 5.0
):
    """Max of |phi|/r over the region 2M <= r <= 5M on tilde-v slices.

    Each slice is the surface v = tilde_v + lambda(r), truncated where it
    leaves the grid through the u = u_max edge.  Returns (tv_values, maxes).
    """
    grid = field.grid
    if grid.flat:
        raise ValueError("near-horizon decay requires a curved background")
    params = grid.params
    prof = LambdaProfile.for_params(params)
    r_hi = r_max_factor * params.M
    x_hi = float(rstar_of_r(r_hi, params))
    maxes = []
    for tv in np.asarray(tv_values, dtype=float):
        r_cut = tilted_truncation_radius(grid, tv)
        if r_cut >= prof.r_break:
            # slice enters the grid only beyond 5M/2
            x_lo = tv - grid.u_max
        else:
            x_lo = float(rstar_of_r(r_cut, params))
        x_lo += 2.0 * grid.h  # stay clear of the edge cells
        if x_hi <= x_lo:
            maxes.append(0.0)
            continue
        x_s = np.linspace(x_lo, x_hi, max(32, int((x_hi - x_lo) / grid.h) + 1))
        from .background import horizon_gap_of_rstar, lambda_eval  # local use

        eps = horizon_gap_of_rstar(x_s, params)
        r_s = 2.0 * params.M + eps
        lam_s, _ = lambda_eval(r_s, params)
        v_s = tv + lam_s
        u_s = v_s - 2.0 * x_s
        phi = sample_field(field, u_s, v_s)
        maxes.append(float(np.max(np.abs(phi) / r_s)))
    return np.asarray(tv_values, dtype=float), np.asarray(maxes)


def exterior_rescaled_amplitude(field: GridField, window=None):
    """(u, sqrt(r v) |psi|) along the v = v_max edge, psi = phi / r.

    The rescaled amplitude sqrt(r v)|psi| = sqrt(v/r)|phi| is the quantity
    whose outgoing decay in 1 + |u| is probed.
    """
    grid = field.grid
    if grid.flat:
        raise ValueError("exterior decay probe requires a curved background")
    us = grid.us
    if window is None:
        window = (us[0], us[-1])
    sel = (us >= window[0]) & (us <= window[1])
    u_sel = us[sel]
    phi = np.abs(field.values[sel, grid.n])
    kk = 2 * grid.n - np.arange(grid.n + 1)[sel]
    r = grid.r_diag[kk]
    y = np.sqrt(grid.v_max / r) * phi
    return u_sel, y


def exterior_envelope(field: GridField, window, n_bins: int = 10):
    """Binned maxima of the exterior rescaled amplitude over the window."""
    u, y = exterior_rescaled_amplitude(field, window)
    edges = np.linspace(window[0], window[1], n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    env = np.full(n_bins, np.nan)
    for b in range(n_bins):
        m = (u >= edges[b]) & (u <= edges[b + 1])
        if np.any(m):
            env[b] = np.max(y[m])
    return centers, env


def fit_pointwise_decay(
    field: GridField, region: str, window=None, n_slices: int = 25
) -> DecayFit:
    """Pointwise decay fit of the unrescaled amplitude.

    region "near-horizon": slope of log max|psi| against log tilde-v over
    tilde-v in the window; acceptance slope <= -1/2.
    region "exterior": slope of log sqrt(rv)|psi| against log(1 + |u|)
    along the v = v_max edge; acceptance slope <= 0, i.e. the outgoing
    amplitude trends non-increasing across the window (pointwise
    monotonicity is not expected: the ringdown oscillates).
    """
    grid = field.grid
    m_ref = grid.params.M if not grid.flat else 1.0
    if region == "near-horizon":
        if window is None:
            window = (20.0 * m_ref, 80.0 * m_ref)
        tvs = np.linspace(window[0], window[1], n_slices)
        _, maxes = pointwise_series_near_horizon(field, tvs)
        pos = maxes > 0
        if np.count_nonzero(pos) < 3:
            raise ValueError("fit rejected: no positive amplitude samples")
        slope, intercept, r2 = fit_loglog(tvs[pos], maxes[pos])
        return DecayFit(
            tau_lo=float(window[0]), tau_hi=float(window[1]), slope=slope,
            intercept=intercept, r2=r2, n_points=int(np.count_nonzero(pos)),
        )
    if region == "exterior":
        if window is None:
            window = (20.0 * m_ref, 80.0 * m_ref)
        u, y = exterior_rescaled_amplitude(field, window)
        pos = y > 0
        if np.count_nonzero(pos) < 3:
            raise ValueError("fit rejected: no positive amplitude samples")
        slope, intercept, r2 = fit_loglog(1.0 + np.abs(u[pos]), y[pos])
        return DecayFit(
            tau_lo=float(window[0]), tau_hi=float(window[1]), slope=slope,
            intercept=intercept, r2=r2, n_points=int(np.count_nonzero(pos)),
        )
    raise ValueError(f"unknown region {region!r}")


# ---------------------------------------------------------------------------
# half-cylinder embedding probe
# ---------------------------------------------------------------------------

def random_bump_profiles(
    x: np.ndarray, n_profiles: int, seed: int = 0,
    amp_range=(0.2, 3.0), width_fraction=(0.01, 0.08),
):
    """Random Gaussian bumps on the half-cylinder axis, supported inside."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    span = x[-1] - x[0]
    profiles = np.empty((n_profiles, x.size))
    for k in range(n_profiles):
        w = span * rng.uniform(*width_fraction)
        c = rng.uniform(x[0] + 6 * w, x[-1] - 6 * w)
        a = rng.uniform(*amp_range) * rng.choice([-1.0, 1.0])
        profiles[k] = a * np.exp(-(((x - c) / w) ** 2))
    return profiles


def sobolev_ratio(
    x: np.ndarray,
    profiles: np.ndarray,
    gradient_factor: float = 0.0,
    angular_factor: float = 1.0,
):
    """Embedding-quotient table on the half-cylinder (0, L) x S^2.

    Per profile, with quadratic functionals
        l6sq  = (A int phi^6 dx)^(1/3)        (the squared L^6 norm)
        h1sq  = A int (phi'^2 + G phi^2 + phi^2) dx   (the squared H^1 norm)
    the embedding ratio l6sq/h1sq is invariant under phi -> k phi and is
    bounded by the embedding constant; the raw sixth-power quotient
    (int phi^6)/h1sq scales as k^4 and is reported alongside.  Degenerate
    (numerically zero) profiles are excluded.

    Returns (max_ratio, rows) with rows (index, l6sq, h1sq, ratio,
    sixth_over_h1).
    """
    x = np.asarray(x, dtype=float)
    profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
    rows = []
    max_ratio = 0.0
    for k, phi in enumerate(profiles):
        dphi = np.gradient(phi, x, edge_order=2)
        h1 = angular_factor * float(
            np.trapezoid(dphi**2 + gradient_factor * phi**2 + phi**2, x)
        )
        sixth = angular_factor * float(np.trapezoid(phi**6, x))
        if h1 <= 1e-280:
            continue
        l6sq = sixth ** (1.0 / 3.0)
        ratio = l6sq / h1
        rows.append((k, l6sq, h1, ratio, sixth / h1))
        max_ratio = max(max_ratio, ratio)
    if not rows:
        raise ValueError("all profiles degenerate; no ratio defined")
    return max_ratio, rows


# ---------------------------------------------------------------------------
# two-sided estimate audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InequalityRow:
    inequality_id: str
    lhs: float
    rhs: float
    margin: float
    passed: bool


def inequality_audit(
    data: CauchyData,
    field: GridField,
    breakdown: EnergyBreakdown,
    t1: float | None = None,
) -> list:
    """Audit the four two-sided estimates between slice and boundary energies.

    With Ehat the quadratic (quartic-free) slice energy, Ehat0 at t = 0 and
    Ehat1 at the later slice t1, and B = e_hplus + e_iplus the total
    radiation flux:

        ineq1:  B     <= (Ehat0^2 + 1) Ehat0
        ineq2:  Ehat0 <= B
        ineq3:  Ehat0 <= (Ehat0^4 + 2 Ehat0^2 + 2) Ehat1
        ineq4:  Ehat1 <= (Ehat0^2 + 1) Ehat0

    Each is audited with additive slack 2 * closure_residual * e_sigma0.
    The comparison slice defaults to a third of the grid extent so the
    truncated slice still carries the conserved energy (the estimates
    concern untruncated slices; a slice placed after the pulse leaves the
    grid would fake a violation).
    """
    grid = field.grid
    if t1 is None:
        t1 = min(grid.u_max, grid.v_max) / 3.0
    params = grid.params
    ehat0 = quartic_free_energy(data, params)
    slice1, _ = extract_slice(field, t1)
    ehat1 = quartic_free_energy(slice1, params)
    B = breakdown.e_hplus + breakdown.e_iplus
    slack = 2.0 * breakdown.closure_residual * breakdown.e_sigma0
    checks = [
        ("ineq1", B, (ehat0**2 + 1.0) * ehat0),
        ("ineq2", ehat0, B),
        ("ineq3", ehat0, (ehat0**4 + 2.0 * ehat0**2 + 2.0) * ehat1),
        ("ineq4", ehat1, (ehat0**2 + 1.0) * ehat0),
    ]
    rows = []
    for name, lhs, rhs in checks:
        margin = rhs + slack - lhs
        rows.append(
            InequalityRow(
                inequality_id=name, lhs=lhs, rhs=rhs,
                margin=margin, passed=bool(margin >= 0.0),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    """Observed orders across a doubling sequence of resolutions.

    ``field_errors`` holds the max-norm differences between consecutive
    resolutions on common nodes; an order is reported as log2 of the
    error ratio.  When errors sit at round-off the study is flagged
    ``exact`` and orders are left as nan.
    """

    resolutions: list
    field_errors: list
    closure_residuals: list
    roundtrip_residuals: list
    field_order: float
    closure_orders: list
    roundtrip_orders: list
    exact: bool


def _pair_orders(values):
    out = []
    for a, b in zip(values[:-1], values[1:]):
        if a > 0 and b > 0:
            out.append(float(np.log2(a / b)))
        else:
            out.append(float("nan"))
    return out


def convergence_study(
    pulse: GaussianPulse,
    resolutions,
    u_max: float,
    v_max: float,
    params=None,
    mode: ModeSpec | None = None,
    T_max: float | None = None,
    stencil_defect: float = 0.0,
) -> ConvergenceReport:
    """Self-convergence of the field, closure residual, and round trip.

    ``resolutions`` must be successive doublings (common nodes are compared
    directly).  ``params=None`` runs the flat background.  A nonzero
    ``stencil_defect`` exercises the broken-stencil detection path.
    """
    res = [int(n) for n in resolutions]
    if len(res) < 3 or any(res[k + 1] != 2 * res[k] for k in range(len(res) - 1)):
        raise ValueError("resolutions must be at least three successive doublings")
    if mode is None:
        mode = ModeSpec(nonlinear=params is not None)
    fields = []
    closures = []
    roundtrips = []
    from .energy import closure_residual as _closure, feasible_T_max

    for n in res:
        if params is None:
            grid = make_flat_grid(u_max, v_max, n, mode)
        else:
            grid = make_grid(u_max, v_max, n, params, mode)
        if T_max is None:
            # pin the audit surface on the coarsest grid so every
            # resolution balances over the same domain
            T_max = feasible_T_max(grid)
        data = pulse.realize(grid.diagonal_rstar, mode)
        fld = evolve_forward(data, grid, mode, stencil_defect=stencil_defect)
        fields.append(fld)
        closures.append(_closure(fld, T_max))
        roundtrips.append(roundtrip_residual(data, grid, mode))

    errors = []
    for fa, fb in zip(fields[:-1], fields[1:]):
        na = fa.grid.n
        ii, jj = np.meshgrid(np.arange(na + 1), np.arange(na + 1), indexing="ij")
        fut = ii + jj >= na
        diff = np.abs(fa.values[ii, jj] - fb.values[2 * ii, 2 * jj])
        errors.append(float(np.max(diff[fut])))
    scale = max(f.max_abs() for f in fields)
    exact = all(e <= 1e-12 * max(scale, 1e-300) for e in errors)
    if exact or errors[-1] == 0.0:
        field_order = float("nan")
    else:
        field_order = float(np.log2(errors[0] / errors[1]))
    return ConvergenceReport(
        resolutions=res,
        field_errors=errors,
        closure_residuals=closures,
        roundtrip_residuals=roundtrips,
        field_order=field_order,
        closure_orders=_pair_orders(closures),
        roundtrip_orders=_pair_orders(roundtrips),
        exact=exact,
    )
