"""Schwarzschild exterior geometry: metric functions and coordinate maps.

Conventions used throughout the package:

* geometric units G = c = 1, so the mass M carries dimension of length;
* the exterior region is r > 2M;
* the tortoise coordinate is r_* = r + 2M log(r - 2M) with the natural
  logarithm and no normalisation inside the log, so dr_*/dr = 1/F exactly
  (any other convention breaks that identity, which the flux algebra relies
  on);
* retarded/advanced null coordinates u = t - r_*, v = t + r_*;
* the interior slicing function lambda(r) equals r_* outside r = 5M/2 and
  continues inward with the constant slope 1/F(5M/2) = 5, which keeps
  lambda increasing, lambda >= r_*, and 2 - F lambda' > 0 everywhere.

All functions are pure and accept scalars or numpy arrays; they are safe to
call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BlackHoleParams",
    "LambdaProfile",
    "DomainError",
    "ConvergenceError",
    "metric_F",
    "rstar_of_r",
    "horizon_gap_of_rstar",
    "r_of_rstar",
    "lambda_eval",
    "null_coords",
    "coords_from_null",
    "tilde_v",
]


class DomainError(ValueError):
    """Coordinate outside the exterior region r > 2M."""


class ConvergenceError(RuntimeError):
    """Root solve for the inverse tortoise map failed to converge."""


@dataclass(frozen=True)
class BlackHoleParams:
    """Mass and foliation parameters of the background.

    Attributes:
        M: black-hole mass (length units), must be positive.
        r_FH: matching radius where the mixed foliation switches from a
            spacelike to an outgoing null leaf; must exceed 5M.
        newton_tol: absolute residual tolerance for the inverse tortoise
            solve.
    """

    M: float = 1.0
    r_FH: float = 10.0
    newton_tol: float = 1e-12

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"M must be positive, got {self.M}")
        if not self.r_FH > 5 * self.M:
            raise ValueError(
                f"r_FH must exceed 5M = {5 * self.M}, got {self.r_FH}"
            )
        if not 0 < self.newton_tol <= 1e-6:
            raise ValueError(
                f"newton_tol must lie in (0, 1e-6], got {self.newton_tol}"
            )

    @property
    def r_horizon(self) -> float:
        return 2.0 * self.M

    @property
    def rstar_fh(self) -> float:
        """Tortoise coordinate of the foliation matching radius."""
        return float(rstar_of_r(self.r_FH, self))


@dataclass(frozen=True)
class LambdaProfile:
    """Concrete interior slicing profile.

    Outside ``r_break = 5M/2`` the profile coincides with r_*; inside it is
    linear with slope ``slope_inner = 1/F(5M/2) = 5`` (mass independent).
    ``rstar_break`` is the continuity constant r_*(5M/2).
    """

    r_break: float
    slope_inner: float
    rstar_break: float

    @classmethod
    def for_params(cls, params: BlackHoleParams) -> "LambdaProfile":
        r_break = 2.5 * params.M
        return cls(
            r_break=r_break,
            slope_inner=5.0,
            rstar_break=float(rstar_of_r(r_break, params)),
        )


def _check_exterior(r, params: BlackHoleParams):
    if np.any(np.asarray(r) <= 2.0 * params.M):
        raise DomainError(f"require r > 2M = {2 * params.M}")


def metric_F(r, params: BlackHoleParams):
    """Lapse-squared factor F(r) = 1 - 2M/r of the static metric."""
    _check_exterior(r, params)
    return 1.0 - 2.0 * params.M / np.asarray(r, dtype=float)


def rstar_of_r(r, params: BlackHoleParams):
    """Tortoise coordinate r_* = r + 2M log(r - 2M)."""
    _check_exterior(r, params)
    r = np.asarray(r, dtype=float)
    return r + 2.0 * params.M * np.log(r - 2.0 * params.M)


def horizon_gap_of_rstar(x, params: BlackHoleParams):
    """Distance above the horizon, eps = r - 2M, at tortoise coordinate x.

    Solves eps + 2M log(eps) = x - 2M in eta = log(eps).  Working in eta
    keeps the solve well conditioned arbitrarily close to the horizon,
    where eps underflows the spacing of float64 around r = 2M (for
    x << -2M the gap is e^{(x-2M)/2M}, far below 2M * machine-eps); the
    returned gap is then the quantity from which F = eps/r can still be
    computed accurately.

    Raises ConvergenceError when the residual tolerance cannot be met.
    """
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    M = params.M
    rhs = x_arr - 2.0 * M

    def g(eta):
        return np.exp(eta) + 2.0 * M * eta - rhs

    # eta_hi with g >= 0: below x = 2M+1 the linear term alone suffices,
    # above it log(x - 2M) does (and avoids exp overflow).
    eta_hi = np.where(
        x_arr < 2.0 * M + 1.0,
        rhs / (2.0 * M),
        np.log(np.maximum(x_arr - 2.0 * M, 1.0)),
    )
    eta_lo = eta_hi - 2.0
    for _ in range(200):
        bad = g(eta_lo) >= 0
        if not np.any(bad):
            break
        eta_lo = np.where(bad, 2.0 * eta_lo - eta_hi, eta_lo)
    for _ in range(90):
        mid = 0.5 * (eta_lo + eta_hi)
        gm = g(mid)
        eta_lo = np.where(gm < 0, mid, eta_lo)
        eta_hi = np.where(gm >= 0, mid, eta_hi)
    eta = 0.5 * (eta_lo + eta_hi)
    for _ in range(6):
        eta = eta - g(eta) / (np.exp(eta) + 2.0 * M)
        eta = np.clip(eta, eta_lo - 1.0, eta_hi + 1.0)
    resid = np.abs(g(eta))
    tol = params.newton_tol * np.maximum(1.0, np.abs(x_arr))
    if np.any(resid > tol):
        worst = float(np.max(resid))
        raise ConvergenceError(
            f"inverse tortoise solve residual {worst:.3e} exceeds tolerance"
        )
    eps = np.exp(eta)
    return float(eps[0]) if scalar else eps


def r_of_rstar(x, params: BlackHoleParams):
    """Inverse tortoise map: the unique r > 2M with rstar_of_r(r) = x."""
    return 2.0 * params.M + horizon_gap_of_rstar(x, params)


def lambda_eval(r, params: BlackHoleParams):
    """Interior slicing function: returns (lambda(r), lambda'(r)).

    lambda' = 1/F for r >= 5M/2 and the constant 5 inside, with lambda
    matched continuously at r = 5M/2.
    """
    _check_exterior(r, params)
    r_arr = np.asarray(r, dtype=float)
    scalar = r_arr.ndim == 0
    r_arr = np.atleast_1d(r_arr)
    prof = LambdaProfile.for_params(params)
    outer = r_arr >= prof.r_break
    lam = np.empty_like(r_arr)
    dlam = np.empty_like(r_arr)
    if np.any(outer):
        lam[outer] = rstar_of_r(r_arr[outer], params)
        dlam[outer] = 1.0 / metric_F(r_arr[outer], params)
    inner = ~outer
    lam[inner] = prof.rstar_break + prof.slope_inner * (r_arr[inner] - prof.r_break)
    dlam[inner] = prof.slope_inner
    if scalar:
        return float(lam[0]), float(dlam[0])
    return lam, dlam


def null_coords(t, rstar):
    """Retarded/advanced pair (u, v) = (t - r_*, t + r_*)."""
    t = np.asarray(t, dtype=float)
    rstar = np.asarray(rstar, dtype=float)
    return t - rstar, t + rstar


def coords_from_null(u, v):
    """Inverse of null_coords: (t, r_*) = ((u+v)/2, (v-u)/2)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return 0.5 * (u + v), 0.5 * (v - u)


def tilde_v(t, rstar, params: BlackHoleParams):
    """Horizon-regular time t + r_* - lambda(r); equals t for r >= 5M/2."""
    t_arr = np.asarray(t, dtype=float)
    x_arr = np.asarray(rstar, dtype=float)
    scalar = t_arr.ndim == 0 and x_arr.ndim == 0
    t_arr, x_arr = np.broadcast_arrays(np.atleast_1d(t_arr), np.atleast_1d(x_arr))
    prof = LambdaProfile.for_params(params)
    out = t_arr.astype(float).copy()
    inner = x_arr < prof.rstar_break
    if np.any(inner):
        r_in = r_of_rstar(x_arr[inner], params)
        lam_in, _ = lambda_eval(r_in, params)
        out[inner] = t_arr[inner] + x_arr[inner] - lam_in
    if scalar:
        return float(out[0])
    return out
