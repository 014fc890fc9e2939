"""Configuration-driven command line front end.

One JSON document configures a run; subcommands drive the pipelines and
emit CSV artifacts (fixed column order, 17-significant-digit floats, so
identical config + seed reproduces byte-identical files) plus static SVG
plots.  Plots embed no timestamps unless --stamp is passed.

Exit codes: 0 success, 2 configuration error, 3 evolution failure,
4 I/O error, 5 corner-incompatible Goursat data.

Config schema (all sections optional unless noted; unknown keys are
rejected)::

    {
      "params":  {"M": 1.0, "r_FH": 10.0, "newton_tol": 1e-12},
      "flat":    false,
      "mode":    {"l": 0, "nonlinear": true,
                  "convention": "spherically-symmetric"},
      "grid":    {"u_max": 120.0, "v_max": 120.0, "n": 1024},
      "data":    {"kind": "gaussian", "A": 1.0, "c": 10.0, "w": 2.0,
                  "psi1": "time-symmetric"}
                 or {"kind": "file", "path": "cauchy.csv"},
      "outputs": "out",
      "seed":    1,
      "audit":   {"T_values": [...], "t1": 40.0},
      "fit":     {"tau_lo": 20.0, "tau_hi": 80.0},
      "sweep":   {"n_pairs": 20, "ball_radius": 0.5,
                  "amplitudes": [1.0]},
      "sobolev": {"n_profiles": 100, "n_points": 600, "length": 40.0}
    }
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import (  # noqa: E402
    convergence_study,
    exterior_envelope,
    fit_energy_decay,
    fit_pointwise_decay,
    inequality_audit,
    pointwise_series_near_horizon,
    random_bump_profiles,
    sobolev_ratio,
)
from .background import BlackHoleParams  # noqa: E402
from .energy import audit_energy, default_audit_times  # noqa: E402
from .evolve import (  # noqa: E402
    EvolutionError,
    evolve_forward,
    evolve_goursat,
    extract_radiation,
    restrict_to_cauchy,
)
from .fields import (  # noqa: E402
    BoundaryData,
    CauchyData,
    CornerCompatibilityError,
    GaussianPulse,
    ModeSpec,
    NullGrid,
    make_flat_grid,
    make_grid,
    read_csv,
    sample_gaussian,
    write_csv,
)
from .scattering import build_scattering_report, roundtrip_residual, trace_forward  # noqa: E402
from .scattering import data_norm_on_grid, inverse_trace  # noqa: E402

plt.rcParams["svg.hashsalt"] = "scatterlab"

HDR_HPLUS = "v,xi,dxi_dv"
HDR_IPLUS = "u,zeta,dzeta_du"
HDR_CAUCHY = "rstar,psi0,psi1"


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _check_keys(name: str, d: dict, allowed):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")


@dataclass
class RunConfig:
    """Validated run configuration (see module docstring for the schema)."""

    params: BlackHoleParams | None
    flat: bool
    mode: ModeSpec
    u_max: float
    v_max: float
    n: int
    data: dict
    outputs: str | None
    seed: int
    audit: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    sobolev: dict = field(default_factory=dict)

    def build_grid(self, n: int | None = None) -> NullGrid:
        n = self.n if n is None else n
        if self.flat:
            return make_flat_grid(self.u_max, self.v_max, n, self.mode)
        return make_grid(self.u_max, self.v_max, n, self.params, self.mode)

    def build_data(self, grid: NullGrid) -> CauchyData:
        if self.data["kind"] == "gaussian":
            return sample_gaussian(
                self.data["A"], self.data["c"], self.data["w"], grid,
                kind=self.data["psi1"],
            )
        _, cols = read_csv(self.data["path"], HDR_CAUCHY)
        return CauchyData(rstar=cols[0], psi0=cols[1], psi1=cols[2], mode=grid.mode)


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(
        "config", doc,
        ["params", "flat", "mode", "grid", "data", "outputs", "seed",
         "audit", "fit", "sweep", "sobolev"],
    )
    try:
        flat = bool(doc.get("flat", False))
        pd = doc.get("params", {})
        _check_keys("params", pd, ["M", "r_FH", "newton_tol"])
        params = None if flat else BlackHoleParams(
            M=float(pd.get("M", 1.0)),
            r_FH=float(pd.get("r_FH", 10.0)),
            newton_tol=float(pd.get("newton_tol", 1e-12)),
        )
        md = doc.get("mode", {})
        _check_keys("mode", md, ["l", "nonlinear", "convention"])
        mode = ModeSpec(
            l=int(md.get("l", 0)),
            nonlinear=bool(md.get("nonlinear", not flat)),
            convention=md.get("convention", "spherically-symmetric"),
        )
        gd = doc.get("grid", {})
        _check_keys("grid", gd, ["u_max", "v_max", "n"])
        u_max = float(gd.get("u_max", 120.0))
        v_max = float(gd.get("v_max", 120.0))
        n = int(gd.get("n", 512))
        if n < 8:
            raise ConfigError(f"grid precondition violated: n must be >= 8, got {n}")
        if not u_max > -v_max:
            raise ConfigError(
                "grid precondition violated: require u_max > -v_max"
            )
        dd = dict(doc.get("data", {}))
        kind = dd.get("kind", "gaussian")
        if kind == "gaussian":
            _check_keys("data", dd, ["kind", "A", "c", "w", "psi1"])
            data = {
                "kind": "gaussian",
                "A": float(dd.get("A", 1.0)),
                "c": float(dd.get("c", 10.0)),
                "w": float(dd.get("w", 2.0)),
                "psi1": dd.get("psi1", "time-symmetric"),
            }
            if data["w"] <= 0:
                raise ConfigError("data precondition violated: w must be > 0")
        elif kind == "file":
            _check_keys("data", dd, ["kind", "path"])
            if "path" not in dd:
                raise ConfigError("data kind 'file' requires a path")
            data = {"kind": "file", "path": dd["path"]}
        else:
            raise ConfigError(f"unknown data kind {kind!r}")
        ad = doc.get("audit", {})
        _check_keys("audit", ad, ["T_values", "t1"])
        fd = doc.get("fit", {})
        _check_keys("fit", fd, ["tau_lo", "tau_hi"])
        sw = doc.get("sweep", {})
        _check_keys("sweep", sw, ["n_pairs", "ball_radius", "amplitudes"])
        sb = doc.get("sobolev", {})
        _check_keys("sobolev", sb, ["n_profiles", "n_points", "length"])
        return RunConfig(
            params=params, flat=flat, mode=mode,
            u_max=u_max, v_max=v_max, n=n,
            data=data, outputs=doc.get("outputs"),
            seed=int(doc.get("seed", 0)),
            audit=dict(ad), fit=dict(fd), sweep=dict(sw), sobolev=dict(sb),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc)


# ---------------------------------------------------------------------------
# emission helpers
# ---------------------------------------------------------------------------

def _outdir(cfg: RunConfig, cli_out: str | None) -> str:
    out = cli_out or cfg.outputs or "out"
    os.makedirs(out, exist_ok=True)
    return out


def _save_fig(fig, path: str, stamp: bool):
    metadata = None if stamp else {"Date": None}
    fig.savefig(path, metadata=metadata)
    plt.close(fig)


def _write_summary(out: str, payload: dict):
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_radiation(out: str, bdata: BoundaryData):
    write_csv(
        os.path.join(out, "radiation_Hplus.csv"),
        HDR_HPLUS, (bdata.v, bdata.xi, bdata.dxi_dv),
    )
    write_csv(
        os.path.join(out, "radiation_Iplus.csv"),
        HDR_IPLUS, (bdata.u, bdata.zeta, bdata.dzeta_du),
    )


def _audit_times(cfg: RunConfig, grid: NullGrid):
    if cfg.audit.get("T_values"):
        return np.asarray(cfg.audit["T_values"], dtype=float)
    return default_audit_times(grid)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_forward(cfg: RunConfig, out: str, stamp: bool) -> int:
    grid = cfg.build_grid()
    data = cfg.build_data(grid)
    fld = evolve_forward(data, grid)
    bdata = extract_radiation(fld)
    _write_radiation(out, bdata)
    breakdown = audit_energy(fld, _audit_times(cfg, grid))
    breakdown.to_csv(os.path.join(out, "energy_audit.csv"))
    _write_summary(out, {
        "n": grid.n,
        "h": grid.h,
        "max_abs_field": fld.max_abs(),
        "E_sigma0": breakdown.e_sigma0,
        "E_Hplus": breakdown.e_hplus,
        "E_Iplus": breakdown.e_iplus,
        "closure_residual": breakdown.closure_residual,
    })
    return 0


def cmd_goursat(cfg: RunConfig, out: str, stamp: bool, hplus: str, iplus: str) -> int:
    grid = cfg.build_grid()
    _, hcols = read_csv(hplus, HDR_HPLUS)
    _, icols = read_csv(iplus, HDR_IPLUS)
    bdata = BoundaryData(
        v=hcols[0], xi=hcols[1], u=icols[0], zeta=icols[1],
        mode=grid.mode, grid=grid, dxi_dv=hcols[2], dzeta_du=icols[2],
    )
    fld = evolve_goursat(bdata, grid)
    rec = restrict_to_cauchy(fld)
    write_csv(
        os.path.join(out, "cauchy_out.csv"),
        HDR_CAUCHY, (rec.rstar, rec.psi0, rec.psi1),
    )
    return 0


def cmd_roundtrip(cfg: RunConfig, out: str, stamp: bool) -> int:
    grid = cfg.build_grid()
    data = cfg.build_data(grid)
    bdata = trace_forward(data, grid)
    rec = inverse_trace(bdata, grid)
    resid = roundtrip_residual(data, grid)
    write_csv(
        os.path.join(out, "roundtrip.csv"),
        "n,h,roundtrip_residual,data_norm",
        ([grid.n], [grid.h], [resid], [data_norm_on_grid(data, grid)]),
    )
    write_csv(
        os.path.join(out, "cauchy_out.csv"),
        HDR_CAUCHY, (rec.rstar, rec.psi0, rec.psi1),
    )
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(data.rstar, data.psi0, label="input")
    ax.plot(rec.rstar, rec.psi0, "--", label="recovered")
    ax.set_xlabel("r_*")
    ax.set_ylabel("field")
    ax.set_title(f"round trip, n={grid.n}, residual={resid:.2e}")
    ax.legend()
    _save_fig(fig, os.path.join(out, "roundtrip_profiles.svg"), stamp)
    print(f"roundtrip_residual = {resid:.6e}")
    return 0


def cmd_energy_audit(cfg: RunConfig, out: str, stamp: bool) -> int:
    grid = cfg.build_grid()
    data = cfg.build_data(grid)
    fld = evolve_forward(data, grid)
    breakdown = audit_energy(fld, _audit_times(cfg, grid))
    breakdown.to_csv(os.path.join(out, "energy_audit.csv"))
    rows = inequality_audit(data, fld, breakdown, t1=cfg.audit.get("t1"))
    write_csv(
        os.path.join(out, "inequality_audit.csv"),
        "inequality_id,lhs,rhs,margin,pass",
        (
            [float(k) for k in range(1, len(rows) + 1)],
            [r.lhs for r in rows],
            [r.rhs for r in rows],
            [r.margin for r in rows],
            [1.0 if r.passed else 0.0 for r in rows],
        ),
    )
    Ts = [r.T for r in breakdown.rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(Ts, [max(r.e_st_total, 1e-300) for r in breakdown.rows], "o-",
                label="E through late surface")
    ax.semilogy(Ts, [max(r.e_hplus_cum + r.e_iplus_cum, 1e-300)
                     for r in breakdown.rows], "s-", label="cumulative edge flux")
    ax.axhline(breakdown.e_sigma0, color="k", lw=0.8, label="initial energy")
    ax.set_xlabel("T")
    ax.set_ylabel("energy")
    ax.legend()
    _save_fig(fig, os.path.join(out, "energy_vs_T.svg"), stamp)
    _write_summary(out, {
        "E_sigma0": breakdown.e_sigma0,
        "closure_residual": breakdown.closure_residual,
        "inequalities_pass": all(r.passed for r in rows),
    })
    print(f"closure_residual = {breakdown.closure_residual:.6e}")
    return 0


def cmd_decay_fit(cfg: RunConfig, out: str, stamp: bool) -> int:
    grid = cfg.build_grid()
    data = cfg.build_data(grid)
    fld = evolve_forward(data, grid)
    m_ref = 1.0 if cfg.flat else cfg.params.M
    window = (
        float(cfg.fit.get("tau_lo", 20.0 * m_ref)),
        float(cfg.fit.get("tau_hi", 80.0 * m_ref)),
    )
    breakdown = audit_energy(fld, _audit_times(cfg, grid))
    taus = np.array([r.T for r in breakdown.rows])
    es = np.array([r.e_st_total for r in breakdown.rows])
    efit = fit_energy_decay(taus, es, window)
    write_csv(os.path.join(out, "decay_series.csv"), "tau,E_ST", (taus, es))
    fits = [("energy", efit)]
    if not cfg.flat:
        fits.append(("near-horizon", fit_pointwise_decay(fld, "near-horizon", window)))
        fits.append(("exterior", fit_pointwise_decay(fld, "exterior", window)))
        tvs = np.linspace(window[0], window[1], 25)
        _, maxes = pointwise_series_near_horizon(fld, tvs)
        write_csv(
            os.path.join(out, "pointwise_series.csv"),
            "tilde_v,max_abs_psi", (tvs, maxes),
        )
        centers, env = exterior_envelope(fld, window)
        write_csv(
            os.path.join(out, "exterior_envelope.csv"),
            "u,rescaled_amplitude", (centers, env),
        )
    with open(os.path.join(out, "decay_fit.csv"), "w") as fh:
        fh.write("region,tau_lo,tau_hi,slope,r2\n")
        for name, f in fits:
            fh.write(
                f"{name},{f.tau_lo:.17g},{f.tau_hi:.17g},"
                f"{f.slope:.17g},{f.r2:.17g}\n"
            )
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.sqrt(4 + taus**2)
    ax.loglog(x, np.maximum(es, 1e-300), "o", label="late-surface energy")
    xs = np.linspace(np.log(x[0]), np.log(x[-1]), 50)
    ax.loglog(np.exp(xs), np.exp(efit.intercept + efit.slope * xs), "-",
              label=f"fit slope {efit.slope:.2f}")
    ax.set_xlabel("sqrt(4 + tau^2)")
    ax.set_ylabel("energy")
    ax.legend()
    _save_fig(fig, os.path.join(out, "decay_loglog.svg"), stamp)
    for name, f in fits:
        print(f"{name}: slope={f.slope:.4f} r2={f.r2:.4f}")
    return 0


def cmd_converge(cfg: RunConfig, out: str, stamp: bool, resolutions) -> int:
    if resolutions is None:
        res = [cfg.n, 2 * cfg.n, 4 * cfg.n]
    else:
        res = [int(s) for s in resolutions.split(",")]
    if cfg.data["kind"] != "gaussian":
        raise ConfigError("converge requires gaussian data")
    pulse = GaussianPulse(
        A=cfg.data["A"], c=cfg.data["c"], w=cfg.data["w"], kind=cfg.data["psi1"]
    )
    report = convergence_study(
        pulse, res, cfg.u_max, cfg.v_max,
        params=cfg.params, mode=cfg.mode,
    )
    ferr = list(report.field_errors) + [float("nan")]
    write_csv(
        os.path.join(out, "convergence.csv"),
        "n,closure_residual,roundtrip_residual,field_error_to_next",
        (
            [float(n) for n in report.resolutions],
            report.closure_residuals,
            report.roundtrip_residuals,
            ferr,
        ),
    )
    _write_summary(out, {
        "exact": report.exact,
        "field_order": report.field_order,
        "closure_orders": report.closure_orders,
        "roundtrip_orders": report.roundtrip_orders,
    })
    if not report.exact:
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.loglog(report.resolutions, report.closure_residuals, "o-",
                  label="closure residual")
        ax.loglog(report.resolutions, report.roundtrip_residuals, "s-",
                  label="roundtrip residual")
        ax.loglog(report.resolutions[:-1], report.field_errors, "^-",
                  label="field self-difference")
        ax.set_xlabel("n")
        ax.legend()
        _save_fig(fig, os.path.join(out, "convergence_orders.svg"), stamp)
        print(f"field order = {report.field_order:.3f}")
    else:
        print("exact: errors at round-off, orders undefined")
    return 0


def cmd_sobolev(cfg: RunConfig, out: str, stamp: bool) -> int:
    n_prof = int(cfg.sobolev.get("n_profiles", 100))
    n_pts = int(cfg.sobolev.get("n_points", 600))
    length = float(cfg.sobolev.get("length", 40.0))
    x1 = np.linspace(0.0, length, n_pts + 1)
    x2 = np.linspace(0.0, length, 2 * n_pts + 1)
    prof1 = random_bump_profiles(x1, n_prof, seed=cfg.seed)
    prof2 = random_bump_profiles(x2, n_prof, seed=cfg.seed)
    max1, _ = sobolev_ratio(x1, prof1)
    max2, rows = sobolev_ratio(x2, prof2)
    write_csv(
        os.path.join(out, "sobolev.csv"),
        "profile,l6_sq,h1_sq,ratio,sixth_over_h1",
        tuple(zip(*[(float(r[0]), r[1], r[2], r[3], r[4]) for r in rows])),
    )
    change = abs(max2 - max1) / max1
    _write_summary(out, {
        "max_ratio_coarse": max1,
        "max_ratio_fine": max2,
        "relative_change": change,
    })
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist([r[3] for r in rows], bins=20)
    ax.set_xlabel("embedding ratio")
    ax.set_ylabel("count")
    _save_fig(fig, os.path.join(out, "sobolev_ratios.svg"), stamp)
    print(f"max ratio = {max2:.6f} (refinement change {change:.2e})")
    return 0


def cmd_scatter(cfg: RunConfig, out: str, stamp: bool) -> int:
    grid = cfg.build_grid()
    n_pairs = int(cfg.sweep.get("n_pairs", 20))
    ball = float(cfg.sweep.get("ball_radius", 0.5))
    amplitudes = cfg.sweep.get("amplitudes")
    if cfg.data["kind"] != "gaussian":
        raise ConfigError("scatter requires gaussian data")
    if not amplitudes:
        amplitudes = [cfg.data["A"]]
    table = []
    pair_rows = []
    for run_id, amp in enumerate(amplitudes):
        data = sample_gaussian(
            amp, cfg.data["c"], cfg.data["w"], grid, kind=cfg.data["psi1"]
        )
        report, rows = build_scattering_report(
            data, grid, n_pairs=n_pairs, ball_radius=ball,
            seed=cfg.seed + run_id,
        )
        table.append((
            float(run_id), grid.h, report.forward_norm_ratio,
            report.roundtrip_residual, report.lipschitz_ratio, ball,
        ))
        pair_rows += [(float(run_id), float(p), r, q) for (p, r, q) in rows]
    write_csv(
        os.path.join(out, "scattering_report.csv"),
        "run_id,h,forward_norm_ratio,roundtrip_residual,lipschitz_max_ratio,ball_radius",
        tuple(zip(*table)),
    )
    write_csv(
        os.path.join(out, "lipschitz_pairs.csv"),
        "run_id,pair_id,radius,ratio",
        tuple(zip(*pair_rows)),
    )
    data = sample_gaussian(
        amplitudes[-1], cfg.data["c"], cfg.data["w"], grid, kind=cfg.data["psi1"]
    )
    bdata = trace_forward(data, grid)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(bdata.u, bdata.zeta, label="outgoing radiation")
    ax.plot(bdata.v, bdata.xi, label="horizon signal")
    ax.set_xlabel("edge coordinate")
    ax.legend()
    _save_fig(fig, os.path.join(out, "scatter_profiles.svg"), stamp)
    print(f"lipschitz max ratio = {table[-1][4]:.6f}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scatterlab",
        description="characteristic evolution and scattering audits",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    names = [
        "forward", "goursat", "roundtrip", "energy-audit",
        "decay-fit", "converge", "sobolev", "scatter",
    ]
    for name in names:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--stamp", action="store_true",
                       help="allow timestamps in plot metadata")
        if name == "converge":
            p.add_argument("--resolutions", default=None,
                           help="comma-separated resolutions, e.g. 256,512,1024")
        if name == "goursat":
            p.add_argument("--hplus", required=True,
                           help="radiation_Hplus.csv path")
            p.add_argument("--iplus", required=True,
                           help="radiation_Iplus.csv path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = _outdir(cfg, args.out)
        if args.command == "forward":
            return cmd_forward(cfg, out, args.stamp)
        if args.command == "goursat":
            return cmd_goursat(cfg, out, args.stamp, args.hplus, args.iplus)
        if args.command == "roundtrip":
            return cmd_roundtrip(cfg, out, args.stamp)
        if args.command == "energy-audit":
            return cmd_energy_audit(cfg, out, args.stamp)
        if args.command == "decay-fit":
            return cmd_decay_fit(cfg, out, args.stamp)
        if args.command == "converge":
            return cmd_converge(cfg, out, args.stamp, args.resolutions)
        if args.command == "sobolev":
            return cmd_sobolev(cfg, out, args.stamp)
        if args.command == "scatter":
            return cmd_scatter(cfg, out, args.stamp)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CornerCompatibilityError as exc:
        print(f"corner incompatibility: {exc}", file=sys.stderr)
        return 5
    except (EvolutionError, FloatingPointError) as exc:
        print(f"evolution failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
