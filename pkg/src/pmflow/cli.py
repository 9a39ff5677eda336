"""Command-line surface: shock polars, critical angles, solves, sweeps.

Subcommands write deterministic artifacts (CSV with '.' decimals, LF
endings, shortest round-trip floats; JSON with sorted keys) so repeated
runs with the same configuration produce byte-identical files. Exit codes:
0 success, 2 usage or configuration error, 3 numerical stall (partial
artifacts kept), 4 verification failure.
"""

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from ._util import fmt_float, write_csv
from .errors import PMFlowError
from .fbp_solver import SolutionField, reconstruct_phi, solve_fbp
from .geometry_map import MappedDomain, ShockGraph
from .selfsim_states import (
    beta_detach,
    beta_sonic,
    map_PW_to_RW,
    normal_state,
)
from .steady_polar import ShockPolarCurve
from .verify import check_ellipticity, verify_solution


@dataclass
class RunConfig:
    """Validated solver configuration for one (or a sweep of) runs."""

    gamma: float
    v_inf: float
    beta: float
    ns: int
    nt: int
    tol_pde: float
    tol_shock: float

    def to_dict(self):
        return {
            "beta": self.beta,
            "gamma": self.gamma,
            "grid": f"{self.ns}x{self.nt}",
            "tol_pde": self.tol_pde,
            "tol_shock": self.tol_shock,
            "v_inf": self.v_inf,
        }


def _parse_grid(grid):
    try:
        ns_s, nt_s = grid.lower().split("x")
        ns, nt = int(ns_s), int(nt_s)
    except ValueError:
        raise click.UsageError(f"--grid must look like 128x64, got {grid!r}")
    if ns < 8 or nt < 4:
        raise click.UsageError(f"grid {grid} is too coarse (need >= 8x4)")
    return ns, nt


def _make_config(gamma, v_inf, u_inf, u0, beta, grid, tol_pde, tol_shock):
    """Resolve the two parameterizations into (v_inf, beta) and validate."""
    steady = u_inf is not None or u0 is not None
    selfsim = v_inf is not None or beta is not None
    if steady and selfsim:
        raise click.UsageError(
            "give either --v-inf/--beta or --u-inf/--u0, not both"
        )
    if steady:
        if u_inf is None or u0 is None:
            raise click.UsageError("--u-inf and --u0 must be given together")
        try:
            v_inf, beta = map_PW_to_RW(gamma, u_inf, u0)
        except PMFlowError as exc:
            raise click.UsageError(str(exc))
    else:
        if v_inf is None or beta is None:
            raise click.UsageError("--v-inf and --beta are both required")
    if gamma < 1.0:
        raise click.UsageError(f"gamma must be >= 1, got {gamma}")
    if v_inf <= 0.0:
        raise click.UsageError(f"v_inf must be positive, got {v_inf}")
    b_d = beta_detach(gamma, v_inf)
    if not 0.0 <= beta < b_d - 1e-6:
        raise click.UsageError(
            f"beta={fmt_float(beta)} is outside the weak attached branch "
            f"[0, {fmt_float(b_d)}); no admissible configuration there"
        )
    ns, nt = _parse_grid(grid)
    return RunConfig(float(gamma), float(v_inf), float(beta), ns, nt,
                     float(tol_pde), float(tol_shock))


def _jobs_from_env(jobs):
    env = os.environ.get("PMFLOW_THREADS")
    if env is not None:
        try:
            jobs = int(env)
        except ValueError:
            raise click.UsageError(f"PMFLOW_THREADS={env!r} is not an integer")
    if jobs < 1:
        raise click.UsageError(f"job count must be >= 1, got {jobs}")
    return jobs


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_run_artifacts(outdir, cfg, sol, rep):
    """solution.csv, shock.csv, report.json for one solve."""
    outdir.mkdir(parents=True, exist_ok=True)
    S, T = np.meshgrid(sol.s, sol.t, indexing="ij")
    write_csv(outdir / "solution.csv", ["s", "t", "u"],
              [S.ravel(), T.ravel(), sol.u.ravel()])
    st = reconstruct_phi(sol)
    write_csv(outdir / "shock.csv", ["s", "g", "xi1", "xi2"],
              [sol.s, sol.shock.g_values,
               st["shock_xi"][:, 0], st["shock_xi"][:, 1]])
    rep_d = rep.to_dict()
    rep_d.pop("wall_time")  # keep reruns byte-identical
    for k, v in rep_d.items():
        if isinstance(v, float) and not np.isfinite(v):
            rep_d[k] = None
    _write_json(outdir / "report.json",
                {"config": cfg.to_dict(), "report": rep_d})


def _solve_to_dir(cfg, outdir):
    """Run one solve and persist it; returns (solution, report)."""
    sol, rep = solve_fbp(
        cfg.gamma, cfg.v_inf, cfg.beta, ns=cfg.ns, nt=cfg.nt,
        tol_pde=cfg.tol_pde, tol_shock=cfg.tol_shock,
    )
    _write_run_artifacts(outdir, cfg, sol, rep)
    return sol, rep


def _load_solution(rundir):
    """Rebuild a SolutionField from a run directory."""
    rundir = Path(rundir)
    rpt = rundir / "report.json"
    if not rpt.is_file():
        raise click.UsageError(f"{rundir} has no report.json")
    with open(rpt, encoding="utf-8") as fh:
        cfg = json.load(fh)["config"]
    ns, nt = _parse_grid(cfg["grid"])
    data = np.loadtxt(rundir / "solution.csv", delimiter=",", skiprows=1)
    if data.shape[0] != (ns + 1) * (nt + 1):
        raise click.UsageError(
            f"solution.csv has {data.shape[0]} rows, grid says "
            f"{(ns + 1) * (nt + 1)}"
        )
    u = data[:, 2].reshape(ns + 1, nt + 1)
    s = data[:: nt + 1, 0]
    t = data[: nt + 1, 1]
    shk = np.loadtxt(rundir / "shock.csv", delimiter=",", skiprows=1)
    shock = ShockGraph(shk[:, 0], shk[:, 1])
    domain = MappedDomain(cfg["gamma"], cfg["v_inf"], cfg["beta"])
    return SolutionField(cfg["gamma"], cfg["v_inf"], cfg["beta"],
                         s, t, u, shock, domain)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Self-similar shock reflection: polars, angles, solves, verification."""


@main.command()
@click.option("--gamma", type=float, default=1.4, show_default=True)
@click.option("--u-inf", "u_inf", type=float, required=True,
              help="Incoming steady speed, > 1.")
@click.option("--samples", type=int, default=256, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
              default=Path("polar.csv"), show_default=True)
def polar(gamma, u_inf, samples, out):
    """Sample the shock polar of an incoming steady state to CSV.

    The header comments list the critical points: normal-shock speed
    u_hat0, detachment speed u_d and angle theta_d, sonic speed u_s and
    angle theta_s.
    """
    if samples <= 0:
        raise click.UsageError(f"--samples must be positive, got {samples}")
    try:
        curve = ShockPolarCurve(gamma, u_inf)
    except PMFlowError as exc:
        raise click.UsageError(str(exc))
    us = np.linspace(curve.u_hat0, curve.u_inf, samples)
    rows = []
    for u in us:
        b = curve.beta_of_u(u)
        uu, vv, rho = curve.polar_point(b)
        rows.append((uu, vv, rho, b))
    arr = np.asarray(rows)
    head = [
        f"# gamma={fmt_float(gamma)} u_inf={fmt_float(u_inf)}",
        f"# u_hat0={fmt_float(curve.u_hat0)}",
        f"# u_d={fmt_float(curve.u_d)} theta_d={fmt_float(curve.theta_d)}",
        f"# u_s={fmt_float(curve.u_s)} theta_s={fmt_float(curve.theta_s)}",
        "u,v,rho,beta",
    ]
    lines = head + [",".join(fmt_float(x) for x in row) for row in arr]
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(f"wrote {samples} samples to {out}")


@main.command()
@click.option("--gamma", type=float, default=1.4, show_default=True)
@click.option("--v-inf", "v_inf", type=float, required=True)
def angles(gamma, v_inf):
    """Critical angles and normal-reflection state as JSON on stdout."""
    if v_inf <= 0.0 or gamma < 1.0:
        raise click.UsageError(
            f"need v_inf > 0 and gamma >= 1, got v_inf={v_inf} gamma={gamma}"
        )
    try:
        b_s = beta_sonic(gamma, v_inf)
        b_d = beta_detach(gamma, v_inf)
        rho_n, eta_n, c_n = normal_state(gamma, v_inf)
    except PMFlowError as exc:
        raise click.UsageError(str(exc))
    payload = {
        "beta_d": b_d,
        "beta_s": b_s,
        "c_N": c_n,
        "eta_N": eta_n,
        "gamma": float(gamma),
        "rho_N": rho_n,
        "v_inf": float(v_inf),
    }
    click.echo(json.dumps(payload, sort_keys=True, indent=2))


def _solver_options(fn):
    opts = [
        click.option("--gamma", type=float, default=1.4, show_default=True),
        click.option("--v-inf", "v_inf", type=float, default=None),
        click.option("--u-inf", "u_inf", type=float, default=None),
        click.option("--u0", type=float, default=None),
        click.option("--grid", default="128x64", show_default=True,
                     help="Square-domain resolution NSxNT."),
        click.option("--tol-pde", type=float, default=1e-9,
                     show_default=True),
        click.option("--tol-shock", type=float, default=1e-8,
                     show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@main.command()
@_solver_options
@click.option("--beta", type=float, default=None,
              help="Incident shock angle in radians.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path),
              required=True)
@click.pass_context
def solve(ctx, gamma, v_inf, u_inf, u0, beta, grid, tol_pde, tol_shock, out):
    """Solve one reflection configuration into a run directory.

    Writes solution.csv (s, t, u), shock.csv (s, g, xi1, xi2) and
    report.json. Exits 3 when the continuation stalls; the artifacts of
    the last converged state are still written.
    """
    cfg = _make_config(gamma, v_inf, u_inf, u0, beta, grid,
                       tol_pde, tol_shock)
    sol, rep = _solve_to_dir(cfg, out)
    if rep.stalled or not rep.converged:
        click.echo(
            f"stalled at beta={fmt_float(rep.beta_reached)} "
            f"(target {fmt_float(cfg.beta)}); partial artifacts in {out}",
            err=True,
        )
        ctx.exit(3)
    click.echo(
        f"converged in {rep.outer_iterations} outer iterations, "
        f"shock move {fmt_float(rep.shock_move)}; artifacts in {out}"
    )


@main.command()
@click.argument("rundir",
                type=click.Path(exists=True, file_okay=False,
                                path_type=Path))
@click.pass_context
def verify(ctx, rundir):
    """Run the admissibility suite on a solved run directory.

    Writes admissibility.json next to the solver artifacts; exits 4 when
    any check fails.
    """
    sol = _load_solution(rundir)
    report = verify_solution(sol)
    _write_json(rundir / "admissibility.json", report.to_dict())
    for chk in report.checks:
        status = "pass" if chk.passed else "FAIL"
        click.echo(f"{chk.name:20s} {status}  margin "
                   f"{fmt_float(chk.worst_margin)}")
    if not report.verdict:
        ctx.exit(4)


@main.command()
@_solver_options
@click.option("--beta-list", required=True,
              help="Comma-separated incident angles in radians.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel solves; PMFLOW_THREADS overrides.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path),
              required=True)
@click.pass_context
def sweep(ctx, gamma, v_inf, u_inf, u0, grid, tol_pde, tol_shock,
          beta_list, jobs, out):
    """Solve a list of angles into per-angle directories plus summary.csv.

    The summary records, per angle: iteration count, the fitted
    ellipticity modulus, the shock endpoints, and the arc topology
    (supersonic-corner below the sonic angle, sonic-point above).
    """
    try:
        betas = [float(x) for x in beta_list.split(",") if x.strip()]
    except ValueError:
        raise click.UsageError(f"bad --beta-list {beta_list!r}")
    if not betas:
        raise click.UsageError("--beta-list is empty")
    cfgs = [
        _make_config(gamma, v_inf, u_inf, u0, b, grid, tol_pde, tol_shock)
        for b in betas
    ]
    jobs = _jobs_from_env(jobs)
    out.mkdir(parents=True, exist_ok=True)
    dirs = [out / f"beta_{k:03d}" for k in range(len(cfgs))]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futs = [pool.submit(_solve_to_dir, c, d)
                for c, d in zip(cfgs, dirs)]
        results = [f.result() for f in futs]

    lines = ["beta,iterations,mu_el,xi1_O,xi2_O,xi1_N,xi2_N,topology"]
    stalled = False
    for cfg, (sol, rep) in zip(cfgs, results):
        stalled |= rep.stalled or not rep.converged
        mu = check_ellipticity(sol).details["mu"]
        st = reconstruct_phi(sol)
        vals = [cfg.beta, rep.outer_iterations, mu,
                st["shock_xi"][0, 0], st["shock_xi"][0, 1],
                st["shock_xi"][-1, 0], st["shock_xi"][-1, 1]]
        lines.append(",".join(fmt_float(v) for v in vals)
                     + "," + sol.domain.geo.tag)
    with open(out / "summary.csv", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(f"swept {len(cfgs)} angles into {out}")
    if stalled:
        ctx.exit(3)


@main.command()
@click.argument("rundir", type=click.Path(exists=True, path_type=Path))
@click.option("--what", type=click.Choice(["shock", "field", "polar"]),
              required=True)
def plotdata(rundir, what):
    """Emit gnuplot-ready whitespace-separated data on stdout.

    shock: xi1 xi2 along the free boundary; field: s t u with blank lines
    between grid rows; polar: u v from a polar.csv sampling.
    """
    if what == "shock":
        shk = np.loadtxt(Path(rundir) / "shock.csv", delimiter=",",
                         skiprows=1)
        for row in shk:
            click.echo(f"{fmt_float(row[2])} {fmt_float(row[3])}")
        return
    if what == "field":
        data = np.loadtxt(Path(rundir) / "solution.csv", delimiter=",",
                          skiprows=1)
        prev_s = None
        for row in data:
            if prev_s is not None and row[0] != prev_s:
                click.echo("")
            prev_s = row[0]
            click.echo(" ".join(fmt_float(x) for x in row))
        return
    src = Path(rundir)
    if src.is_dir():
        src = src / "polar.csv"
    if not src.is_file():
        raise click.UsageError(f"no polar samples at {src}")
    body = [l for l in src.read_text().splitlines()
            if l and not l.startswith("#")]
    for line in body[1:]:
        u, v = line.split(",")[:2]
        click.echo(f"{u} {v}")


if __name__ == "__main__":
    sys.exit(main())
