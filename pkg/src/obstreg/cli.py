"""Command-line front end.

``obstreg <solve|verify|theory|dini|sweep|plot> --scenario PATH [--out DIR]
[--jobs N] [--seed S] [--inject-perturbation EPS]``

Exit codes: 0 success, 1 usage, 2 scenario parse/validation error,
3 solver did not converge, 4 check violations (``verify`` only).

Output files (all CSV: header row, RFC-4180 quoting, 17 significant digits):

* ``solution.csv``  ``x,u,f,g,slope``; ``slope`` is the slope of the cell to
  the right of ``x`` (the last node repeats the final cell)
* ``energy.txt``    energy, iterations, KKT residual, convergence flag
* ``report.csv``    ``section,item,value`` and a readable ``report.txt``
* ``constants.csv`` ``name,k,value``; scalar constants have an empty ``k``
* ``pipeline.csv``  ``k,eps,Delta1,Delta2,Delta,delta`` on the 20x20 lattice
* ``dini.csv``      ``h,theta,eps,value,verdict``
* ``sweep.csv``     ``point,<swept keys...>,exit_code`` (sweep only)
* ``manifest.txt``  version, command, seed, scenario hash and output hashes
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InfeasibleSpec, ParseError, SolverFailed, ValidationError
from .regularity import build_theory, dini_suite, tonelli_report
from .scenario import apply_overrides, parse_scenario
from .theory import default_lattice
from .variational import solve

COMMANDS = ("solve", "verify", "theory", "dini", "sweep", "plot")
EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SOLVER, EXIT_VIOLATIONS = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out, sc, command, files, perturbation=None):
    lines = [
        f"version: {__version__}",
        f"command: {command}",
        f"seed: {sc.seed}",
        f"scenario: {sc.path or ''}",
        f"scenario_sha256: {sc.sha256}",
    ]
    if perturbation is not None:
        lines.append(f"inject_perturbation: {fmt(float(perturbation))}")
    for name in files:
        lines.append(f"output: {name} sha256={_sha256(out / name)}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- subcommands ---------------------------------------------------------------

def _solve(sc):
    spec = sc.problem()
    return spec, solve(spec, tol=sc.tol, max_iter=sc.max_iter)


def cmd_solve(sc, out, jobs=1, perturbation=None):
    spec, res = _solve(sc)
    u = res.u
    p = spec.obstacles
    slopes = u.slopes()
    node_slope = np.append(slopes, slopes[-1])
    write_csv(out / "solution.csv", ["x", "u", "f", "g", "slope"],
              zip(u.x, u.values, p.lower(u.x), p.upper(u.x), node_slope))
    (out / "energy.txt").write_text(
        f"energy = {fmt(res.energy)}\niterations = {res.iterations}\n"
        f"kkt_residual = {fmt(res.kkt_residual)}\nconverged = {fmt(res.converged)}\n"
        f"message = {res.message}\n", encoding="utf-8")
    write_manifest(out, sc, "solve", ["solution.csv", "energy.txt"])
    return EXIT_OK if res.converged else EXIT_SOLVER


def cmd_verify(sc, out, jobs=1, perturbation=None):
    spec, res = _solve(sc)
    if not res.converged:
        (out / "report.txt").write_text(f"solver did not converge: {res.message}\n", encoding="utf-8")
        write_manifest(out, sc, "verify", ["report.txt"], perturbation)
        return EXIT_SOLVER
    report = tonelli_report(spec, options=sc.report_options(perturbation, jobs), solve_result=res, u=res.u)
    write_csv(out / "report.csv", ["section", "item", "value"], report.rows())
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    write_manifest(out, sc, "verify", ["report.csv", "report.txt"], perturbation)
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


def _theory(sc):
    spec, res = _solve(sc)
    if not res.converged:
        return spec, res, None, None
    holder, pipeline = build_theory(spec, res.energy, sc.seed, sc.k_grid)
    return spec, res, holder, pipeline


def constant_rows(pipeline, holder=None):
    tc = pipeline.tc
    yield "c", None, tc.c
    yield "mu", None, tc.mu
    yield "c1", None, tc.c1
    yield "M_growth", None, tc.M_growth
    yield "N", None, tc.N
    yield "delta0", None, tc.delta0
    yield "K0_radius", None, tc.radius
    if holder is not None:
        yield "C0", None, holder.C
        yield "alpha0", None, holder.alpha
    for r in tc.rows:
        for name in ("c_k", "M_k", "alpha_k", "C1_k", "C2_k", "omega_cap"):
            yield name, r.k, getattr(r, name)
        yield "extrapolated", r.k, r.extrapolated


def pipeline_rows(pipeline):
    ks, eps = default_lattice(pipeline.tc)
    tables = pipeline.tabulate(ks, eps)
    for i, k in enumerate(ks):
        for j, e in enumerate(eps):
            yield (k, e, tables["Delta1"][i, j], tables["Delta2"][i, j],
                   tables["Delta"][i, j], tables["delta"][i, j])


def cmd_theory(sc, out, jobs=1, perturbation=None):
    _, res, holder, pipeline = _theory(sc)
    if pipeline is None:
        return EXIT_SOLVER
    write_csv(out / "constants.csv", ["name", "k", "value"], constant_rows(pipeline, holder))
    write_csv(out / "pipeline.csv", ["k", "eps", "Delta1", "Delta2", "Delta", "delta"],
              pipeline_rows(pipeline))
    write_manifest(out, sc, "theory", ["constants.csv", "pipeline.csv"])
    return EXIT_OK


def cmd_dini(sc, out, jobs=1, perturbation=None):
    spec, res, holder, pipeline = _theory(sc)
    if pipeline is None:
        return EXIT_SOLVER
    suite = dini_suite(spec, pipeline, holder, sc.thetas, sc.eps_ladder)
    write_csv(out / "dini.csv", ["h", "theta", "eps", "value", "verdict"], suite.rows())
    write_manifest(out, sc, "dini", ["dini.csv"])
    return EXIT_OK


def cmd_plot(sc, out, jobs=1, perturbation=None):
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "obstreg"
    import matplotlib.pyplot as plt

    spec, res, holder, pipeline = _theory(sc)
    if pipeline is None:
        return EXIT_SOLVER
    u, p = res.u, spec.obstacles
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(u.x, p.lower(u.x), "--", color="tab:red", label="f")
    ax.plot(u.x, np.minimum(p.upper(u.x), u.values.max() + 0.5 * np.ptp(u.values) + 1e-3),
            "--", color="tab:green", label="g (clipped to view)")
    ax.plot(u.x, u.values, color="tab:blue", label="u")
    ax.set_xlabel("x")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "solution.svg", metadata={"Date": None})
    plt.close(fig)

    ks, eps = default_lattice(pipeline.tc)
    tables = pipeline.tabulate(ks, eps)
    fig, ax = plt.subplots(figsize=(6, 4))
    e = eps[1:]
    for i in (1, len(ks) // 2, len(ks) - 1):
        ax.loglog(e, tables["Delta"][i, 1:], label=f"Delta, k={ks[i]:.3g}")
        d = tables["delta"][i, 1:]
        if np.any(np.isfinite(d)):
            ax.loglog(e, np.where(np.isfinite(d), d, np.nan), ":", label=f"delta, k={ks[i]:.3g}")
    ax.set_xlabel("eps")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out / "pipeline.svg", metadata={"Date": None})
    plt.close(fig)
    write_manifest(out, sc, "plot", ["solution.svg", "pipeline.svg"])
    return EXIT_OK


HANDLERS = {
    "solve": cmd_solve, "verify": cmd_verify, "theory": cmd_theory,
    "dini": cmd_dini, "plot": cmd_plot,
}


def sweep_points(sc):
    """``[(label, {(section, key): raw value})]`` over the Cartesian product of the grid."""
    keys = list(sc.sweep)
    for i, combo in enumerate(itertools.product(*(sc.sweep[k] for k in keys))):
        yield f"point_{i:03d}", dict(zip(keys, combo))


def _run_point(job):
    sc, command, out, perturbation = job
    out.mkdir(parents=True, exist_ok=True)
    try:
        return HANDLERS[command](sc, out, 1, perturbation)
    except (SolverFailed,):
        return EXIT_SOLVER


def cmd_sweep(sc, out, jobs=1, perturbation=None):
    if not sc.sweep:
        raise ValidationError("sweep", "scenario has no [sweep] parameters")
    points = list(sweep_points(sc))
    scenarios = [apply_overrides(sc, assign) for _, assign in points]
    work = [(s, sc.sweep_command, out / label, perturbation) for s, (label, _) in zip(scenarios, points)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_run_point, work))
    else:
        codes = [_run_point(w) for w in work]
    keys = list(sc.sweep)
    write_csv(out / "sweep.csv", ["point"] + [f"{s}.{k}" for s, k in keys] + ["exit_code"],
              ([label] + [assign[k] for k in keys] + [code]
               for (label, assign), code in zip(points, codes)))
    write_manifest(out, sc, "sweep", ["sweep.csv"])
    return max(codes)


HANDLERS["sweep"] = cmd_sweep


def run(command, scenario, out=None, jobs=1, seed=None, perturbation=None):
    """Run one subcommand on a parsed :class:`~obstreg.scenario.Scenario`; returns the exit code."""
    if command not in HANDLERS:
        raise UsageError(f"unknown command {command!r}")
    if perturbation is not None and command not in ("verify", "sweep"):
        raise UsageError("--inject-perturbation applies to verify and sweep only")
    if seed is not None:
        scenario = scenario.with_values(seed=seed)
    out = Path(out or scenario.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    return HANDLERS[command](scenario, out, jobs, perturbation)


def build_parser():
    ap = _Parser(prog="obstreg", description="One-dimensional variational obstacle problems.")
    ap.add_argument("--version", action="version", version=f"obstreg {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scenario", required=True, type=Path, help="scenario .ini file")
    ap.add_argument("--out", type=Path, help="output directory (default: [output] dir or .)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes")
    ap.add_argument("--seed", type=int, help="override the scenario seed")
    ap.add_argument("--inject-perturbation", type=float, metavar="EPS",
                    help="bump a free node of the solution by EPS before verifying")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.jobs < 1:
        ap.error("--jobs must be >= 1")
    try:
        sc = parse_scenario(args.scenario)
    except OSError as exc:
        print(f"obstreg: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError) as exc:
        print(f"obstreg: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return run(args.command, sc, args.out, args.jobs, args.seed, args.inject_perturbation)
    except UsageError as exc:
        print(f"obstreg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, InfeasibleSpec) as exc:
        print(f"obstreg: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverFailed as exc:
        print(f"obstreg: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
