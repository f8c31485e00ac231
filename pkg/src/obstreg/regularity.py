"""Finite-grid diagnostics for derivative regularity of computed solutions.

A continuum statement such as ``u'(x) = +inf`` cannot be read off a single
grid.  The proxy used here is slope growth under refinement: a location is
a singular candidate when the largest ``|u'|`` near it keeps growing
from level to level of a refinement ladder.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverFailed
from .grid import GridFunction
from .lagrangian import CompactBox, estimate_holder
from .obstacles import condition_1_2_suite, estimate_modulus, obstacle_omega, required_thetas
from .theory import (
    DeltaPipeline, build_constants, check_P3, contact_interval, energy_estimate_harness,
    hypothesis_H_test, l2_slope_norm,
)
from .variational import (
    ProblemSpec, check_A1, check_A2, check_A3, functional, inject_perturbation, solve,
)

GROWTH_FACTOR = 1.8
STEP_GROWTH = 1.05
DEFAULT_LADDER = (251, 501, 1001, 2001)


def discrete_derivative(u):
    """Cell slopes ``(u[i+1] - u[i]) / h[i]``."""
    return u.slopes()


def derivative_modulus(u, lags=None):
    """Modulus of continuity of the cell slopes as a function of the cell midpoints."""
    return estimate_modulus(GridFunction(u.midpoints, u.slopes()), lags)


@dataclass
class Candidate:
    x: float                 # location of the largest slope on the finest level
    slopes: np.ndarray       # max |u'| near x, per level
    growth: np.ndarray       # ratio between consecutive levels

    @property
    def total_growth(self):
        return float(self.slopes[-1] / self.slopes[0]) if self.slopes[0] > 0 else np.inf


def _solve_level(args):
    spec, n = args
    level = ProblemSpec(spec.a, spec.b, spec.A, spec.B, spec.lagrangian, spec.obstacles, n)
    res = solve(level)
    if not res.converged:
        raise SolverFailed(f"solver did not converge at n={n}: {res.message}")
    return res.u


def refinement_profiles(ladder, spec=None, profile=None, jobs=1):
    """Grid functions for each ``n`` in ``ladder``, from ``profile(n)`` or by solving ``spec``."""
    ladder = [int(n) for n in ladder]
    if profile is not None:
        return [profile(n) for n in ladder]
    if spec is None:
        raise ValueError("need spec or profile")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_solve_level, [(spec, n) for n in ladder]))
    return [_solve_level((spec, n)) for n in ladder]


def singular_candidates(ladder=DEFAULT_LADDER, spec=None, growth_factor=GROWTH_FACTOR,
                        profile=None, profiles=None, jobs=1):
    """Locations where the discrete slope keeps growing under refinement.

    The interval is cut into bins of width three coarsest-grid spacings;
    in each bin the largest ``|u'|`` is tracked along the ladder.  A bin is
    flagged when the slope grows at every step (by more than 5%) and by at
    least ``growth_factor`` overall.  Adjacent flagged bins form one
    candidate.  Endpoint cells enter their bin like any other cell, so the
    test there is one-sided.
    """
    if profiles is None:
        profiles = refinement_profiles(ladder, spec, profile, jobs)
    if len(profiles) < 3:
        raise ValueError("need at least three refinement levels")
    a, b = profiles[0].a, profiles[0].b
    width = 3.0 * float(np.max(profiles[0].h))
    nbins = max(1, int(np.ceil((b - a) / width)))
    table = np.zeros((len(profiles), nbins))
    argx = np.zeros((len(profiles), nbins))
    for lvl, u in enumerate(profiles):
        s = np.abs(u.slopes())
        idx = np.minimum(((u.midpoints - a) / width).astype(int), nbins - 1)
        order = np.lexsort((s, idx))           # by bin, then slope ascending
        last = np.r_[np.flatnonzero(np.diff(idx[order])), order.size - 1]
        bins = idx[order][last]
        table[lvl, bins] = s[order][last]
        argx[lvl, bins] = u.midpoints[order][last]
    with np.errstate(divide="ignore", invalid="ignore"):
        steps = table[1:] / table[:-1]
        total = table[-1] / table[0]
    steps = np.where(table[:-1] > 0, steps, np.where(table[1:] > 0, np.inf, 1.0))
    total = np.where(table[0] > 0, total, np.where(table[-1] > 0, np.inf, 1.0))
    flagged = np.all(steps > STEP_GROWTH, axis=0) & (total >= growth_factor)
    out = []
    for run in np.split(np.flatnonzero(flagged), np.flatnonzero(np.diff(np.flatnonzero(flagged)) > 1) + 1):
        if run.size == 0:
            continue
        best = run[np.argmax(table[-1, run])]
        out.append(Candidate(float(argx[-1, best]), table[:, best].copy(), steps[:, best].copy()))
    return out


# --- aggregate report --------------------------------------------------------

@dataclass
class ReportOptions:
    seed: int = 0
    a3_pairs: int = 1100
    a3_scales: int = 11
    a3_beyond: bool = False
    p3_pairs: int = 500
    energy_pairs: int = 200
    ladder: tuple = DEFAULT_LADDER
    growth_factor: float = GROWTH_FACTOR
    extra_thetas: tuple = ()
    eps_ladder: tuple = None
    k_grid: tuple = None
    perturbation: float = None
    jobs: int = 1
    tol: float = 1e-8


@dataclass
class RegularityReport:
    n: int
    energy: float
    converged: bool
    a1_ok: bool
    a2_ok: bool
    a3: object
    p3: object
    energy_est: object
    dini: object
    hypothesis: object
    singular_candidates: list
    derivative_modulus: object
    constants: object
    pipeline: object
    verdict_notes: list = field(default_factory=list)
    perturbed_node: int = None
    l2_slope: float = np.nan

    @property
    def violation_count(self):
        return (int(not self.a1_ok) + int(not self.a2_ok) + len(self.a3.violations)
                + int(self.p3.violations.size) + len(self.energy_est.violations))

    @property
    def ok(self):
        return self.violation_count == 0

    def rows(self):
        """``(section, item, value)`` triples, in a fixed order."""
        tc = self.constants
        yield "solve", "n", self.n
        yield "solve", "energy", self.energy
        yield "solve", "converged", self.converged
        yield "solve", "l2_slope_norm", self.l2_slope
        if self.perturbed_node is not None:
            yield "solve", "perturbed_node", self.perturbed_node
        yield "constants", "c", tc.c
        yield "constants", "N", tc.N
        yield "constants", "delta0", tc.delta0
        yield "constants", "M_growth", tc.M_growth
        yield "A1", "ok", self.a1_ok
        yield "A2", "ok", self.a2_ok
        yield "A3", "pairs", len(self.a3.slack)
        yield "A3", "min_slack", self.a3.min_slack
        yield "A3", "tolerance", self.a3.tol
        yield "A3", "violations", len(self.a3.violations)
        if np.isfinite(self.a3.beyond_min_slack):
            yield "A3", "min_slack_beyond_delta0", self.a3.beyond_min_slack
        yield "P3", "pairs", len(self.p3.lhs)
        yield "P3", "finite", int(np.sum(self.p3.finite))
        yield "P3", "vacuous", self.p3.vacuous
        yield "P3", "extrapolated", int(np.sum(self.p3.extrapolated))
        yield "P3", "max_ratio", self.p3.max_ratio
        yield "P3", "violations", int(self.p3.violations.size)
        yield "energy_estimate", "pairs", len(self.energy_est.reports)
        yield "energy_estimate", "vacuous", self.energy_est.vacuous
        yield "energy_estimate", "empty_sets", self.energy_est.empty_sets
        yield "energy_estimate", "min_slack", self.energy_est.min_slack
        yield "energy_estimate", "violations", len(self.energy_est.violations)
        yield "dini", "verdict", self.dini.verdict
        for key, theta, res in self.dini.entries:
            yield "dini", f"{key}@theta={theta:.6g}", res.verdict
        yield "hypothesis_H", "verdict", self.hypothesis.verdict
        yield "regularity", "singular_candidates", len(self.singular_candidates)
        for c in self.singular_candidates:
            yield "regularity", f"candidate@x={c.x:.6g}", c.total_growth
        for lag, w in zip(self.derivative_modulus.eps[1:], self.derivative_modulus.omega[1:]):
            yield "derivative_modulus", f"{lag:.6g}", w
        yield "summary", "violations", self.violation_count
        for note in self.verdict_notes:
            yield "note", "", note

    def to_text(self):
        lines = []
        section = None
        for sec, item, value in self.rows():
            if sec != section:
                lines.append(f"[{sec}]")
                section = sec
            if sec == "note":
                lines.append(f"  {value}")
            else:
                shown = f"{value:.10g}" if isinstance(value, float) else str(value)
                lines.append(f"  {item} = {shown}")
        return "\n".join(lines) + "\n"


def obstacle_holder(spec, seed=0):
    """Hölder pair of ``L`` on ``[a, b] x [-M1, M1] x [-M2, M2]``."""
    p = spec.obstacles
    box = CompactBox(spec.a, spec.b, -max(p.M1, 1e-6), max(p.M1, 1e-6), -max(p.M2, 1e-6), max(p.M2, 1e-6))
    return estimate_holder(spec.lagrangian, box, seed=seed)


def build_theory(spec, energy, seed=0, k_grid=None):
    """Obstacle Hölder pair and the :class:`DeltaPipeline` with ``c = |energy| + 1``."""
    holder = obstacle_holder(spec, seed)
    omega = obstacle_omega(spec.obstacles, holder.C, holder.alpha)
    kw = {"k_grid": k_grid} if k_grid else {}
    tc = build_constants(spec.lagrangian, spec.obstacles, abs(energy) + 1.0, omega, seed=seed, **kw)
    return holder, DeltaPipeline(tc)


def dini_suite(spec, pipeline, holder, extra_thetas=(), eps_ladder=None):
    """Obstacle Dini suite at the exponents required by the constants table."""
    tc = pipeline.tc
    alphas = sorted({r.alpha_k for r in tc.rows if not r.extrapolated})
    thetas = tuple(sorted(set(required_thetas(holder.alpha, alphas)) | set(extra_thetas)))
    kw = {"eps_ladder": eps_ladder} if eps_ladder is not None else {}
    return condition_1_2_suite(spec.obstacles, tc.N, thetas, **kw)


def tonelli_report(spec, theory=None, options=None, u=None, solve_result=None):
    """Run every class-membership and regularity check on a solution of ``spec``.

    ``theory`` may be a prebuilt :class:`DeltaPipeline`.  Component failures
    do not abort the report; they are recorded in ``verdict_notes``.
    """
    opts = options or ReportOptions()
    notes = []
    L, pair = spec.lagrangian, spec.obstacles
    if u is None:
        solve_result = solve(spec, tol=opts.tol)
        u = solve_result.u
        if not solve_result.converged:
            notes.append(f"solver did not converge: {solve_result.message}")
    converged = solve_result.converged if solve_result is not None else True
    perturbed = None
    if opts.perturbation:
        u, perturbed = inject_perturbation(u, pair, opts.perturbation)
        notes.append(f"perturbation {opts.perturbation:g} injected at node {perturbed}")
    energy = functional(L, u)
    if theory is None:
        holder, pipeline = build_theory(spec, energy, opts.seed, opts.k_grid)
    else:
        holder, pipeline = obstacle_holder(spec, opts.seed), theory
    tc = pipeline.tc
    omega = tc.omega

    a1 = check_A1(u, pair)
    a2 = check_A2(u, L, tc.c)
    a3 = check_A3(u, L, omega, tc.delta0, n_pairs=opts.a3_pairs, n_scales=opts.a3_scales,
                  seed=opts.seed, beyond=opts.a3_beyond)
    p3 = check_P3(u, pipeline.delta_upper, delta0=tc.delta0, n_pairs=opts.p3_pairs,
                  seed=opts.seed + 1, k_max=tc.k_max)
    if p3.vacuous:
        notes.append(f"P3: {p3.vacuous} of {len(p3.lhs)} pairs vacuous (infinite delta)")
    if np.any(p3.extrapolated):
        notes.append(f"P3: {int(np.sum(p3.extrapolated))} pairs use slope levels beyond k={tc.k_max:g}")
    energy_est = energy_estimate_harness(u, pipeline.Delta, tc.delta0, opts.energy_pairs, opts.seed + 2)

    dkw = {"eps_ladder": opts.eps_ladder} if opts.eps_ladder is not None else {}
    dini = dini_suite(spec, pipeline, holder, opts.extra_thetas, opts.eps_ladder)
    hyp = hypothesis_H_test(pipeline.omega_bar, [r.k for r in tc.rows if not r.extrapolated], **dkw)

    try:
        cands = singular_candidates(opts.ladder, spec, opts.growth_factor, jobs=opts.jobs)
    except Exception as exc:  # keep the rest of the report
        cands = []
        notes.append(f"singular-candidate ladder failed: {exc}")
    dmod = derivative_modulus(u)

    if contact_interval(u, pair) is None:
        notes.append("obstacles never active")
    if dini.verdict != "pass":
        notes.append(f"Dini suite verdict: {dini.verdict}")
    notes.append(f"Hölder pair on the obstacle box: C0={holder.C:.6g}, alpha0={holder.alpha:g}")
    return RegularityReport(
        n=u.n, energy=energy, converged=converged, a1_ok=a1, a2_ok=a2, a3=a3, p3=p3,
        energy_est=energy_est, dini=dini, hypothesis=hyp, singular_candidates=cands,
        derivative_modulus=dmod, constants=tc, pipeline=pipeline, verdict_notes=notes,
        perturbed_node=perturbed, l2_slope=l2_slope_norm(u),
    )
