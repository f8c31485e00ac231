"""Discrete obstacle problem: energy, chord replacement, clipping, solver.

Candidates are continuous piecewise-linear functions.  The energy of a
candidate is the midpoint rule on each cell; since ``u'`` is constant per
cell the slope slot of ``L`` is evaluated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded, cho_solve_banded

from .errors import DegeneratePair, InfeasibleSpec
from .grid import GridFunction, insert_nodes
from .lagrangian import CompactBox, evaluate
from .obstacles import ObstaclePair

ARMIJO = 1e-4


def functional(L, u):
    """Midpoint-rule value of ``int L(x, u, u') dx`` for a piecewise-linear ``u``."""
    h = u.h
    xm = u.midpoints
    um = 0.5 * (u.values[1:] + u.values[:-1])
    return float(np.sum(h * evaluate(L, xm, um, u.slopes())))


def _check_pair(u, s, t):
    if not s < t:
        raise DegeneratePair(f"need s < t, got s={s}, t={t}")
    tol = 1e-12 * (u.b - u.a)
    if s < u.a - tol or t > u.b + tol:
        raise ValueError(f"pair ({s}, {t}) outside [{u.a}, {u.b}]")


def chord_slope(u, s, t):
    """``(u(s) - u(t)) / (s - t)`` with ``u`` interpolated linearly."""
    _check_pair(u, s, t)
    return float((u(s) - u(t)) / (s - t))


def linear_replace(u, s, t):
    """``u`` with its chord on ``[s, t]``; ``s`` and ``t`` become nodes."""
    k = chord_slope(u, s, t)
    us = float(u(s))
    w = insert_nodes(u, [s, t])
    tol = 1e-12 * (u.b - u.a)
    inside = (w.x > s + tol) & (w.x < t - tol)
    vals = w.values.copy()
    vals[inside] = us + k * (w.x[inside] - s)
    return GridFunction(w.x, vals)


def _crossings(x, d):
    """Zeros of the piecewise-linear function with nodal values ``d`` strictly inside cells."""
    j = np.flatnonzero(d[:-1] * d[1:] < 0)
    lam = d[j] / (d[j] - d[j + 1])
    return x[j] + lam * (x[j + 1] - x[j])


def clip_to_admissible(w, pair):
    """Nodewise median of ``(f, w, g)``.

    Points where ``w`` crosses ``f`` or ``g`` (both taken linear between the
    nodes of ``w``) are inserted first, so the clipped function switches
    branch exactly at a node.
    """
    f, g = pair.lower(w.x), pair.upper(w.x)
    cross = np.concatenate([_crossings(w.x, w.values - f), _crossings(w.x, w.values - g)])
    if cross.size:
        # crossings are located with the obstacles linear between nodes; the
        # median at every node (old and new) uses the true obstacle values
        fx = pair.lower(cross)
        gx = pair.upper(cross)
        wx = np.interp(cross, w.x, w.values)
        x = np.concatenate([w.x, cross])
        order = np.argsort(x, kind="stable")
        x = x[order]
        vals = np.concatenate([w.values, wx])[order]
        f = np.concatenate([f, fx])[order]
        g = np.concatenate([g, gx])[order]
        keep = np.concatenate([[True], np.diff(x) > 1e-12 * (w.b - w.a)])
        x, vals, f, g = x[keep], vals[keep], f[keep], g[keep]
    else:
        x, vals = w.x, w.values
    return GridFunction(x, np.minimum(np.maximum(vals, f), g))


# --- problem and solver ----------------------------------------------------

@dataclass
class ProblemSpec:
    a: float
    b: float
    A: float
    B: float
    lagrangian: object
    obstacles: ObstaclePair
    n: int = 2001

    def __post_init__(self):
        if not self.a < self.b:
            raise InfeasibleSpec("need a < b")
        if int(self.n) < 2:
            raise InfeasibleSpec("need at least two grid nodes")
        self.n = int(self.n)
        p = self.obstacles
        if abs(p.a - self.a) > 1e-12 or abs(p.b - self.b) > 1e-12:
            raise InfeasibleSpec("obstacles are defined on a different interval")
        fa, fb = float(p.lower(self.a)), float(p.lower(self.b))
        ga, gb = float(p.upper(self.a)), float(p.upper(self.b))
        if not (fa <= self.A <= ga):
            raise InfeasibleSpec(f"boundary value A={self.A} outside [f(a), g(a)] = [{fa}, {ga}]")
        if not (fb <= self.B <= gb):
            raise InfeasibleSpec(f"boundary value B={self.B} outside [f(b), g(b)] = [{fb}, {gb}]")

    @property
    def x(self):
        return np.linspace(self.a, self.b, self.n)

    def bounds(self, x=None):
        """Nodal bounds with the endpoints pinned to the boundary data."""
        x = self.x if x is None else x
        lo, hi = self.obstacles.lower(x), self.obstacles.upper(x)
        lo[0] = hi[0] = self.A
        lo[-1] = hi[-1] = self.B
        return lo, hi


@dataclass
class SolveResult:
    u: GridFunction
    energy: float
    iterations: int
    kkt_residual: float
    active_lower: np.ndarray
    active_upper: np.ndarray
    converged: bool
    message: str = ""
    history: list = field(default_factory=list, repr=False)


def _derivatives(L, x, u):
    """Energy, gradient and tridiagonal Hessian ``(diag, off)`` of the discrete functional."""
    h = np.diff(x)
    xm = 0.5 * (x[1:] + x[:-1])
    um = 0.5 * (u[1:] + u[:-1])
    v = np.diff(u) / h
    energy = float(np.sum(h * evaluate(L, xm, um, v)))
    Lu, Lv = L.eval_u(xm, um, v), L.eval_v(xm, um, v)
    Luu, Luv, Lvv = L.eval_uu(xm, um, v), L.eval_uv(xm, um, v), L.eval_vv(xm, um, v)
    Lu, Lv, Luu, Luv, Lvv = (np.broadcast_to(np.asarray(t, float), h.shape) for t in (Lu, Lv, Luu, Luv, Lvv))
    grad = np.zeros_like(u)
    grad[:-1] += 0.5 * h * Lu - Lv
    grad[1:] += 0.5 * h * Lu + Lv
    diag = np.zeros_like(u)
    diag[:-1] += 0.25 * h * Luu - Luv + Lvv / h
    diag[1:] += 0.25 * h * Luu + Luv + Lvv / h
    off = 0.25 * h * Luu - Lvv / h
    return energy, grad, diag, off


def _energy(L, x, u):
    h = np.diff(x)
    return float(np.sum(h * evaluate(L, 0.5 * (x[1:] + x[:-1]), 0.5 * (u[1:] + u[:-1]), np.diff(u) / h)))


def _newton_direction(grad, diag, off, free):
    """Solve the free block of the tridiagonal Hessian; returns ``None`` if it is empty."""
    m = grad.size
    d = np.where(free, diag, 1.0)
    o = off.copy()
    o[~free[:-1] | ~free[1:]] = 0.0
    rhs = np.where(free, -grad, 0.0)
    scale = max(float(np.max(np.abs(d))), 1e-300)
    shift = 0.0
    for _ in range(30):
        ab = np.zeros((2, m))
        ab[0, 1:] = o
        ab[1] = d + np.where(free, shift, 0.0)
        try:
            c = cholesky_banded(ab)
            return cho_solve_banded((c, False), rhs)
        except LinAlgError:
            shift = 1e-8 * scale if shift == 0 else 10 * shift
    return None


def kkt_residual(u, grad, lo, hi):
    """``max |u - P(u - grad)|`` over interior nodes, ``P`` the box projection."""
    proj = np.clip(u - grad, lo, hi)
    return float(np.max(np.abs(u - proj)[1:-1])) if u.size > 2 else 0.0


COARSEST = 65
STALL = 50          # iterations without a new best residual before giving up


def solve(spec, tol=1e-8, max_iter=100_000, u0=None, multilevel=True):
    """Projected Newton method for the discrete obstacle problem.

    Nodes whose bound is nearly active with the gradient pushing outward
    are held by a scaled gradient step; the rest take a Newton step on the
    tridiagonal Hessian (shifted if not positive definite).  Each step is
    projected onto the box and backtracked until the energy decreases
    sufficiently.  Stops when the projected-gradient residual drops to
    ``tol * (1 + |J|)``, or unconverged once the residual has not improved
    for ``STALL`` iterations.

    Without a starting guess ``u0`` and with ``multilevel`` the problem is
    first solved on a grid about half as fine and the result interpolated;
    otherwise the start is the clipped straight line between the boundary
    values.
    """
    L = spec.lagrangian
    x = spec.x
    lo, hi = spec.bounds(x)
    if np.any(lo > hi):
        raise InfeasibleSpec("lower obstacle exceeds upper obstacle on the grid")
    if u0 is None and multilevel and spec.n > COARSEST:
        coarse = ProblemSpec(spec.a, spec.b, spec.A, spec.B, L, spec.obstacles, (spec.n + 1) // 2)
        u0 = solve(coarse, tol, max_iter, multilevel=True).u
    if u0 is None:
        u = spec.A + (spec.B - spec.A) * (x - spec.a) / (spec.b - spec.a)
    else:
        u = np.asarray(u0(x) if callable(u0) else u0, dtype=float).copy()
    u = np.clip(u, lo, hi)
    u[0], u[-1] = spec.A, spec.B

    energy, grad, diag, off = _derivatives(L, x, u)
    res = kkt_residual(u, grad, lo, hi)
    history = []
    converged = False
    it = 0
    message = ""
    best, since_best = res, 0
    for it in range(1, max_iter + 1):
        if res <= tol * (1.0 + abs(energy)):
            converged = True
            it -= 1
            break
        eps = min(1e-3, res)
        interior = np.ones(u.size, bool)
        interior[[0, -1]] = False
        at_lo = (u <= lo + eps) & (grad > 0)
        at_hi = (u >= hi - eps) & (grad < 0)
        free = interior & ~at_lo & ~at_hi
        step = _newton_direction(grad, diag, off, free)
        if step is None:
            step = np.zeros_like(u)
            step[free] = -grad[free] / np.maximum(np.abs(diag[free]), 1e-300)
        held = interior & ~free
        step[held] = -grad[held] / np.maximum(np.abs(diag[held]), 1e-300)
        step[~interior] = 0.0

        alpha = 1.0
        accepted = False
        for _ in range(60):
            trial = np.clip(u + alpha * step, lo, hi)
            trial[0], trial[-1] = spec.A, spec.B
            e_trial = _energy(L, x, trial)
            decrease = float(np.dot(grad, trial - u))
            if e_trial <= energy + ARMIJO * decrease or (
                alpha == 1.0 and e_trial - energy <= 1e-13 * (1.0 + abs(energy))
            ):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            message = "line search failed"
            break
        u = trial
        energy, grad, diag, off = _derivatives(L, x, u)
        res = kkt_residual(u, grad, lo, hi)
        history.append((energy, res, alpha))
        if res < best:
            best, since_best = res, 0
        else:
            since_best += 1
            if since_best >= STALL:
                message = f"residual stalled at {best:.3g} (round-off floor)"
                break
    else:
        message = "maximum iterations reached"
    if not converged and res <= tol * (1.0 + abs(energy)):
        converged = True
    tol_act = 1e-12 * (1.0 + np.max(np.abs(u)))
    interior = np.arange(1, u.size - 1)
    act_lo = interior[np.abs(u[1:-1] - lo[1:-1]) <= tol_act]
    act_hi = interior[np.abs(u[1:-1] - hi[1:-1]) <= tol_act]
    return SolveResult(
        u=GridFunction(x, u), energy=functional(L, GridFunction(x, u)), iterations=it,
        kkt_residual=res, active_lower=act_lo, active_upper=act_hi,
        converged=converged, message=message or ("converged" if converged else ""), history=history,
    )


# --- taut string -----------------------------------------------------------

def _taut_path(lo, hi):
    """Shortest path through the nodal intervals ``[lo_i, hi_i]`` on a uniform grid.

    Funnel method: from the current anchor, track the steepest admissible
    lower slope and the flattest admissible upper slope to each later node.
    When they cross, the string bends at the node that set the binding side
    (farthest one on ties) and that node becomes the next anchor.
    """
    n = lo.size
    anchors = [0]
    y = np.empty(n)
    y[0] = lo[0]
    i = 0
    y0 = lo[0]
    while i < n - 1:
        steps = np.arange(1, n - i)
        s_lo = (lo[i + 1:] - y0) / steps
        s_hi = (hi[i + 1:] - y0) / steps
        run_lo = np.maximum.accumulate(s_lo)
        run_hi = np.minimum.accumulate(s_hi)
        closed = np.flatnonzero(run_lo > run_hi)
        if closed.size == 0:
            # whole rest visible: go straight to the end
            j = n - 1
            y[i:] = y0 + (lo[-1] - y0) * np.arange(0, n - i) / (n - 1 - i)
            break
        c = closed[0]
        if s_hi[c] < run_lo[c - 1]:
            m = run_lo[c - 1]
            j = i + 1 + int(np.flatnonzero(s_lo[:c] == m)[-1])
            yj = lo[j]
        else:
            m = run_hi[c - 1]
            j = i + 1 + int(np.flatnonzero(s_hi[:c] == m)[-1])
            yj = hi[j]
        y[i:j + 1] = y0 + (yj - y0) * np.arange(0, j - i + 1) / (j - i)
        y[j] = yj
        anchors.append(j)
        i, y0 = j, yj
    y[-1] = lo[-1]
    return np.clip(y, lo, hi), anchors


def taut_string_oracle(pair, A, B, n):
    """Discrete minimizer of ``sum (u_{i+1} - u_i)**2 / h`` between the obstacles.

    Independent of :func:`solve`: the taut string through the nodal tube
    minimizes every strictly convex function of the increments on a uniform
    grid, Dirichlet energy included.
    """
    spec_lo = pair.lower(np.array([pair.a, pair.b]))
    spec_hi = pair.upper(np.array([pair.a, pair.b]))
    if not (spec_lo[0] <= A <= spec_hi[0] and spec_lo[1] <= B <= spec_hi[1]):
        raise InfeasibleSpec("boundary values outside the obstacles")
    x = np.linspace(pair.a, pair.b, int(n))
    lo, hi = pair.lower(x), pair.upper(x)
    lo[0] = hi[0] = A
    lo[-1] = hi[-1] = B
    if np.any(lo > hi):
        raise InfeasibleSpec("lower obstacle exceeds upper obstacle on the grid")
    y, _ = _taut_path(lo, hi)
    return GridFunction(x, y)


# --- class membership ------------------------------------------------------

def check_A1(u, K, tol=0.0):
    """Graph of ``u`` (at the nodes) inside ``K``.

    ``K`` is an :class:`ObstaclePair` (the band ``f <= u <= g``), a
    :class:`CompactBox` (its ``x`` and ``u`` ranges) or a tuple
    ``(x_lo, x_hi, u_lo, u_hi)``.
    """
    if isinstance(K, ObstaclePair):
        inside_x = np.all((u.x >= K.a - tol) & (u.x <= K.b + tol))
        return bool(inside_x and K.contains(u.x, u.values, tol))
    if isinstance(K, CompactBox):
        K = (K.x_lo, K.x_hi, K.u_lo, K.u_hi)
    x_lo, x_hi, u_lo, u_hi = K
    return bool(
        np.all((u.x >= x_lo - tol) & (u.x <= x_hi + tol))
        and np.all((u.values >= u_lo - tol) & (u.values <= u_hi + tol))
    )


def check_A2(u, L, c):
    """Energy bound ``J(u) <= c``."""
    return functional(L, u) <= c


def sample_pairs(a, b, delta0, n_pairs=1100, n_scales=11, seed=0, beyond=False):
    """Random pairs ``s < t`` stratified over dyadic scales ``delta0 / 2**j``.

    The gap ``t - s`` is uniform in ``(w/2, w]`` for scale ``w`` and the
    placement is uniform in ``[a, b]``.  With ``beyond`` the scales are
    ``2**j * delta0`` above ``delta0`` instead (capped at ``b - a``).
    """
    rng = np.random.default_rng(seed)
    length = b - a
    counts = np.full(n_scales, n_pairs // n_scales)
    counts[: n_pairs % n_scales] += 1
    out = []
    for j, cnt in enumerate(counts):
        w = delta0 * (2.0 ** (j + 1) if beyond else 2.0 ** -j)
        w = min(w, length)
        gap = w * (0.5 + 0.5 * rng.random(cnt))
        if beyond:
            gap = np.minimum(np.maximum(gap, delta0), length)
        s = a + (length - gap) * rng.random(cnt)
        out.append(np.column_stack([s, s + gap]))
    pairs = np.vstack(out) if out else np.empty((0, 2))
    pairs[:, 1] = np.minimum(pairs[:, 1], b)
    return pairs


def _local_slack(L, u, s, t, omega):
    tol = 1e-12 * (u.b - u.a)
    inner = (u.x > s + tol) & (u.x < t - tol)
    xs = np.concatenate([[s], u.x[inner], [t]])
    us = u(xs)
    k = (us[-1] - us[0]) / (t - s)
    chord = us[0] + k * (xs - s)
    excess = functional(L, GridFunction(xs, chord)) - functional(L, GridFunction(xs, us))
    return excess + float(omega(abs(k), t - s)) * (t - s), k


@dataclass
class A3Report:
    pairs: np.ndarray
    slack: np.ndarray
    chord: np.ndarray
    tol: float
    energy: float
    beyond_min_slack: float = np.nan

    @property
    def min_slack(self):
        return float(np.min(self.slack)) if self.slack.size else np.inf

    @property
    def violations(self):
        idx = np.flatnonzero(self.slack < -self.tol)
        return [(float(self.pairs[i, 0]), float(self.pairs[i, 1]), float(self.slack[i])) for i in idx]

    @property
    def ok(self):
        return not self.violations


def check_A3(u, L, omega, delta0, pairs=None, n_pairs=1100, n_scales=11, seed=0, beyond=False):
    """Chord-replacement almost-minimality over sampled pairs.

    For each pair the slack is
    ``J(u_st) + omega(|k|, t - s) (t - s) - J(u)``; only cells inside
    ``[s, t]`` differ, so it is computed there on the common refined grid.
    A pair is a violation when its slack is below ``-1e-6 (1 + |J(u)|)``.
    With ``beyond`` the same quantity is also sampled for gaps above
    ``delta0``; its minimum is reported separately.
    """
    if not delta0 > 0:
        raise ValueError("delta0 must be positive")
    energy = functional(L, u)
    if pairs is None:
        pairs = sample_pairs(u.a, u.b, delta0, n_pairs, n_scales, seed)
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    slack = np.empty(len(pairs))
    chord = np.empty(len(pairs))
    for i, (s, t) in enumerate(pairs):
        _check_pair(u, s, t)
        slack[i], chord[i] = _local_slack(L, u, s, t, omega)
    report = A3Report(pairs, slack, chord, 1e-6 * (1.0 + abs(energy)), energy)
    if beyond:
        far = sample_pairs(u.a, u.b, delta0, max(n_pairs // 4, 1), 4, seed + 1, beyond=True)
        far = far[far[:, 1] - far[:, 0] > delta0]
        if far.size:
            report.beyond_min_slack = min(_local_slack(L, u, s, t, omega)[0] for s, t in far)
    return report


def free_nodes(u, pair, tol=1e-12):
    """Interior node indices strictly between the obstacles."""
    lo, hi = pair.lower(u.x), pair.upper(u.x)
    idx = np.arange(1, u.n - 1)
    mask = (u.values[1:-1] > lo[1:-1] + tol) & (u.values[1:-1] < hi[1:-1] - tol)
    return idx[mask]


def inject_perturbation(u, pair, amount, index=None):
    """Raise ``u`` by ``amount`` at one free node (clipped to the obstacles).

    Without ``index`` the free node nearest the middle of the longest free
    run is used.
    """
    vals = u.values.copy()
    if index is None:
        free = free_nodes(u, pair)
        if free.size == 0:
            free = np.arange(1, u.n - 1)
        runs = np.split(free, np.flatnonzero(np.diff(free) > 1) + 1)
        run = max(runs, key=len)
        index = int(run[len(run) // 2])
    lo, hi = pair.lower(u.x[index]), pair.upper(u.x[index])
    vals[index] = float(np.clip(vals[index] + amount, lo, hi))
    return GridFunction(u.x, vals), index
