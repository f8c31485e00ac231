"""Quantitative constants and moduli behind the slope-stability estimates.

Given a Lagrangian, a planar compact ``K`` for the graph, an energy bound
``c`` and the obstacle penalty ``omega(k, eps)``, this module computes

* ``N`` (an a priori ``L^2`` bound on ``u'``), the scale ``delta0`` and the
  fattened compact ``K0``;
* per slope level ``k``: ``c(k)``, ``M(k)``, the Hölder pair
  ``(C1(k), alpha(k))`` and ``C2(k) = sup |L_v|``;
* the bounds ``Delta1``, ``Delta2``, ``Delta`` and the least fixed point
  ``delta(k, eps)`` of ``eta -> 4 int_0^{e eps} Delta(k + eta, xi) dxi/xi``;

and checks the resulting inequalities on computed solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoSuchM
from .lagrangian import CompactBox, estimate_holder, evaluate
from .obstacles import DEFAULT_EPS_LADDER, ObstaclePair, decay_verdict, dini_ladder
from .quadrature import log_integral, probe_tail

K_GRID = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
ETA_CAP = 1e3
PICARD_TOL = 1e-10
M_CAP = 1e6


# --- closed-form constants ---------------------------------------------------

def compute_N(c, mu, M_growth, length):
    """``sqrt(4 c / mu + M**2 (b - a))``."""
    if mu <= 0 or length <= 0 or c < 0 or M_growth < 0:
        raise ValueError("need mu > 0, length > 0, c >= 0, M >= 0")
    return math.sqrt(4.0 * c / mu + M_growth**2 * length)


def max_delta0(N):
    """Largest ``d`` with ``d + N sqrt(d) <= 1``, i.e. ``s**2`` for the positive root ``s`` of ``s**2 + N s = 1``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    s = 2.0 / (N + math.sqrt(N * N + 4.0))   # = (-N + sqrt(N^2 + 4)) / 2 without cancellation
    return s * s


def compute_M_k(mu, c_k, omega_at_cap):
    """Positive root of ``(mu/4) z**2 - 2 c_k z - (2 c_k + omega_at_cap) = 0``."""
    if mu <= 0 or c_k < 0 or omega_at_cap < 0:
        raise ValueError("need mu > 0 and nonnegative c_k, omega")
    return (2.0 * c_k + math.sqrt(4.0 * c_k**2 + mu * (2.0 * c_k + omega_at_cap))) / (mu / 2.0)


def _growth_deficit(L, mu, xs, us, v):
    """``min over x, u, +-v of L - (mu/4) v**2`` for each ``v``, relative to its scale."""
    X, U, V = np.meshgrid(xs, us, v, indexing="ij")
    worst = np.full(v.shape, np.inf)
    for sign in (1.0, -1.0):
        val = evaluate(L, X, U, sign * V) - 0.25 * mu * V**2
        worst = np.minimum(worst, np.min(val, axis=(0, 1)))
    return worst / (1.0 + 0.25 * mu * v**2)


def compute_M_growth(L, c1, mu, a=0.0, b=1.0, M_cap=M_CAP, n_x=9, n_u=9):
    """Smallest ``M`` with ``L(x, u, v) >= (mu/4) v**2`` for ``|v| >= M``, ``|u| <= c1``.

    The inequality is sampled on a ladder of ``|v|`` up to ``M_cap``; the
    largest failing sample is refined by bisection against the next passing
    one.  Raises :class:`NoSuchM` if it still fails at ``M_cap``.
    """
    xs = np.linspace(a, b, n_x)
    us = np.unique(np.concatenate([np.linspace(-c1, c1, n_u), [0.0]]))
    v = np.unique(np.concatenate([
        np.linspace(0.0, 100.0, 4001), np.geomspace(1e-6, M_cap, 4000),
    ]))
    deficit = _growth_deficit(L, mu, xs, us, v)
    bad = np.flatnonzero(deficit < -1e-12)
    if bad.size == 0:
        return 0.0
    i = bad[-1]
    if i == v.size - 1:
        raise NoSuchM(f"L >= (mu/4) v^2 still fails at |v| = {M_cap:g}")
    lo, hi = v[i], v[i + 1]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _growth_deficit(L, mu, xs, us, np.array([mid]))[0] < -1e-12:
            lo = mid
        else:
            hi = mid
    return float(hi)


# --- bounds ------------------------------------------------------------------

def _omega(omega, k, eps):
    if omega is None:
        return np.zeros(np.broadcast_shapes(np.shape(k), np.shape(eps)))
    return np.asarray(omega(k, eps), dtype=float)


def delta1_bound(k, eps, C1_k, alpha_k, mu, omega=None):
    """``sqrt(2/mu) * sqrt(2 C1 eps**alpha + omega(k, eps))``."""
    eps = np.asarray(eps, dtype=float)
    out = np.sqrt(2.0 / mu) * np.sqrt(2.0 * C1_k * np.power(eps, alpha_k) + _omega(omega, k, eps))
    return float(out) if out.ndim == 0 else out


def delta2_bound(k, eps, C1_k, alpha_k, C2_k, mu, omega=None):
    """``C1 (eps + Delta1)**alpha + 2 C2 Delta1 + omega(k, eps)``."""
    eps = np.asarray(eps, dtype=float)
    d1 = np.asarray(delta1_bound(k, eps, C1_k, alpha_k, mu, omega))
    out = C1_k * np.power(eps + d1, alpha_k) + 2.0 * C2_k * d1 + _omega(omega, k, eps)
    return float(out) if out.ndim == 0 else out


def big_delta(k, eps, N, mu, C1_k, alpha_k, C2_k, omega=None):
    """``max(Delta1(k, e'), (2/sqrt(mu)) sqrt(Delta2(k, e')))`` with ``e' = eps + N sqrt(eps)``."""
    eps = np.asarray(eps, dtype=float)
    shifted = eps + N * np.sqrt(eps)
    d1 = delta1_bound(k, shifted, C1_k, alpha_k, mu, omega)
    d2 = delta2_bound(k, shifted, C1_k, alpha_k, C2_k, mu, omega)
    out = np.maximum(d1, 2.0 / np.sqrt(mu) * np.sqrt(d2))
    return float(out) if np.ndim(out) == 0 else out


def omega_hat(k, eps, omega, N):
    """``sqrt(omega(k, eps + N sqrt(eps)))``."""
    eps = np.asarray(eps, dtype=float)
    out = np.sqrt(_omega(omega, k, eps + N * np.sqrt(eps)))
    return float(out) if out.ndim == 0 else out


def omega_bar(k, eps, omega, alpha_k, N):
    """``sqrt(w)**alpha + sqrt(w) + w`` with ``w = omega_hat(k, eps)``."""
    w = np.asarray(omega_hat(k, eps, omega, N))
    out = np.power(np.sqrt(w), alpha_k) + np.sqrt(w) + w
    return float(out) if out.ndim == 0 else out


def bound_constants(C1_k, alpha_k, C2_k, mu):
    """Constants ``(C3_1, C3_2)`` with, for ``eps <= 1``,

    ``Delta1 <= C3_1 [sqrt(eps)**a + sqrt(w)]`` and
    ``Delta2 <= C3_2 [sqrt(eps)**min(a, a*a) + sqrt(w)**a + sqrt(w) + w]``.

    Derived from ``sqrt(p + q) <= sqrt(p) + sqrt(q)`` and subadditivity of
    ``t -> t**a``.
    """
    c31 = math.sqrt(2.0 / mu) * max(math.sqrt(2.0 * C1_k), 1.0)
    c32 = max(C1_k + C1_k * c31**alpha_k + 2.0 * C2_k * c31, 1.0)
    return c31, c32


# --- Dini hypothesis and the fixed point -------------------------------------

@dataclass
class HypothesisResult:
    results: dict          # k -> DiniResult
    verdict: str


def hypothesis_H_test(omega_bar_map, k_grid=K_GRID, eps_ladder=DEFAULT_EPS_LADDER):
    """Decay test of ``int_0^{e eps} omega_bar(k, xi) dxi/xi`` for each ``k`` of the grid."""
    results = {}
    for k in k_grid:
        results[float(k)] = dini_ladder(lambda xi, k=k: omega_bar_map(k, xi), eps_ladder)
    verdicts = [r.verdict for r in results.values()]
    if all(v == "pass" for v in verdicts):
        verdict = "pass"
    elif "fail" in verdicts:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    return HypothesisResult(results, verdict)


@dataclass
class FixedPoint:
    value: float               # least fixed point, or inf
    iterates: list
    residual: float            # |phi(value) - value|
    converged: bool
    reason: str = ""


def _phi(k, eps, Delta, eta):
    def integrand(xi):
        return Delta(k + eta, xi)

    probe = probe_tail(integrand)
    if probe.diverges:
        return np.inf
    val = log_integral(integrand, np.e * eps, strict=False).value
    return 4.0 * val if np.isfinite(val) else np.inf


def picard_fixed_point(k, eps, Delta, eta_cap=ETA_CAP, tol=PICARD_TOL, max_iter=10_000):
    """Least fixed point of ``phi(eta) = 4 int_0^{e eps} Delta(k + eta, xi) dxi/xi``.

    Picard iteration from ``eta = 0``; ``phi`` is nonnegative and
    nondecreasing, so the iterates increase to the least fixed point when
    it exists.  Gives up with ``inf`` once an iterate exceeds ``eta_cap``
    or the integral diverges.
    """
    if eps <= 0:
        return FixedPoint(0.0, [0.0], 0.0, True, "eps = 0")
    eta = 0.0
    iterates = [eta]
    for _ in range(max_iter):
        nxt = _phi(k, eps, Delta, eta)
        if not np.isfinite(nxt):
            return FixedPoint(np.inf, iterates, np.inf, False, "integral diverges")
        if nxt > eta_cap:
            iterates.append(nxt)
            return FixedPoint(np.inf, iterates, np.inf, False, f"iterate exceeds cap {eta_cap:g}")
        nxt = max(nxt, eta)    # guard against quadrature noise; phi is monotone
        iterates.append(nxt)
        if nxt - eta < tol * (1.0 + eta):
            res = abs(_phi(k, eps, Delta, nxt) - nxt)
            return FixedPoint(nxt, iterates, res, True)
        eta = nxt
    return FixedPoint(np.inf, iterates, np.inf, False, "no convergence")


def little_delta(k, eps, Delta, eta_cap=ETA_CAP):
    """``delta(k, eps)``: least ``eta >= 0`` with ``4 int_0^{e eps} Delta(k + eta, xi) dxi/xi <= eta``."""
    return picard_fixed_point(k, eps, Delta, eta_cap).value


# --- planar compacts ---------------------------------------------------------

class PlanarBand:
    """``{(x, w): a <= x <= b, lo(x) <= w <= hi(x)}`` tabulated on a grid."""

    def __init__(self, x, lo, hi):
        self.x = np.asarray(x, float)
        self.lo = np.asarray(lo, float)
        self.hi = np.asarray(hi, float)

    @classmethod
    def from_pair(cls, pair, n=401):
        x = np.linspace(pair.a, pair.b, n)
        return cls(x, pair.lower(x), pair.upper(x))

    @classmethod
    def rectangle(cls, a, b, u_lo, u_hi, n=401):
        x = np.linspace(a, b, n)
        return cls(x, np.full(n, float(u_lo)), np.full(n, float(u_hi)))

    @property
    def a(self):
        return float(self.x[0])

    @property
    def b(self):
        return float(self.x[-1])

    def sup_abs(self):
        return float(max(np.max(np.abs(self.lo)), np.max(np.abs(self.hi))))

    def fatten(self, r):
        """Points of ``[a, b] x R`` within l1 distance ``r`` of the band."""
        d = np.abs(self.x[:, None] - self.x[None, :])
        near = d <= r
        lo = np.min(np.where(near, self.lo[None, :] + d, np.inf), axis=1) - r
        hi = np.max(np.where(near, self.hi[None, :] - d, -np.inf), axis=1) + r
        return PlanarBand(self.x, lo, hi)

    def contains(self, x, w, tol=1e-12):
        lo = np.interp(x, self.x, self.lo)
        hi = np.interp(x, self.x, self.hi)
        return bool(np.all((lo - tol <= w) & (w <= hi + tol)))

    def includes(self, other, tol=1e-12):
        return bool(np.all(other.lo >= np.interp(other.x, self.x, self.lo) - tol)
                    and np.all(other.hi <= np.interp(other.x, self.x, self.hi) + tol))

    def bounding_box(self, v_half):
        return CompactBox(self.a, self.b, float(np.min(self.lo)), float(np.max(self.hi)), -v_half, v_half)

    def sample(self, m=33):
        t = np.linspace(0.0, 1.0, m)
        idx = np.round(np.linspace(0, self.x.size - 1, m)).astype(int)
        xs = self.x[idx]
        W = self.lo[idx, None] + (self.hi - self.lo)[idx, None] * t[None, :]
        return np.repeat(xs, m), W.ravel()


def _sup_over(func, band, k, m=33):
    xs, ws = band.sample(m)
    ps = np.linspace(-k, k, m) if k > 0 else np.array([0.0])
    X = np.repeat(xs, ps.size)
    W = np.repeat(ws, ps.size)
    P = np.tile(ps, xs.size)
    vals = np.asarray(func(X, W, P), dtype=float)
    return float(np.max(np.abs(vals)))


# --- the constant table ------------------------------------------------------

@dataclass(frozen=True)
class KRow:
    k: float
    c_k: float
    M_k: float
    alpha_k: float
    C1_k: float
    C2_k: float
    omega_cap: float
    extrapolated: bool = False


@dataclass
class TheoryConstants:
    mu: float
    c: float
    c1: float
    M_growth: float
    N: float
    delta0: float
    K: PlanarBand
    K0: PlanarBand
    lagrangian: object
    omega: object
    rows: list = field(default_factory=list)
    seed: int = 0
    notes: list = field(default_factory=list)

    @property
    def radius(self):
        """``delta0 + N sqrt(delta0)``, the fattening radius of ``K0``."""
        return self.delta0 + self.N * math.sqrt(self.delta0)

    @property
    def length(self):
        return self.K.b - self.K.a

    @property
    def k_grid(self):
        return tuple(r.k for r in self.rows)

    def _make_row(self, k, extrapolated=False):
        L = self.lagrangian
        c_k = max(_sup_over(L.eval, self.K0, k), _sup_over(L.eval_v, self.K0, k))
        C2_k = _sup_over(L.eval_v, self.K, k)
        w_cap = float(self.omega(k, self.radius)) if self.omega is not None else 0.0
        prev = self.rows[-1] if self.rows else None
        if prev is not None:
            c_k, C2_k, w_cap = max(c_k, prev.c_k), max(C2_k, prev.C2_k), max(w_cap, prev.omega_cap)
        M_k = compute_M_k(self.mu, c_k, w_cap)
        box = self.K0.bounding_box(max(k + M_k, 1e-3))
        est = estimate_holder(L, box, seed=self.seed)
        alpha, C1 = est.alpha, est.C
        if prev is not None:
            alpha, C1 = min(alpha, prev.alpha_k), max(C1, prev.C1_k)
        return KRow(float(k), c_k, M_k, alpha, C1, C2_k, w_cap, extrapolated)

    def index(self, k):
        """Index of the smallest tabulated level ``>= k``; extends the table by doubling."""
        k = abs(float(k))
        while k > self.rows[-1].k:
            last = self.rows[-1].k
            self.rows.append(self._make_row(2.0 * last if last > 0 else 1.0, extrapolated=True))
        return int(np.searchsorted(np.array(self.k_grid), k, side="left"))

    def row(self, k):
        return self.rows[self.index(k)]

    @property
    def k_max(self):
        """Largest level of the original grid (above it rows are extrapolated)."""
        base = [r.k for r in self.rows if not r.extrapolated]
        return base[-1]


def build_constants(lagrangian, K, energy_bound, omega, a=None, b=None, k_grid=K_GRID,
                    delta0=None, seed=0):
    """Assemble :class:`TheoryConstants`.

    ``K`` is an :class:`ObstaclePair` (the band between the obstacles) or a
    :class:`PlanarBand`; ``energy_bound`` is ``c``.  ``delta0`` defaults to
    the largest admissible value.
    """
    if isinstance(K, ObstaclePair):
        band = PlanarBand.from_pair(K)
    else:
        band = K
    mu = lagrangian.mu
    c1 = band.sup_abs()
    M = compute_M_growth(lagrangian, c1, mu, band.a, band.b)
    N = compute_N(energy_bound, mu, M, band.b - band.a)
    d0 = max_delta0(N) if delta0 is None else float(delta0)
    if d0 + N * math.sqrt(d0) > 1.0 + 1e-12 or d0 <= 0:
        raise ValueError("delta0 must satisfy 0 < delta0 + N sqrt(delta0) <= 1")
    tc = TheoryConstants(mu, float(energy_bound), c1, M, N, d0, band, None, lagrangian, omega, seed=seed)
    tc.K0 = band.fatten(tc.radius)
    for k in sorted(k_grid):
        tc.rows.append(tc._make_row(k))
    return tc


# --- the Delta pipeline ------------------------------------------------------

class DeltaPipeline:
    """``Delta1``, ``Delta2``, ``Delta``, ``omega_hat``, ``omega_bar`` and ``delta``.

    The slope argument is rounded up to the next tabulated level and the
    maximum is taken over all levels up to it, so every map is
    nondecreasing in ``k`` by construction.
    """

    def __init__(self, constants, eta0=1.0, eta_cap=ETA_CAP):
        self.tc = constants
        self.eta0 = float(eta0)
        self.eta_cap = float(eta_cap)
        self._delta_cache = {}

    @property
    def N(self):
        return self.tc.N

    @property
    def mu(self):
        return self.tc.mu

    @property
    def k_max(self):
        return self.tc.k_max

    def _rows(self, k):
        j = self.tc.index(k)
        return self.tc.rows[: j + 1]

    def _envelope(self, k, eps, fn):
        out = None
        for r in self._rows(k):
            val = np.asarray(fn(r, eps), dtype=float)
            out = val if out is None else np.maximum(out, val)
        return float(out) if out.ndim == 0 else out

    def Delta1(self, k, eps):
        return self._envelope(k, eps, lambda r, e: delta1_bound(
            r.k, e, r.C1_k, r.alpha_k, self.mu, self.tc.omega))

    def Delta2(self, k, eps):
        return self._envelope(k, eps, lambda r, e: delta2_bound(
            r.k, e, r.C1_k, r.alpha_k, r.C2_k, self.mu, self.tc.omega))

    def Delta(self, k, eps):
        return self._envelope(k, eps, lambda r, e: big_delta(
            r.k, e, self.N, self.mu, r.C1_k, r.alpha_k, r.C2_k, self.tc.omega))

    def omega_hat(self, k, eps):
        return self._envelope(k, eps, lambda r, e: omega_hat(r.k, e, self.tc.omega, self.N))

    def omega_bar(self, k, eps):
        return self._envelope(k, eps, lambda r, e: omega_bar(r.k, e, self.tc.omega, r.alpha_k, self.N))

    def fixed_point(self, k, eps):
        return picard_fixed_point(k, eps, self.Delta, self.eta_cap)

    def delta(self, k, eps):
        """``delta(k, eps)`` (cached on exact arguments)."""
        key = (abs(float(k)), float(eps))
        if key not in self._delta_cache:
            self._delta_cache[key] = self.fixed_point(*key).value
        return self._delta_cache[key]

    def delta_upper(self, k, eps, per_decade=8):
        """``delta`` at ``k`` rounded up to the level grid and ``eps`` rounded up
        to a geometric lattice; an upper bound for ``delta(k, eps)`` since
        ``delta`` is nondecreasing."""
        if eps <= 0:
            return 0.0
        kk = self.tc.rows[self.tc.index(k)].k
        ee = 10.0 ** (math.ceil(math.log10(eps) * per_decade - 1e-9) / per_decade)
        return self.delta(kk, ee)

    def extrapolated(self, k):
        return abs(float(k)) > self.k_max

    def eps0(self, k, ladder=None):
        """Largest ladder value ``eps`` with ``4 int_0^{e eps} Delta(k + eta0, xi) dxi/xi <= eta0``."""
        if ladder is None:
            ladder = self.tc.delta0 / np.e * 10.0 ** -np.arange(0, 300)
        for eps in ladder:
            if _phi(k, eps, self.Delta, self.eta0) <= self.eta0:
                return float(eps)
        return None

    def tabulate(self, k_values, eps_values, with_delta=True):
        """Lattice tables made monotone by running maxima along both axes."""
        k_values = np.asarray(k_values, float)
        eps_values = np.asarray(eps_values, float)
        out = {}
        for name in ("Delta1", "Delta2", "Delta"):
            fn = getattr(self, name)
            out[name] = np.array([np.atleast_1d(fn(k, eps_values)) for k in k_values])
        if with_delta:
            out["delta"] = np.array([[self.delta(k, e) for e in eps_values] for k in k_values])
        for name, table in out.items():
            table = np.maximum.accumulate(table, axis=0)
            out[name] = np.maximum.accumulate(table, axis=1)
        return out


def default_lattice(constants, size=20, decades=36):
    """``(k, eps)`` lattice: ``k`` from 0 to the top grid level, ``eps`` from 0 to ``delta0 / e``."""
    top = constants.k_max
    ks = np.concatenate([[0.0], np.geomspace(top / 2**10, top, size - 1)])
    hi = constants.delta0 / np.e
    eps = np.concatenate([[0.0], np.geomspace(hi * 10.0**-decades, hi, size - 1)])
    return ks, eps


# --- checks on solutions -----------------------------------------------------

@dataclass
class P2Report:
    k: float
    eps: np.ndarray
    delta: np.ndarray
    majorant: np.ndarray
    C: float
    holds: np.ndarray
    limit_verdict: str
    hypothesis_violated: bool
    notes: str = ""

    @property
    def ok(self):
        return bool(np.all(self.holds)) and self.limit_verdict == "pass"


def check_P2(delta, k, eps_ladder, C_fit=None, eta0=1.0, omega_bar_map=None, alpha_k=1.0):
    """Compare ``delta(k, eps)`` against ``C [sqrt(eps)**(min(a, a*a)/4) + I(eps)]``,
    ``I(eps) = int_0^{e eps} omega_bar(k + eta0, xi) dxi/xi``, and test
    ``delta(k, eps) -> 0`` along the ladder.

    Without ``C_fit`` the constant is calibrated at the first ladder point
    with finite ``delta``.
    """
    eps = np.asarray(eps_ladder, float)
    dvals = np.array([delta(k, e) for e in eps], dtype=float)
    expo = 0.25 * min(alpha_k, alpha_k**2)
    if omega_bar_map is None:
        integral = np.zeros_like(eps)
        diverges = False
    else:
        integrand = lambda xi: omega_bar_map(k + eta0, xi)  # noqa: E731
        diverges = probe_tail(integrand).diverges
        integral = np.array([np.inf if diverges else log_integral(integrand, np.e * e, strict=False).value
                             for e in eps])
    base = np.sqrt(eps) ** expo + integral
    notes = []
    if C_fit is None:
        finite = np.flatnonzero(np.isfinite(dvals) & np.isfinite(base) & (base > 0))
        C_fit = float(dvals[finite[0]] / base[finite[0]]) if finite.size else np.inf
        notes.append("C calibrated at the first finite ladder point")
    maj = C_fit * base
    with np.errstate(invalid="ignore"):
        holds = (dvals <= maj * (1 + 1e-9) + 1e-300) | (dvals == 0)
    verdict, _, why = decay_verdict(eps, np.where(np.isfinite(dvals), dvals, np.inf),
                                    bool(np.any(~np.isfinite(dvals))))
    if why:
        notes.append(why)
    violated = bool(diverges or not np.all(np.isfinite(integral)))
    if violated:
        notes.append("Dini hypothesis on omega_bar fails")
    return P2Report(float(k), eps, dvals, maj, float(C_fit), holds, verdict, violated, "; ".join(notes))


def sample_nested_pairs(a, b, top, n_pairs=500, n_scales=11, seed=0):
    """Rows ``(x1, x2, s, t)`` with ``x2 - x1`` on dyadic scales below ``top``
    and ``x1 < s < t < x2`` uniform."""
    rng = np.random.default_rng(seed)
    counts = np.full(n_scales, n_pairs // n_scales)
    counts[: n_pairs % n_scales] += 1
    rows = []
    for j, cnt in enumerate(counts):
        w = min(top * 2.0**-j, b - a)
        gap = w * (0.5 + 0.5 * rng.random(cnt))
        x1 = a + (b - a - gap) * rng.random(cnt)
        x2 = np.minimum(x1 + gap, b)
        st = np.sort(rng.random((cnt, 2)), axis=1)
        s = x1 + (x2 - x1) * st[:, 0]
        t = x1 + (x2 - x1) * st[:, 1]
        rows.append(np.column_stack([x1, x2, s, t]))
    out = np.vstack(rows)
    return out[out[:, 3] > out[:, 2]]


@dataclass
class P3Report:
    pairs: np.ndarray        # (x1, x2, s, t)
    lhs: np.ndarray          # |k(x1, x2) - k(s, t)|
    bound: np.ndarray        # delta(|k(x1, x2)|, x2 - x1)
    extrapolated: np.ndarray
    tol: np.ndarray = 0.0    # round-off allowance of the two chord slopes

    @property
    def finite(self):
        return np.isfinite(self.bound)

    @property
    def vacuous(self):
        return int(np.sum(~self.finite))

    @property
    def ratio(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.lhs == 0, 0.0, self.lhs / self.bound)
        return np.where(self.finite, r, np.nan)

    @property
    def max_ratio(self):
        r = self.ratio[self.finite]
        return float(np.max(r)) if r.size else np.nan

    @property
    def violations(self):
        return np.flatnonzero(self.finite & (self.lhs > self.bound + self.tol))

    @property
    def ok(self):
        return self.violations.size == 0


def _chord(u, s, t):
    return (u(t) - u(s)) / (t - s)


def check_P3(u, delta, pairs=None, delta0=None, n_pairs=500, seed=0, k_max=None):
    """Chord-slope stability ``|k(x1, x2) - k(s, t)| <= delta(|k(x1, x2)|, x2 - x1)``.

    ``pairs`` rows are ``(x1, x2, s, t)``; by default they are sampled with
    ``x2 - x1 <= delta0 / e``.  Pairs with infinite ``delta`` are counted as
    vacuous, those with ``|k|`` beyond ``k_max`` as extrapolated.
    """
    if pairs is None:
        if delta0 is None:
            raise ValueError("need pairs or delta0")
        pairs = sample_nested_pairs(u.a, u.b, delta0 / np.e, n_pairs, seed=seed)
    pairs = np.asarray(pairs, float).reshape(-1, 4)
    k1 = _chord(u, pairs[:, 0], pairs[:, 1])
    k2 = _chord(u, pairs[:, 2], pairs[:, 3])
    lhs = np.abs(k1 - k2)
    bound = np.array([delta(abs(k), x2 - x1) for k, (x1, x2) in zip(k1, pairs[:, :2])], dtype=float)
    if k_max is None:
        k_max = getattr(delta, "k_max", np.inf)
    scale = np.max(np.abs(u.values))
    inv_gap = 1.0 / (pairs[:, 1] - pairs[:, 0]) + 1.0 / (pairs[:, 3] - pairs[:, 2])
    tol = 1e-12 * (1.0 + np.abs(k1)) + 8 * np.finfo(float).eps * scale * inv_gap
    return P3Report(pairs, lhs, bound, np.abs(k1) > k_max, tol)


@dataclass
class EnergyReport:
    y: float
    z: float
    k: float
    Delta: float
    measure: float           # length of the deviation set
    integral: float
    bound: float

    @property
    def slack(self):
        return self.bound - self.integral

    @property
    def vacuous(self):
        return not np.isfinite(self.Delta)

    @property
    def ok(self):
        return self.vacuous or self.integral <= self.bound * (1 + 1e-12) + 1e-300


def check_energy_estimate(u, y, z, Delta):
    """``int over {|u' - k| >= D} of |u' - k|**2 <= D**2 (z - y)`` on ``[y, z]``,
    ``k`` the chord slope and ``D = Delta(|k|, z - y)``.

    The deviation set is a union of (partial) cells since ``u'`` is
    cellwise constant.
    """
    if not y < z:
        raise ValueError("need y < z")
    k = float(_chord(u, y, z))
    D = float(Delta(abs(k), z - y))
    lo = np.maximum(u.x[:-1], y)
    hi = np.minimum(u.x[1:], z)
    overlap = np.clip(hi - lo, 0.0, None)
    dev = np.abs(u.slopes() - k)
    inside = (overlap > 0) & (dev >= D)
    integral = float(np.sum(overlap[inside] * dev[inside] ** 2))
    return EnergyReport(float(y), float(z), k, D, float(np.sum(overlap[inside])), integral, D * D * (z - y))


@dataclass
class EnergyHarness:
    reports: list

    @property
    def vacuous(self):
        return sum(r.vacuous for r in self.reports)

    @property
    def empty_sets(self):
        return sum((not r.vacuous) and r.measure == 0 for r in self.reports)

    @property
    def violations(self):
        return [r for r in self.reports if not r.ok]

    @property
    def min_slack(self):
        s = [r.slack for r in self.reports if not r.vacuous]
        return float(min(s)) if s else np.nan

    @property
    def ok(self):
        return not self.violations


def energy_estimate_harness(u, Delta, delta0, n_pairs=200, seed=0):
    """Run :func:`check_energy_estimate` on sampled pairs with ``z - y <= delta0 / e``."""
    rows = sample_nested_pairs(u.a, u.b, delta0 / np.e, n_pairs, seed=seed)
    return EnergyHarness([check_energy_estimate(u, y, z, Delta) for y, z in rows[:, :2]])


def contact_interval(u, pair, tol=1e-12):
    """Smallest interval containing the nodes where ``u`` touches an obstacle, or ``None``."""
    lo, hi = pair.lower(u.x), pair.upper(u.x)
    touch = np.flatnonzero((np.abs(u.values - lo) <= tol) | (np.abs(u.values - hi) <= tol))
    touch = touch[(touch > 0) & (touch < u.n - 1)]
    if touch.size == 0:
        return None
    return float(u.x[touch[0]]), float(u.x[touch[-1]])


def l2_slope_norm(u):
    """Discrete ``||u'||_{L^2}``."""
    return float(np.sqrt(np.sum(u.h * u.slopes() ** 2)))


def sup_increment_ratio(u, pairs):
    """Largest ``|u(x) - u(y)| / sqrt(|x - y|)`` over the given pairs."""
    pairs = np.asarray(pairs, float).reshape(-1, 2)
    d = np.abs(u(pairs[:, 0]) - u(pairs[:, 1]))
    return float(np.max(d / np.sqrt(np.abs(pairs[:, 0] - pairs[:, 1]))))


__all__ = [
    "K_GRID", "ETA_CAP", "compute_N", "max_delta0", "compute_M_k", "compute_M_growth",
    "delta1_bound", "delta2_bound", "big_delta", "omega_hat", "omega_bar", "bound_constants",
    "hypothesis_H_test", "picard_fixed_point", "little_delta", "PlanarBand", "KRow",
    "TheoryConstants", "build_constants", "DeltaPipeline", "default_lattice", "check_P2",
    "check_P3", "check_energy_estimate", "energy_estimate_harness", "sample_nested_pairs",
    "contact_interval", "l2_slope_norm", "sup_increment_ratio",
]
