"""Lagrangians ``L(x, u, v)`` with derivatives in the slope slot.

A :class:`Lagrangian` bundles vectorised evaluators for ``L`` and its
partial derivatives.  Built from an :class:`~obstreg.expr.Expression` the
derivatives are symbolic; built from a bare callable they fall back to
central differences (reduced-accuracy mode).

Also here: the empirical checks of local Hölder continuity and of the
uniform ellipticity floor ``L_vv >= mu`` on a compact box.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import qmc

from .errors import DegenerateBox, NonFinite
from .expr import Expression

HOLDER_LADDER = (1.0, 1 / 2, 1 / 3, 1 / 4)
SAFETY = 1.1


def _fd_step(v, rel=1e-5):
    return rel * (1.0 + np.abs(v))


@dataclass(frozen=True)
class Lagrangian:
    """Evaluator bundle for ``L`` and its partial derivatives.

    All evaluators take ``(x, u, v)`` and broadcast over numpy arrays.
    ``eval_u``, ``eval_uu`` and ``eval_uv`` are needed by the Newton
    solver; ``mu`` is the declared ellipticity floor.
    """

    eval: callable
    eval_v: callable
    eval_vv: callable
    eval_u: callable
    eval_uu: callable
    eval_uv: callable
    mu: float
    source: str = "<callable>"
    finite_difference: bool = False

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("ellipticity constant mu must be positive")

    def __call__(self, x, u, v):
        return self.eval(x, u, v)

    @classmethod
    def from_expression(cls, expr, mu, expr_v=None, expr_vv=None):
        """Build from expression strings over ``x, u, v``.

        Missing derivative expressions are obtained by symbolic
        differentiation of ``expr``.
        """
        L = Expression(expr) if isinstance(expr, str) else expr
        Lv = (Expression(expr_v) if isinstance(expr_v, str) else expr_v) or L.diff("v")
        Lvv = (Expression(expr_vv) if isinstance(expr_vv, str) else expr_vv) or Lv.diff("v")
        Lu = L.diff("u")
        return cls(
            eval=L, eval_v=Lv, eval_vv=Lvv,
            eval_u=Lu, eval_uu=Lu.diff("u"), eval_uv=Lu.diff("v"),
            mu=float(mu), source=L.source,
        )

    @classmethod
    def from_callable(cls, func, mu, d_v=None, d_vv=None, source="<callable>"):
        """Wrap a vectorised ``func(x, u, v)``; absent derivatives use central differences."""
        fd = d_v is None or d_vv is None
        if fd:
            warnings.warn(
                "Lagrangian derivatives not supplied; using central differences "
                "(reduced accuracy)", stacklevel=2,
            )

        def Lv(x, u, v):
            h = _fd_step(v)
            return (func(x, u, v + h) - func(x, u, v - h)) / (2 * h)

        def Lvv(x, u, v):
            h = _fd_step(v, 1e-4)
            return (func(x, u, v + h) - 2 * func(x, u, v) + func(x, u, v - h)) / h**2

        def Lu(x, u, v):
            h = _fd_step(u)
            return (func(x, u + h, v) - func(x, u - h, v)) / (2 * h)

        def Luu(x, u, v):
            h = _fd_step(u, 1e-4)
            return (func(x, u + h, v) - 2 * func(x, u, v) + func(x, u - h, v)) / h**2

        def Luv(x, u, v):
            hu, hv = _fd_step(u, 1e-4), _fd_step(v, 1e-4)
            return (
                func(x, u + hu, v + hv) - func(x, u + hu, v - hv)
                - func(x, u - hu, v + hv) + func(x, u - hu, v - hv)
            ) / (4 * hu * hv)

        return cls(
            eval=func, eval_v=d_v or Lv, eval_vv=d_vv or Lvv,
            eval_u=Lu, eval_uu=Luu, eval_uv=Luv,
            mu=float(mu), source=source, finite_difference=fd,
        )


def evaluate(L, x, u, v):
    """``L(x, u, v)``; raises :class:`NonFinite` on NaN or infinite results."""
    x, u, v = (np.asarray(t, dtype=float) for t in (x, u, v))
    with np.errstate(all="ignore"):
        out = np.asarray(L.eval(x, u, v), dtype=float)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"L({x}, {u}, {v}) is not finite")
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CompactBox:
    x_lo: float
    x_hi: float
    u_lo: float
    u_hi: float
    v_lo: float
    v_hi: float

    def __post_init__(self):
        for lo, hi, name in self._ranges():
            if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
                raise DegenerateBox(f"box has empty or degenerate {name}-range [{lo}, {hi}]")

    def _ranges(self):
        return (
            (self.x_lo, self.x_hi, "x"),
            (self.u_lo, self.u_hi, "u"),
            (self.v_lo, self.v_hi, "v"),
        )

    @property
    def lo(self):
        return np.array([self.x_lo, self.u_lo, self.v_lo])

    @property
    def hi(self):
        return np.array([self.x_hi, self.u_hi, self.v_hi])

    def corners(self):
        return np.array(list(itertools.product(*[(lo, hi) for lo, hi, _ in self._ranges()])))

    def contains(self, other):
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))


@dataclass(frozen=True)
class HolderEstimate:
    """``|L(p1) - L(p2)| <= C * |p1 - p2|_1 ** alpha`` over the sampled points."""

    C: float
    alpha: float
    box: CompactBox
    sample_count: int
    stable: bool = True
    points: np.ndarray = field(default=None, repr=False, compare=False)


def box_samples(box, n_samples, seed=0):
    """Scrambled Halton points plus corners, centre and the point nearest the origin."""
    lo, hi = box.lo, box.hi
    pts = qmc.Halton(d=3, scramble=True, seed=seed).random(max(int(n_samples), 2))
    pts = lo + pts * (hi - lo)
    centre = 0.5 * (lo + hi)
    nearest0 = np.clip(np.zeros(3), lo, hi)
    extra = [centre, nearest0]
    # coordinate hyperplanes through the origin are where kinks like |v| live
    for i in range(3):
        p = centre.copy()
        p[i] = nearest0[i]
        extra.append(p)
    return np.vstack([box.corners(), np.array(extra), pts])


def _probe_ratios(L, box, bases, alpha, steps):
    """Max of |L(p + h e_i) - L(p)| / h**alpha over bases and directions, per step h."""
    lo, hi = box.lo, box.hi
    out = []
    for h in steps:
        best = 0.0
        for i in range(3):
            # step into the box
            sgn = np.where(bases[:, i] + h <= hi[i], 1.0, -1.0)
            q = bases.copy()
            q[:, i] = np.clip(bases[:, i] + sgn * h, lo[i], hi[i])
            d = np.abs(q[:, i] - bases[:, i])
            ok = d > 0
            if not np.any(ok):
                continue
            dl = np.abs(evaluate(L, *q[ok].T) - evaluate(L, *bases[ok].T))
            best = max(best, float(np.max(dl / d[ok] ** alpha)))
        out.append(best)
    return np.array(out)


def estimate_holder(L, box, n_samples=256, seed=0, ladder=HOLDER_LADDER):
    """Empirical Hölder pair ``(C, alpha)`` for ``L`` on ``box``.

    ``alpha`` is the first exponent of ``ladder`` (tried in decreasing order)
    whose local difference quotients stay bounded under refinement of the
    probe step; ``C`` is ``1.1`` times the largest quotient seen over all
    sampled pairs and probes at that exponent.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if not isinstance(box, CompactBox):
        raise TypeError("box must be a CompactBox")
    pts = box_samples(box, n_samples, seed)
    vals = evaluate(L, *pts.T)
    dist = pdist(pts, metric="cityblock")
    dval = pdist(vals[:, None], metric="cityblock")
    ok = dist > 0
    dist, dval = dist[ok], dval[ok]

    diam = float(np.sum(box.hi - box.lo))
    steps = diam * np.array([1e-2, 1e-3, 1e-4, 1e-5])
    bases = pts[: min(len(pts), 8 + 5 + 32)]

    chosen = None
    for alpha in ladder:
        probe = _probe_ratios(L, box, bases, alpha, steps)
        coarse = probe[0]
        stable = probe[-1] <= 2.0 * coarse + 1e-12 * (1.0 + np.max(np.abs(vals)))
        if stable:
            chosen = (alpha, probe, True)
            break
    if chosen is None:
        alpha = ladder[-1]
        chosen = (alpha, _probe_ratios(L, box, bases, alpha, steps), False)
    alpha, probe, stable = chosen
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = float(np.max(dval / dist**alpha)) if dist.size else 0.0
    C = SAFETY * max(ratio, float(np.max(probe)))
    return HolderEstimate(C=C, alpha=alpha, box=box, sample_count=len(pts), stable=stable, points=pts)


def check_ellipticity(L, box, n_samples=1000):
    """Return ``(passes, observed_min)`` for ``min L_vv >= mu`` on a tensor grid in ``box``.

    The grid has an odd number of points per axis so box midpoints are
    included.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    m = max(3, int(round(n_samples ** (1 / 3))))
    if m % 2 == 0:
        m += 1
    axes = [np.linspace(lo, hi, m) for lo, hi, _ in box._ranges()]
    X, U, V = np.meshgrid(*axes, indexing="ij")
    with np.errstate(all="ignore"):
        lvv = np.asarray(L.eval_vv(X.ravel(), U.ravel(), V.ravel()), dtype=float)
    if not np.all(np.isfinite(lvv)):
        raise NonFinite("L_vv is not finite on the box")
    observed = float(np.min(lvv))
    rtol = 1e-4 if L.finite_difference else 1e-12
    return observed >= L.mu * (1 - rtol), observed
