"""Obstacle pairs, moduli of continuity and Dini-type integral tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGrid, InfeasibleSpec
from .expr import Expression
from .grid import GridFunction
from .quadrature import log_integral, probe_tail

DEFAULT_EPS_LADDER = tuple(10.0 ** -np.arange(1, 41))
PASS_RATIO = 0.1
EXTENSION_FLOOR = 1e-200
SMALL_SCALE_LAGS = 7
OBSTACLE_KEYS = ("f", "fprime", "g", "gprime")


# --- moduli ----------------------------------------------------------------

class Modulus:
    """Tabulated modulus of continuity.

    Evaluation rounds ``eps`` up to the next tabulated lag (upper envelope).
    Below the first positive lag the modulus is extended to vanish at the
    origin, either as ``min(omega_1, lipschitz * eps)`` (exact for
    piecewise-linear data) or, when ``power`` is given, as
    ``omega_1 * (eps / lag_1)**power`` (for samples of a function whose
    small-scale Hölder exponent is ``power``).  Beyond the last lag the last
    value is returned; :meth:`clamped` reports where that happened.
    """

    def __init__(self, lags, values, lipschitz=None, power=None):
        lags = np.asarray(lags, dtype=float)
        values = np.asarray(values, dtype=float)
        if lags.shape != values.shape or lags.ndim != 1 or lags.size == 0:
            raise ValueError("lags and values must be matching 1-D arrays")
        if np.any(np.diff(lags) <= 0) or lags[0] <= 0:
            raise ValueError("lags must be positive and strictly increasing")
        if power is not None and not 0 < power <= 1:
            raise ValueError("power must lie in (0, 1]")
        self.eps = np.concatenate([[0.0], lags])
        self.omega = np.maximum.accumulate(np.concatenate([[0.0], np.maximum(values, 0.0)]))
        self.lipschitz = lipschitz
        self.power = power

    def __call__(self, eps):
        eps = np.asarray(eps, dtype=float)
        idx = np.searchsorted(self.eps, eps, side="left")
        idx = np.minimum(idx, self.eps.size - 1)
        out = self.omega[idx]
        small = eps < self.eps[1]
        if self.power is not None:
            with np.errstate(all="ignore"):
                ext = self.omega[1] * np.power(np.maximum(eps, 0.0) / self.eps[1], self.power)
            out = np.where(small, ext, out)
        elif self.lipschitz is not None:
            out = np.where(small, np.minimum(self.omega[1], self.lipschitz * eps), out)
        out = np.where(eps <= 0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def clamped(self, eps):
        return np.asarray(eps) > self.eps[-1]

    def __repr__(self):
        return f"Modulus({self.eps.size - 1} lags up to {self.eps[-1]:g}, max {self.omega[-1]:g})"


class FunctionModulus:
    """Modulus given in closed form, e.g. ``FunctionModulus(lambda e: 2 * e**0.5)``."""

    def __init__(self, func, label="closed form"):
        self.func = func
        self.label = label

    def __call__(self, eps):
        eps = np.asarray(eps, dtype=float)
        with np.errstate(all="ignore"):
            out = np.where(eps > 0, self.func(np.maximum(eps, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def clamped(self, eps):
        return np.zeros(np.shape(eps), dtype=bool)

    def __repr__(self):
        return f"FunctionModulus({self.label})"


def _sparse_tables(values):
    tmax, tmin = [values], [values]
    k = 1
    while (1 << k) <= values.size:
        half = 1 << (k - 1)
        tmax.append(np.maximum(tmax[-1][:-half], tmax[-1][half:]))
        tmin.append(np.minimum(tmin[-1][:-half], tmin[-1][half:]))
        k += 1
    return tmax, tmin


def _range_spread(tmax, tmin, i, j):
    """max - min of values[i..j] (inclusive) for index arrays i <= j."""
    length = j - i + 1
    k = np.floor(np.log2(length)).astype(int)
    out = np.empty(i.size)
    for level in np.unique(k):
        sel = k == level
        a, b = i[sel], j[sel] - (1 << level) + 1
        hi = np.maximum(tmax[level][a], tmax[level][b])
        lo = np.minimum(tmin[level][a], tmin[level][b])
        out[sel] = hi - lo
    return out


def default_lags(h):
    """Dyadic multiples of the smallest node spacing up to the interval length."""
    spacing = float(np.min(np.diff(h.x)))
    length = h.b - h.a
    count = int(np.floor(np.log2(length / spacing))) + 1
    lags = spacing * 2.0 ** np.arange(count)
    if lags[-1] < length:
        lags = np.append(lags, length)
    return lags


def _small_scale_exponent(lags, omega, count=SMALL_SCALE_LAGS):
    """Log-log slope of ``omega`` between the second and the ``count``-th lag, clipped to [0.05, 1].

    The first lag is skipped: a one-cell window sees only one side of a kink.
    """
    first = 1 if lags.size > 2 else 0
    last = min(count, lags.size) - 1
    if last <= first or omega[first] <= 0 or omega[last] <= 0:
        return 1.0
    slope = np.log(omega[last] / omega[first]) / np.log(lags[last] / lags[first])
    return float(np.clip(slope, 0.05, 1.0))


def estimate_modulus(h, lags=None, extension="lipschitz"):
    """Modulus of continuity of grid data ``h`` at each lag.

    ``omega_j = max |h(x) - h(y)|`` over node pairs with ``|x - y| <= lag_j``,
    computed as the largest spread of ``h`` over windows of width ``lag_j``
    with sparse-table range queries.

    ``extension`` selects the behaviour below the first lag: ``"lipschitz"``
    (the modulus of the piecewise-linear interpolant) or ``"power"`` (a
    power law with the exponent fitted on the first few lags, suited to
    samples of a closed-form function).
    """
    if extension not in ("lipschitz", "power"):
        raise ValueError("extension must be 'lipschitz' or 'power'")
    if not isinstance(h, GridFunction):
        raise TypeError("estimate_modulus expects a GridFunction")
    if h.n < 2:
        raise EmptyGrid("need at least two nodes")
    lags = default_lags(h) if lags is None else np.asarray(lags, dtype=float)
    if np.any(lags <= 0) or np.any(np.diff(lags) <= 0):
        raise ValueError("lags must be positive and sorted")
    tmax, tmin = _sparse_tables(h.values)
    i = np.arange(h.n)
    tol = 1e-12 * (h.b - h.a)
    omega = np.empty(lags.size)
    for n, lag in enumerate(lags):
        j = np.searchsorted(h.x, h.x + lag + tol, side="right") - 1
        omega[n] = float(np.max(_range_spread(tmax, tmin, i, j)))
    lip = float(np.max(np.abs(h.slopes())))
    power = _small_scale_exponent(lags, omega) if extension == "power" else None
    return Modulus(lags, omega, lipschitz=lip, power=power)


@dataclass(frozen=True)
class TwoArgModulus:
    """``omega(k, eps)``, nondecreasing in both arguments with ``omega(k, 0) = 0``."""

    func: callable
    label: str = ""
    parts: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, k, eps):
        k = np.asarray(k, dtype=float)
        eps = np.asarray(eps, dtype=float)
        out = np.where(eps > 0, self.func(np.abs(k), np.maximum(eps, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out


ZERO_OMEGA = TwoArgModulus(lambda k, e: np.zeros(np.broadcast_shapes(np.shape(k), np.shape(e))), "zero")


# --- obstacles -------------------------------------------------------------

def _as_callable(obj):
    if isinstance(obj, str):
        return Expression(obj, ("x",))
    if np.isscalar(obj):
        return _Constant(float(obj))
    return obj


class _Constant:
    constant = True

    def __init__(self, c):
        self.c = c

    def __call__(self, x):
        return np.full(np.shape(x), self.c) if np.ndim(x) else self.c


def _derivative(func, x):
    if getattr(func, "constant", False):
        return np.zeros_like(x)
    if isinstance(func, Expression):
        d = func.diff("x")
        return np.broadcast_to(np.asarray(d(x), dtype=float), x.shape).copy()
    vals = np.broadcast_to(np.asarray(func(x), dtype=float), x.shape)
    return np.gradient(vals, x, edge_order=2)


class ObstaclePair:
    """Lower and upper obstacles ``f < g`` on ``[a, b]``.

    ``f`` and ``g`` may be expression strings over ``x``, numbers, vectorised
    callables or :class:`GridFunction` objects.  They are sampled on a
    reference grid of ``n_ref`` nodes on which sup norms and moduli of
    continuity are computed.  Missing derivatives come from symbolic
    differentiation (expressions) or second-order differences.

    ``moduli`` may override any of the estimated moduli, keyed by
    ``"f"``, ``"fprime"``, ``"g"``, ``"gprime"``.
    """

    def __init__(self, f, g, a, b, fprime=None, gprime=None, margin=1e-9,
                 n_ref=20001, moduli=None):
        if not a < b:
            raise ValueError("need a < b")
        self.a, self.b = float(a), float(b)
        # closed-form obstacles get a power-law sub-grid modulus, grid data a Lipschitz one
        self._extension = {
            side: "lipschitz" if isinstance(obj, GridFunction) else "power"
            for side, obj in (("f", f), ("g", g))
        }
        self.f = _as_callable(f)
        self.g = _as_callable(g)
        self.margin = float(margin)
        x = np.linspace(a, b, int(n_ref))
        self.x_ref = x
        self.f_ref = np.broadcast_to(np.asarray(self.f(x), dtype=float), x.shape).copy()
        self.g_ref = np.broadcast_to(np.asarray(self.g(x), dtype=float), x.shape).copy()
        fp = _as_callable(fprime) if fprime is not None else None
        gp = _as_callable(gprime) if gprime is not None else None
        self.fprime = fp
        self.gprime = gp
        self.fp_ref = (np.broadcast_to(np.asarray(fp(x), float), x.shape).copy()
                       if fp is not None else _derivative(self.f, x))
        self.gp_ref = (np.broadcast_to(np.asarray(gp(x), float), x.shape).copy()
                       if gp is not None else _derivative(self.g, x))
        for arr, name in ((self.f_ref, "f"), (self.g_ref, "g"),
                          (self.fp_ref, "f'"), (self.gp_ref, "g'")):
            if not np.all(np.isfinite(arr)):
                raise InfeasibleSpec(f"obstacle {name} is not finite on [a, b]")
        gap = float(np.min(self.g_ref - self.f_ref))
        if gap < self.margin:
            raise InfeasibleSpec(f"obstacles must satisfy f < g with gap >= {margin}; min gap {gap:g}")
        self.M2 = float(max(np.max(np.abs(self.fp_ref)), np.max(np.abs(self.gp_ref))))
        self.M1 = float(max(np.max(np.abs(self.f_ref)), np.max(np.abs(self.g_ref)))
                        + self.M2 * (self.b - self.a))
        self._moduli = dict(moduli or {})

    @property
    def n_ref(self):
        return self.x_ref.size

    def lower(self, x):
        return np.broadcast_to(np.asarray(self.f(x), dtype=float), np.shape(x)).copy()

    def upper(self, x):
        return np.broadcast_to(np.asarray(self.g(x), dtype=float), np.shape(x)).copy()

    def reference(self, key):
        arr = {"f": self.f_ref, "fprime": self.fp_ref, "g": self.g_ref, "gprime": self.gp_ref}[key]
        return GridFunction(self.x_ref, arr)

    def modulus(self, key):
        if key not in OBSTACLE_KEYS:
            raise KeyError(key)
        if key not in self._moduli:
            self._moduli[key] = estimate_modulus(self.reference(key), extension=self._extension[key[0]])
        return self._moduli[key]

    def moduli(self):
        return {k: self.modulus(k) for k in OBSTACLE_KEYS}

    def contains(self, x, u, tol=0.0):
        """Nodewise ``f - tol <= u <= g + tol``."""
        return bool(np.all(self.lower(x) - tol <= u) and np.all(u <= self.upper(x) + tol))

    def __repr__(self):
        return f"ObstaclePair([{self.a:g}, {self.b:g}], M1={self.M1:.4g}, M2={self.M2:.4g})"


def obstacle_omega(pair, C0, alpha0, moduli=None):
    """Obstacle penalty modulus

    ``omega(k, e) = C0 * [(w_f(e) + w_f'(e) + k e)**a0 + (w_g(e) + w_g'(e) + k e)**a0]``

    where ``(C0, a0)`` is a Hölder pair of ``L`` on
    ``[a, b] x [-M1, M1] x [-M2, M2]``.
    """
    if not C0 >= 0 or not 0 < alpha0 <= 1:
        raise ValueError("need C0 >= 0 and alpha0 in (0, 1]")
    mods = pair.moduli() if moduli is None else moduli
    wf, wfp, wg, wgp = (mods[k] for k in OBSTACLE_KEYS)

    def omega(k, eps):
        lower = wf(eps) + wfp(eps) + k * eps
        upper = wg(eps) + wgp(eps) + k * eps
        return C0 * (np.power(lower, alpha0) + np.power(upper, alpha0))

    return TwoArgModulus(omega, f"obstacle omega (C0={C0:.4g}, alpha0={alpha0:.4g})",
                         parts={"C0": C0, "alpha0": alpha0, **dict(zip(OBSTACLE_KEYS, (wf, wfp, wg, wgp)))})


# --- Dini tests ------------------------------------------------------------

@dataclass
class DiniResult:
    eps: np.ndarray
    values: np.ndarray
    verdict: str
    slope: float
    tail_diverges: bool
    notes: str = ""


def _fit_slope(eps, values):
    ok = values > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[ok]), np.log(values[ok]), 1)[0])


def decay_verdict(eps, values, diverges):
    """Finite proxy for ``lim_{eps -> 0} I(eps) = 0`` given a ladder of values."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    slope = _fit_slope(eps, values)
    if np.all(values == 0):
        return "pass", 0.0, "identically zero"
    if diverges or not np.all(np.isfinite(values)):
        return "fail", slope, "integral diverges at the origin"
    if values[-1] >= values[0]:
        return "fail", slope, "values do not decrease along the ladder"
    monotone = bool(np.all(np.diff(values) <= 1e-12 * values[0]))
    if monotone and values[-1] < PASS_RATIO * values[0] and slope > 0:
        return "pass", slope, ""
    return "inconclusive", slope, "decay too slow to certify on this ladder"


def _check_ladder(eps_ladder):
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.ndim != 1 or eps.size < 2 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps_ladder must be strictly decreasing positive values")
    return eps


def dini_ladder(integrand, eps_ladder=DEFAULT_EPS_LADDER, floor=EXTENSION_FLOOR):
    """Ladder of ``int_0^{e eps} integrand(xi) dxi/xi`` with a decay verdict.

    When the values decrease monotonically but too slowly to certify, the
    ladder is continued decade by decade down to ``floor`` (slow power laws
    such as ``xi**(1/64)`` need a few hundred decades).
    """
    eps = _check_ladder(eps_ladder)
    probe = probe_tail(integrand)
    strict = not probe.diverges

    def value(e):
        return log_integral(integrand, np.e * e, strict=strict).value

    values = np.array([value(e) for e in eps])
    verdict, slope, notes = decay_verdict(eps, values, probe.diverges)
    if verdict == "inconclusive" and slope > 0 and np.all(np.diff(values) <= 0):
        eps, values = list(eps), list(values)
        while eps[-1] / 10.0 >= floor and values[-1] >= PASS_RATIO * values[0]:
            eps.append(eps[-1] / 10.0)
            values.append(value(eps[-1]))
        eps, values = np.array(eps), np.array(values)
        verdict, slope, notes = decay_verdict(eps, values, probe.diverges)
        notes = "; ".join(filter(None, [notes, f"ladder extended to {eps[-1]:.0e}"]))
    return DiniResult(eps, values, verdict, slope, probe.diverges, notes)


def dini_test(omega_h, gamma=0.0, theta=1.0, eps_ladder=DEFAULT_EPS_LADDER):
    """Ladder of ``int_0^{e eps} [omega_h(xi + gamma sqrt(xi))]**theta dxi/xi``.

    Returns a :class:`DiniResult` whose ``verdict`` is ``"pass"``,
    ``"fail"`` or ``"inconclusive"``.
    """
    _check_ladder(eps_ladder)
    if theta <= 0 or gamma < 0:
        raise ValueError("need theta > 0 and gamma >= 0")

    def integrand(xi):
        return np.power(omega_h(xi + gamma * np.sqrt(xi)), theta)

    return dini_ladder(integrand, eps_ladder)


def required_thetas(alpha0, alpha_k=()):
    """Exponents needed by the regularity argument: a0*a(k)/4, a0/4, a0/2."""
    th = {0.25 * alpha0, 0.5 * alpha0}
    th.update(0.25 * alpha0 * a for a in alpha_k)
    return tuple(sorted(th))


def power_majorant(beta, N, eps):
    """Closed-form bound on ``int_0^{e eps} (xi + N sqrt(xi))**beta dxi/xi``."""
    C = max(1.0, 2.0 ** (beta - 1.0))
    ee = np.e * np.asarray(eps, dtype=float)
    return C * (ee**beta / beta + 2.0 * N**beta * ee ** (beta / 2) / beta)


@dataclass
class SuiteResult:
    entries: list          # (obstacle key, theta, DiniResult)
    power_checks: list     # (beta, values, majorants, within_bound, DiniResult)
    verdict: str

    def rows(self):
        for key, theta, res in self.entries:
            for e, v in zip(res.eps, res.values):
                yield key, theta, e, v, res.verdict
        for beta, vals, _, _, res in self.power_checks:
            for e, v in zip(res.eps, vals):
                yield "power", beta, e, v, res.verdict


def condition_1_2_suite(pair, N, thetas, eps_ladder=DEFAULT_EPS_LADDER, betas=(0.1, 0.5, 1.0),
                        moduli=None):
    """Dini tests of ``w_h(xi + N sqrt xi)**theta`` for ``h`` in f, f', g, g'.

    Also checks the power-law integrals ``(xi + N sqrt xi)**beta`` against
    their closed-form majorant.  The aggregate verdict is ``"pass"`` only if
    every component passes.
    """
    mods = pair.moduli() if moduli is None else moduli
    entries = []
    for key in OBSTACLE_KEYS:
        for theta in thetas:
            entries.append((key, float(theta), dini_test(mods[key], N, theta, eps_ladder)))
    ident = FunctionModulus(lambda x: x, "identity")
    power = []
    for beta in betas:
        res = dini_test(ident, N, beta, eps_ladder)
        maj = power_majorant(beta, N, res.eps)
        within = bool(np.all(res.values <= maj * (1 + 1e-6)))
        power.append((float(beta), res.values, maj, within, res))
    verdicts = [r.verdict for _, _, r in entries] + [r.verdict for *_, r in power]
    ok = all(v == "pass" for v in verdicts) and all(p[3] for p in power)
    if ok:
        verdict = "pass"
    elif "fail" in verdicts or not all(p[3] for p in power):
        verdict = "fail"
    else:
        verdict = "inconclusive"
    return SuiteResult(entries, power, verdict)
