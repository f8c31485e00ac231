"""Dini-type integrals ``int_0^X m(xi) dxi / xi`` by log substitution.

With ``xi = exp(t)`` the measure ``dxi/xi`` becomes ``dt`` and the integral
runs over ``t in (-inf, ln X]``.  The window is truncated some decades
below the upper limit (deepened adaptively while the remainder is large)
and integrated with composite Simpson; the remainder is extrapolated
geometrically from the two deepest decades (exact for power-law integrands).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import QuadratureUnderflow

LN10 = np.log(10.0)
DEPTH_DECADES = 40
PANELS = 2048
DIVERGENCE_PROBES = (1e-6, 1e-9, 1e-12)
# |d log m / d log log(1/xi)| at or below this means the tail behaves like an
# integral of t**-q dt with q <= 1, i.e. it diverges
DIVERGENCE_SLOPE = 1.05
POWER_GROWTH = 1.25


@dataclass(frozen=True)
class LogIntegral:
    value: float        # window integral plus extrapolated remainder
    window: float       # integral over the truncated window only
    tail: float         # extrapolated remainder below the window (inf if divergent)
    lower: float        # lower truncation point


def _simpson_t(func, t0, t1, panels):
    t = np.linspace(t0, t1, panels + 1)
    with np.errstate(all="ignore"):
        y = np.asarray(func(np.exp(t)), dtype=float)
    y = np.broadcast_to(y, t.shape)
    if not np.all(np.isfinite(y)):
        return np.inf
    return float(simpson(y, x=t))


def _window(func, upper, depth, panels):
    t1 = np.log(upper)
    t0 = t1 - depth * LN10
    window = _simpson_t(func, t0, t1, panels)
    last = _simpson_t(func, t0, t0 + LN10, 64)
    extra = _simpson_t(func, t0 - LN10, t0, 64)
    if extra == 0.0:
        tail = 0.0
    elif last > 0 and extra < last:
        tail = extra / (1.0 - extra / last)
    else:
        tail = np.inf
    return window, tail, float(np.exp(t0))


def log_integral(func, upper, depth=DEPTH_DECADES, panels=PANELS, strict=True):
    """Integrate ``func(xi) dxi/xi`` over ``(0, upper]``.

    The window starts ``depth`` decades below ``upper`` and is deepened
    (doubling, while staying above ~1e-300) as long as the extrapolated
    remainder exceeds 10% of the total.  If it still does, raises
    :class:`QuadratureUnderflow` when ``strict``.
    """
    if upper <= 0:
        return LogIntegral(0.0, 0.0, 0.0, 0.0)
    max_depth = np.log10(upper) + 300.0
    depth = min(depth, max_depth)
    while True:
        n = int(panels * max(1.0, depth / DEPTH_DECADES))
        n += n % 2
        window, tail, lower = _window(func, upper, depth, n)
        value = window + tail
        small = not (np.isfinite(value) and value > 0 and tail > 0.1 * value)
        if small or not np.isfinite(tail) or depth >= max_depth:
            break
        depth = min(2 * depth, max_depth)
    if strict and not small:
        raise QuadratureUnderflow(
            f"truncated tail {tail:.3g} exceeds 10% of integral {value:.3g}"
        )
    return LogIntegral(float(value), float(window), float(tail), lower)


@dataclass(frozen=True)
class TailProbe:
    points: tuple
    integrand: tuple
    slopes: tuple       # -d log m / d log t between consecutive probes, t = ln(1/xi)
    diverges: bool


def probe_tail(func, probes=DIVERGENCE_PROBES):
    """Decide whether ``int_0 func(xi) dxi/xi`` diverges at the origin.

    In ``t = ln(1/xi)`` a power-law modulus decays exponentially, so its
    log-log slope ``-d log m / d log t`` grows roughly like ``t``; a
    logarithmic modulus ``1/ln(1/xi)**q`` keeps the slope near ``q``.  The
    tail is declared divergent when the slope is flat across the probes and
    at most ``1.05`` (an integrable ``t**-q`` needs ``q > 1``).
    """
    xi = np.asarray(probes, dtype=float)
    with np.errstate(all="ignore"):
        m = np.broadcast_to(np.asarray(func(xi), dtype=float), xi.shape)
    if not np.all(np.isfinite(m)):
        return TailProbe(tuple(xi), tuple(m), (), True)
    if np.any(m <= 0):
        return TailProbe(tuple(xi), tuple(m), (), False)
    t = np.log(1.0 / xi)
    slopes = -np.diff(np.log(m)) / np.diff(np.log(t))
    flat = slopes[-1] <= POWER_GROWTH * max(slopes[0], 1e-300) or slopes[-1] <= 0
    diverges = bool(flat and slopes[-1] <= DIVERGENCE_SLOPE)
    return TailProbe(tuple(xi), tuple(m), tuple(slopes), diverges)
