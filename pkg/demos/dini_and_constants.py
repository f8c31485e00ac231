"""Dini ladders and the constants pipeline.

Part one shows a summable modulus next to one that is not.  Part two builds
the constants for the taut-string benchmark and prints a slice of the
Delta/delta tables, the quantities the P3 check compares chord slopes with.
"""

import numpy as np

from obstreg import Lagrangian, ObstaclePair, ProblemSpec, build_theory, dini_test, solve
from obstreg.obstacles import FunctionModulus

print("int_0^{e eps} w(xi)^theta dxi/xi along eps = 1e-1 ... 1e-40")
cases = {
    "xi^0.5, theta=1": (FunctionModulus(lambda xi: xi**0.5), 1.0),
    "xi^0.5, theta=0.5": (FunctionModulus(lambda xi: xi**0.5), 0.5),
    "1/ln(e + 1/xi), theta=1": (FunctionModulus(lambda xi: 1 / np.log(np.e + 1 / xi)), 1.0),
}
for label, (mod, theta) in cases.items():
    r = dini_test(mod, 0.0, theta)
    head = ", ".join(f"{v:.3g}" for v in r.values[:4])
    print(f"  {label:26s} {r.verdict:5s} slope={r.slope:.4f}  first values {head}  {r.notes}")

print()
spec = ProblemSpec(0, 1, 0, 0, Lagrangian.from_expression("v^2", 2),
                   ObstaclePair("0.5 - 4*(x - 0.5)^2", 10, 0, 1), 1001)
res = solve(spec)
holder, pipe = build_theory(spec, res.energy)
tc = pipe.tc
print(f"c = |J| + 1 = {tc.c:.6f}, M = {tc.M_growth:g}, N = {tc.N:.6f}, delta0 = {tc.delta0:.6g}")
print(f"Hölder pair of L on the obstacle box: C0 = {holder.C:.4g}, alpha0 = {holder.alpha:g}")
print()
print(f"{'k':>8} {'c_k':>10} {'M_k':>10} {'C1_k':>10} {'alpha_k':>8} {'C2_k':>10}")
for row in tc.rows[:6]:
    print(f"{row.k:8.3g} {row.c_k:10.4g} {row.M_k:10.4g} {row.C1_k:10.4g} {row.alpha_k:8.3g} {row.C2_k:10.4g}")

print()
eps = np.array([1e-12, 1e-9, 1e-6, 1e-3]) * tc.delta0
for k in (0.0, 1.0, 2.0):
    D = np.atleast_1d(pipe.Delta(k, eps))
    d = [pipe.delta(k, e) for e in eps]
    print(f"k={k:3g}  Delta: " + " ".join(f"{v:9.3g}" for v in D) + "   delta: " + " ".join(f"{v:9.3g}" for v in d))
print("(inf means no finite fixed point below the cap, so the chord-slope bound is vacuous there)")
