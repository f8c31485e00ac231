"""Refinement-based singular-set diagnostic.

The largest discrete slope near each point is tracked along a ladder of
grids.  A profile with an infinite derivative keeps steepening; regular
minimizers do not.  Writes demos/out/singular_set.png.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from obstreg import GridFunction, Lagrangian, ObstaclePair, ProblemSpec, singular_candidates
from obstreg.regularity import refinement_profiles

OUT = Path(__file__).parent / "out"
LADDER = (251, 501, 1001, 2001)

cusp = lambda n: GridFunction.sample(lambda x: x ** (2 / 3), 0, 1, n)  # noqa: E731
for c in singular_candidates(LADDER, profile=cusp):
    print(f"x^(2/3): candidate at x={c.x:.2e}, max |u'| per level "
          + ", ".join(f"{s:.1f}" for s in c.slopes) + f" (growth {c.total_growth:.2f})")

line = lambda n: GridFunction.sample(lambda x: 2 * x - 1, 0, 1, n)  # noqa: E731
print(f"linear profile: {len(singular_candidates(LADDER, profile=line))} candidates")

spec = ProblemSpec(0, 1, 0, 0, Lagrangian.from_expression("v^2 + u^2", 2),
                   ObstaclePair("0.3 - abs(x - 0.5)^1.5", "0.6 + abs(x - 0.5)^1.5", 0, 1), 101)
print(f"v^2 + u^2 between C^(1,1/2) obstacles: {len(singular_candidates(LADDER, spec))} candidates")

OUT.mkdir(exist_ok=True)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for u in refinement_profiles(LADDER, profile=cusp):
    ax1.semilogx(u.midpoints, abs(u.slopes()), label=f"n={u.n}")
ax1.set_title("|u'| for x^(2/3)")
ax1.legend()
for u in refinement_profiles(LADDER, spec):
    ax2.plot(u.midpoints, u.slopes(), label=f"n={u.n}")
ax2.set_title("u' between C^(1,1/2) obstacles")
ax2.legend()
fig.tight_layout()
fig.savefig(OUT / "singular_set.png", dpi=120)
print(f"figure: {OUT / 'singular_set.png'}")
