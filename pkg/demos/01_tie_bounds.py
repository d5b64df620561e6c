# # Conditional tie probabilities and their bounds
#
# Every dyad falls into one of six classes by the degree status of its two
# endpoints (isolate, pendant, core). The change score only sees the number
# of pendant endpoints, so the full-conditional tie probability takes three
# values and is bracketed by a pair of logistic bounds.

import numpy as np

from ergmphase.graph import (
    DyadClass,
    Graph,
    ModelParams,
    bernoulli_bounds,
    change_score,
    classify_dyad,
    conditional_tie_prob,
    theta_to_physical,
)

theta = ModelParams(-1.631, -5.502)
print(theta, "->", theta_to_physical(theta))

# A path 0-1-2 plus an isolated vertex 3: vertex 1 is core, 0 and 2 are pendants.

g = Graph.from_edges(4, [(0, 1), (1, 2)])
for i, j in [(0, 2), (0, 3), (1, 3), (2, 3)]:
    c = classify_dyad(g, i, j)
    print(f"dyad ({i},{j}) {c.name:>3}  delta={change_score(g, i, j)}  p={conditional_tie_prob(theta, c):.3e}")

# The six class probabilities sit inside the bounds.

lo, hi = bernoulli_bounds(theta)
probs = np.array([conditional_tie_prob(theta, c) for c in DyadClass])
print(f"bounds [{lo:.3e}, {hi:.3e}]", bool(np.all((probs >= lo) & (probs <= hi))))
