# # Which dyads drive the sparse-to-dense transition
#
# Chains start from the empty graph and stop once the graph is dense.
# Every formation event is tagged with the class of its dyad and the
# order parameter at the time; rates per m-bin are Jeffreys posterior
# means of formed / exposed.

import numpy as np

from ergmphase.graph import DyadClass, DyadGroup, PhysicalParams
from ergmphase.mcmc import capture_transition_trajectories, tabulate_event_rates
from ergmphase.multiplicity import get_tables
from ergmphase.phase import critical_temperature

N, phi_c = 50, 3.373
T_c = critical_temperature(phi_c, N, get_tables(N))
res = capture_transition_trajectories(PhysicalParams(0.9 * T_c, phi_c), N, 20, step_cap=10_000_000, seed=3)
print(f"{len(res.trajectories)} transitions from {res.attempts} attempts")

tally = tabulate_event_rates(res.trajectories)
pop = tally.populated
for group in DyadGroup:
    rates = tally.rate(group)[pop]
    print(f"{group.name:<10} median rate {np.median(rates):.2e}")

print("I-C formation overtakes I-I below m =", tally.overtaking_m(DyadClass.IC, DyadClass.II))
