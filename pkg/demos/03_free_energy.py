# # Free energy as a function of the order parameter
#
# The order parameter m is the fraction of vertices outside the dense
# core. Splitting the partition function by the sparse-side size gives
# one term per value of m, and F(m) = -T log Z_m is the landscape whose
# minima are the candidate phases.

import numpy as np

from ergmphase.graph import PhysicalParams
from ergmphase.multiplicity import get_tables
from ergmphase.phase import barrier, free_energy_curve, local_minima

N, phi_c = 50, 3.373
tables = get_tables(N)

for T in (0.3, 0.69, 1.5):
    curve = free_energy_curve(PhysicalParams(T, phi_c), N, tables)
    mins = local_minima(curve)
    desc = ", ".join(f"m={mn.m:.2f} ({mn.branch}, F={mn.F:.3f})" for mn in mins)
    print(f"T={T:<5} minima: {desc}")
    if len(mins) == 2:
        print(f"         barrier above the higher well: {barrier(curve, *mins):.3f}")

# The finite part of one curve, coarsely.

curve = free_energy_curve(PhysicalParams(0.69, phi_c), N, tables)
for m, F in zip(curve.m[::5], curve.F[::5]):
    print(f"m={m:.2f}  F={F:9.3f}" if np.isfinite(F) else f"m={m:.2f}  infeasible")
