# # Critical temperature and the coexistence window
#
# T_c is the highest temperature at which the landscape still has more
# than one minimum. Below it the sparse and dense wells coexist; further
# down the sparse well becomes the global minimum.

import numpy as np

from ergmphase.graph import ModelParams
from ergmphase.multiplicity import get_tables
from ergmphase.phase import critical_temperature, phase_diagram, temperature_reading_diagnostic

N, phi_c = 50, 3.373
tables = get_tables(N)

T_c = critical_temperature(phi_c, N, tables)
print(f"N={N}  phi_c={phi_c}  T_c={T_c:.5f}")

ratios = np.round(np.arange(0.60, 1.05, 0.01), 2)
d = phase_diagram(phi_c, N, ratios, tables, T_c=T_c)
print("coexistence from T/T_c =", d.coexistence_lower, f"(refined {d.coexistence_lower_refined:.4f})")
print("stable branch flips in", d.flip_interval, f"(refined {d.flip_ratio:.4f})")

for row in d.rows[::5]:
    meta = row.metastable
    extra = f"  metastable m={meta.m:.2f}" if meta else ""
    print(f"T/T_c={row.ratio:.2f}  stable m={row.stable.m:.2f}{extra}")

# A reported parameter pair read both as an absolute temperature and as a ratio.

print(temperature_reading_diagnostic(T_c, ModelParams(-1.631, -5.502), 0.95))
