# # Counting graphs behind each macrostate
#
# The stratified partition function needs two families of counts: graphs
# on the sparse side that are matchings with some edges cut to the dense
# side, and graphs on the dense side with every degree at least two. Both
# are exact big integers; the cached tables store their logarithms.

from ergmphase.multiplicity import (
    brute_force_table,
    has_min_degree_two,
    is_matching,
    matching_count,
    min_degree_two_row,
    get_tables,
)

# Matchings with E edges on n vertices, closed form against enumeration.

n = 6
print("closed form ", [matching_count(E, n) for E in range(4)])
print("enumeration ", brute_force_table(n, is_matching)[:4])

# Graphs with minimum degree two, by edge count.

row = min_degree_two_row(n)
print("min degree 2", list(row))
print("enumeration ", brute_force_table(n, has_min_degree_two))

# At N = 100 the counts overflow any float, so they live in log space.
# The first call builds and caches the table (a few minutes); later calls load it.

tables = get_tables(20)
print("log C_d(E=190, n_d=20) =", tables.cd(190, 20).log, " (only the complete graph)")
c = tables.cd(30, 20)
print(f"log C_d(E=30, n_d=20)  = {c.log:.3f}, about {float(c):.4e} graphs")
