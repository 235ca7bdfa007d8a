"""Tour of the code constructions: what a spec holds and how rows are indexed.

Run with: python3 demos/01_code_tour.py
"""

import numpy as np

from coopmds import FieldSpec, concat, make_code, universal_code

# A fixed-subset code: n=5 nodes, k=2 data nodes, tuned to repair the first
# h=2 nodes from any d=3 helpers.  Sub-packetization stays tiny (l = 3).
spec = make_code("fixed_subset", 5, 2, 2, 3, FieldSpec("prime", 7))
p = spec.params
print(f"fixed-subset spec: n={p.n} k={p.k} h={p.h} d={p.d} s={p.s} l={p.l}")
print("rows of A (each node masked by its own digit):", [tuple(map(int, a)) for a in spec.A])
print("lambda table (one row per node, masked nodes use s columns):")
print(spec.lam)
print("coefficient matrix (the lambda multiplying node i in parity row a):")
print(spec.coeff_matrix())
print()

# The same parameters in the any-subset family: every node carries a digit
# block for every h-subset, so l grows to |A|^C(n,h) but ANY h nodes can be
# repaired, not just the first h.
any_spec = make_code("any_subset", 5, 2, 2, 3, FieldSpec("prime", 11))
print(f"any-subset spec: l = {any_spec.params.l} (3^10), field GF(11)")
print("admissible (h, d) pairs:", any_spec.admissible_pairs())
row = 59048  # the last row; its mask differs per node
print(f"mask of row {row} per node:", any_spec.mask_columns(np.array([row]))[0])
print()

# Concatenation multiplies sub-packetizations and unions repair abilities.
# The universal code for (n=4, k=1) handles every admissible (h, d) at once.
uni = universal_code(4, 1)
print(f"universal spec: l = {uni.params.l} = 16 * 81 * 729, field GF({uni.field.order})")
print("pairs it repairs optimally:", uni.admissible_pairs())
print("component sub-packetizations:", [c.params.l for c in uni.components])

# Concatenations can also be built by hand from any-subset factors.
custom = concat(
    [make_code("any_subset", 4, 1, 1, 2, FieldSpec("prime", 13)),
     make_code("any_subset", 4, 1, 2, 2, FieldSpec("prime", 13))]
)
print("custom concat pairs:", custom.admissible_pairs(), "l =", custom.params.l)
