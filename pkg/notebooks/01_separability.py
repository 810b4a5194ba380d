# coding: utf-8

# # Separability of a small threshold class
#
# A hypothesis class is drawn as a bipartite graph: hypotheses on one side,
# domain points on the other, an edge wherever h(x) = 1.  Learning with little
# memory works when every set of candidates T is either clustered around one
# hypothesis (tight) or can be split by some set of points S into a low half
# and a high half.

from fractions import Fraction

from bmlearn.classes import ThresholdClass
from bmlearn.core import density, is_tight
from bmlearn.oracle import check_separability, format_verdict, localize_witness

c = ThresholdClass(6)
for h in range(c.count):
    print(c.describe(h), "".join(map(str, c.truth_table(h))))

# The whole class is not tight at a small radius, so the search returns a
# witness.  The first S it tries is the whole domain.

alpha, eps = Fraction(3, 10), Fraction(1, 10)
T = [0, 1, 5, 6]
print(is_tight(c, T, alpha, eps))
v = check_separability(c, T, alpha, eps)
print(format_verdict(v))
print("gap:", density(c, v.S, v.T1) - density(c, v.S, v.T0))

# Every subset of this class passes at alpha = 0.3.  With radius 0.3 every
# set is already tight; shrink the radius and witnesses take over.

from itertools import combinations

for radius in (alpha, eps):
    kinds = {}
    for r in range(1, c.count + 1):
        for T in combinations(range(c.count), r):
            k = check_separability(c, T, alpha, radius).kind
            kinds[k] = kinds.get(k, 0) + 1
    print(radius, kinds)

# Above one third the guarantee lapses and a counterexample turns up.

print(format_verdict(check_separability(c, [0, 1, 2], Fraction(34, 100), Fraction(1, 20))))

# The learner needs the witness in a sharper form: two thresholds d0 < d1 on
# edge counts, with every member of T0 at most d0 and every member of T1 at
# least d1.

w = localize_witness(c, range(6), range(7), alpha)
print(sorted(w.T0), sorted(w.T1), w.d0, w.d1)
