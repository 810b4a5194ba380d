# coding: utf-8

# # The oracle-driven learner
#
# The learner keeps no examples.  It asks an oracle about the current
# candidate set, runs one test against fresh examples, and deletes part of
# the set.  The only thing it remembers is one bit per round.

from fractions import Fraction

from bmlearn.classes import ThresholdClass
from bmlearn.core import distance
from bmlearn.general import GeneralLearner, auto_k, iteration_bound, run_general
from bmlearn.oracle import BruteForceOracle, ThresholdOracle
from bmlearn.runtime import Access, Done, SQOracle, Stream

c = ThresholdClass(16)
alpha, eps = Fraction(3, 10), Fraction(1, 4)
k = auto_k(c.count, alpha, Fraction(9, 10))
print("k =", k, "round bound =", iteration_bound(c.count, alpha))

oracle = BruteForceOracle(c, alpha, eps)
rep = run_general(c, oracle, Stream(c, 11, seed=0), alpha, eps, k)
print(rep)
# Is-close accepts anything within 2 epsilon on the sample, so the answer is
# only promised to lie within 3 epsilon of the target.
print("distance to target:", distance(c, rep.hypothesis, 11), "<=", 3 * eps)

# Watch the candidate set shrink, and check that the state can be rebuilt
# from its bits alone by replaying the log against the oracle.

learner = GeneralLearner(c, oracle, alpha, eps, k)
access = Access(Stream(c, 3, seed=1), k)
state = learner.init()
while not isinstance(state, Done):
    bits = learner.encode(state)
    assert learner.decode(bits) == state
    print(f"|T|={len(state.T):2d} log={state.log!r:8} bits={bits}")
    state = learner.advance(state, access)
print("output:", state.output)

# With exact statistical queries there is no sampling error at all, and the
# target is never deleted.

ok = sum(
    distance(c, run_general(c, oracle, SQOracle(c, f, Fraction(1, 10**6)), alpha, eps, k).hypothesis, f)
    <= 3 * eps
    for f in range(c.count)
)
print(ok, "of", c.count)

# For thresholds the brute-force search can be swapped for a closed form:
# the middle third of the surviving interval.  It needs epsilon >= 3/n.

big = ThresholdClass(300)
rep = run_general(big, ThresholdOracle(big, alpha, Fraction(1, 20)), Stream(big, 123, seed=2),
                  alpha, Fraction(1, 20), 400)
print(rep.hypothesis, rep.iterations, rep.bits_semantic, rep.bits_physical)
