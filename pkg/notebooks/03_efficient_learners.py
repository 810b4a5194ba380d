# coding: utf-8

# # Learners with a fixed small state
#
# Each class below has a learner whose state is a handful of counters, and
# the accountant measures the longest state encoding seen during a run.

from fractions import Fraction

import numpy as np

from bmlearn.classes import DecisionListClass, ThresholdClass, learn_decision_list, learn_threshold
from bmlearn.classes.decision_list import dl_auto_k, random_decision_list
from bmlearn.classes.equal_piece import EqualPieceClass, learn_equal_piece, piece_table
from bmlearn.core import disagreement, distance
from bmlearn.runtime import Stream

# Thresholds: keep a bracket, sample inside its middle third, cut a third.

c = ThresholdClass(1024)
rep = learn_threshold(Stream(c, 512, seed=0), Fraction(1, 20))
print(rep.output, distance(c, rep.output, 512), rep.samples, rep.max_bits)

# Unions of pieces of length p: slide a narrow window left to right, one
# example per window.  The default window is tiny, so pass a wider one.

n, p = 4096, Fraction(1, 4)
ep = EqualPieceClass(n, p)
target = piece_table(n, p, [Fraction(300, n), Fraction(2500, n)])
rep = learn_equal_piece(Stream(ep, target, seed=1), p, Fraction(1, 5), alpha=Fraction(1, 1024))
print([str(a) for a in rep.output], disagreement(piece_table(n, p, rep.output), target), rep.max_bits)

# Decision lists: decide the levels one at a time, settling conflicts
# between candidate (literal, bit) pairs with one estimate each.

rng = np.random.default_rng(3)
for m in (4, 6, 8):
    dl = random_decision_list(rng, m)
    rep, _ = learn_decision_list(Stream(DecisionListClass(m), dl.table(m), seed=m), m, Fraction(1, 10),
                                 dl_auto_k(m, Fraction(1, 10)))
    print(m, dl, "->", rep.output, disagreement(rep.output.table(m), dl.table(m)), rep.max_bits)
