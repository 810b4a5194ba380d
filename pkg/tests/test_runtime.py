import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmlearn.classes import DecisionListClass, ThresholdClass
from bmlearn.core import GridInterval, density, distance
from bmlearn.errors import EstimationFailure, InputError, MemoryBudgetExceeded, NonTermination
from bmlearn.runtime import (
    Access,
    BitReader,
    BitWriter,
    Done,
    LabeledExample,
    SQOracle,
    SQQuery,
    Stream,
    StreamingLearner,
    account_memory,
    agreement_query,
    estimate,
    estimate_sq,
    is_close,
    is_close_sq,
    positive_in_query,
    sample_conditioned,
    sq_answer,
)


def test_stream_is_deterministic_and_slicing_free():
    c = ThresholdClass(50)
    a = Stream(c, 20, noise=Fraction(1, 10), seed=7)
    b = Stream(c, 20, noise=Fraction(1, 10), seed=7)
    xa, ya = a.draw(40000)
    parts = [b.draw(m) for m in (1, 999, 17000, 22000)]
    assert np.array_equal(xa, np.concatenate([p[0] for p in parts]))
    assert np.array_equal(ya, np.concatenate([p[1] for p in parts]))
    assert a.draws == b.draws == 40000


def test_noiseless_labels_match_target():
    c = ThresholdClass(30)
    xs, ys = Stream(c, 11, seed=1).draw(5000)
    assert np.array_equal(ys, c.labels(11, xs))


def test_noise_marginal():
    c = ThresholdClass(64)
    xs, ys = Stream(c, 32, noise=Fraction(1, 5), seed=3).draw(100_000)
    rate = np.mean(ys != c.labels(32, xs))
    assert abs(rate - 0.2) <= 0.02


def test_is_close_basics():
    c = ThresholdClass(64)
    assert is_close(Stream(c, 9, seed=0), 9, Fraction(1, 100), 50)
    with pytest.raises(InputError):
        is_close(Stream(c, 9), 9, Fraction(1, 10), 0)
    s = Stream(c, 9, seed=2)
    is_close(s, 3, Fraction(1, 10), 123)
    assert s.draws == 123


def test_is_close_rejects_far_hypotheses():
    c = ThresholdClass(64)
    h, f = 0, 32
    assert distance(c, h, f) == Fraction(1, 2)
    rejected = sum(not is_close(Stream(c, f, seed=t), h, Fraction(1, 20), 500) for t in range(100))
    assert rejected >= 99


def test_estimate_examples():
    c = ThresholdClass(64)
    S = GridInterval(Fraction(1, 64), Fraction(1, 2))
    # f = h_{33/128} labels 16 of the first 32 points
    f = 16
    assert density(c, S, [f]) == Fraction(1, 2)
    good = 0
    for t in range(100):
        r = estimate(Stream(c, f, seed=t), S, Fraction(1, 10), 200, Fraction(1, 2))
        good += abs(r - Fraction(1, 2)) < Fraction(1, 10)
    assert good >= 95
    assert estimate(Stream(c, 64, seed=0), S, Fraction(1, 10), 50, Fraction(1, 2)) == 1
    with pytest.raises(InputError):
        estimate(Stream(c, 64), [], Fraction(1, 10), 50, Fraction(1, 2))


def test_estimate_respects_its_draw_cap():
    c = ThresholdClass(64)
    for t in range(50):
        s = Stream(c, 40, seed=t)
        r = estimate(s, range(16), Fraction(1, 10), 30, Fraction(1, 4))
        assert 0 <= r <= 1
        assert s.draws <= math.ceil(2 * 30 / Fraction(1, 4))


def test_estimate_failure_when_s_never_hit():
    c = ThresholdClass(1024)
    with pytest.raises(EstimationFailure):
        # S is one point but alpha_min promises the whole domain
        estimate(Stream(c, 3, seed=0), [5], Fraction(1, 10), 1, 1)


def test_sample_conditioned():
    c = DecisionListClass(10)
    s = Stream(c, 0, seed=0)
    ex = sample_conditioned(s, [])
    assert s.draws == 1 and isinstance(ex, LabeledExample)
    s = Stream(c, 0, seed=1)
    bits = c.domain.bits
    runs = 10_000
    for _ in range(runs):
        ex = sample_conditioned(s, [(1, 1), (4, 0), (9, 1)])
        b = bits(np.array([ex.x]))[0]
        assert b[0] == 1 and b[3] == 0 and b[8] == 1
    assert abs(s.draws / runs - 8) <= 0.2 * 8
    with pytest.raises(InputError):
        sample_conditioned(Stream(c, 0), [(2, 1), (2, 0)])


def test_rejection_cap_raises():
    c = ThresholdClass(1024)
    s = Stream(c, 0, seed=0)
    mask = np.zeros(1024, dtype=bool)
    mask[0] = True
    with pytest.raises(NonTermination):
        s.draw_until(mask, cap=3)
    assert s.draws <= 3


# -- SQ ---------------------------------------------------------------------------


def test_sq_examples():
    c = ThresholdClass(64)
    assert sq_answer({"cls": c, "target": 10, "tolerance": Fraction(1, 100)},
                     SQQuery(agreement_query(c, 10))) == 1
    f = 40
    mask = np.zeros(64, dtype=bool)
    mask[10:50] = True
    o = SQOracle(c, f, Fraction(1, 100))
    assert o.answer(positive_in_query(mask)) == Fraction(int(c.truth_table(f)[mask].sum()), 64)
    h = 24
    assert distance(c, h, f) == Fraction(1, 4)
    noisy = SQOracle(c, f, Fraction(1, 100), noise=Fraction(1, 10))
    expected = Fraction(3, 4) * Fraction(9, 10) + Fraction(1, 4) * Fraction(1, 10)
    assert expected == Fraction(7, 10)
    assert noisy.answer(agreement_query(c, h)) == expected
    sampled = SQOracle(c, f, Fraction(1, 100), noise=Fraction(1, 10), backend="sampled", seed=4)
    assert abs(sampled.answer(agreement_query(c, h)) - expected) <= Fraction(1, 100)


def test_sq_perturbation_stays_within_tolerance():
    c = ThresholdClass(16)
    tol = Fraction(1, 50)
    o = SQOracle(c, 5, tol, perturbation=tol, seed=9)
    exact = o.exact_expectation(agreement_query(c, 2))
    for _ in range(200):
        assert abs(o.answer(agreement_query(c, 2)) - exact) <= tol


@pytest.mark.parametrize("n", range(1, 7))
def test_sq_subroutines_match_exact_quantities(n):
    c = ThresholdClass(n)
    subsets = [np.array([(m >> i) & 1 for i in range(n)], dtype=bool) for m in range(1, 1 << n)]
    for f in range(c.count):
        o = SQOracle(c, f, Fraction(1, 10**6))
        for h in range(c.count):
            for eps in (Fraction(1, 20), Fraction(1, 10), Fraction(1, 4)):
                before = o.queries
                assert is_close_sq(o, h, eps) == (distance(c, h, f) <= 2 * eps)
                assert o.queries == before + 1
        for S in subsets:
            before = o.queries
            assert estimate_sq(o, S, Fraction(1, 10)) == density(c, S, [f])
            assert o.queries == before + 1


def test_sq_preconditions():
    c = ThresholdClass(64)
    coarse = SQOracle(c, 3, Fraction(1, 10))
    with pytest.raises(InputError):
        is_close_sq(coarse, 3, Fraction(1, 100))
    with pytest.raises(InputError):
        estimate_sq(coarse, range(4), Fraction(1, 10))
    with pytest.raises(InputError):
        SQOracle(c, 3, Fraction(1, 10), perturbation=Fraction(1, 5))


def test_access_counts_queries_and_draws():
    c = ThresholdClass(16)
    a = Access(SQOracle(c, 3, Fraction(1, 1000)))
    a.is_close(3, Fraction(1, 10))
    a.estimate(range(8), Fraction(1, 10), Fraction(1, 2))
    assert a.queries == 2 and a.draws == 0
    b = Access(Stream(c, 3, seed=0), k=10)
    b.is_close(3, Fraction(1, 10))
    assert b.draws == 10 and b.queries == 0
    with pytest.raises(InputError):
        Access(Stream(c, 3))


# -- bit encodings ----------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["uint", "gamma", "flag"]), st.integers(0, 10**6))))
def test_bit_writer_round_trip(fields):
    w = BitWriter()
    for kind, v in fields:
        if kind == "uint":
            w.uint(v, max(1, v.bit_length()) + 2)
        elif kind == "gamma":
            w.gamma(v)
        else:
            w.flag(v % 2)
    r = BitReader(w.getvalue())
    for kind, v in fields:
        if kind == "uint":
            assert r.uint(max(1, v.bit_length()) + 2) == v
        elif kind == "gamma":
            assert r.gamma() == v
        else:
            assert r.flag() == bool(v % 2)
    assert r.done()


def test_bit_writer_rejects_overflow():
    with pytest.raises(ValueError):
        BitWriter().uint(8, 3)


# -- accounting -----------------------------------------------------------------


class Hoarder(StreamingLearner):
    """Negative control: keeps every example it sees, then outputs a majority vote."""

    name = "hoarder"

    def __init__(self, n, m):
        self.n, self.m = n, m
        self.w = max(1, (n - 1).bit_length())

    def init(self):
        return ()

    def advance(self, state, stream):
        if len(state) == self.m:
            return Done(int(np.mean([y for _, y in state]) > 0.5))
        return state + (tuple(stream.next()),)

    def encode(self, state):
        w = BitWriter().gamma(len(state))
        for x, y in state:
            w.uint(x, self.w).flag(y)
        return w.getvalue()

    def decode(self, bits):
        r = BitReader(bits)
        return tuple((r.uint(self.w), int(r.flag())) for _ in range(r.gamma()))


def test_accountant_flags_a_hoarding_learner():
    c = ThresholdClass(1024)
    budget = 2 * 11 + 8
    with pytest.raises(MemoryBudgetExceeded) as info:
        account_memory(Hoarder(1024, 200), Stream(c, 500, seed=0), budget=budget)
    assert info.value.bits > budget
    report = account_memory(Hoarder(1024, 200), Stream(c, 500, seed=0))
    assert report.max_bits > 200 * 11
    assert report.samples == 200


def test_accountant_step_cap():
    c = ThresholdClass(8)
    with pytest.raises(NonTermination):
        account_memory(Hoarder(8, 100), Stream(c, 1, seed=0), step_cap=10)
