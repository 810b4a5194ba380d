import math
from fractions import Fraction

import numpy as np
import pytest

from bmlearn.classes import ThresholdClass
from bmlearn.core import UNIT_GRID, Domain, HypothesisClass, distance
from bmlearn.errors import InputError, SoundnessFailure
from bmlearn.general import (
    GeneralLearner,
    GeneralState,
    auto_k,
    iteration_bound,
    run_general,
)
from bmlearn.oracle import BruteForceOracle, Separated, ThresholdOracle
from bmlearn.runtime import Access, Done, SQOracle, Stream

F = Fraction


class OnePoint(HypothesisClass):
    """A class with a single hypothesis."""

    def __init__(self, n=4):
        self.domain = Domain(UNIT_GRID, n)

    @property
    def count(self):
        return 1

    def labels(self, index, xs):
        return np.zeros(len(np.atleast_1d(xs)), dtype=np.uint8)


def test_single_hypothesis_needs_one_iteration():
    c = OnePoint()
    o = BruteForceOracle(c, F(3, 10), F(1, 10))
    rep = run_general(c, o, Stream(c, 0, seed=0), F(3, 10), F(1, 10), k=50)
    assert rep.hypothesis == 0
    assert rep.iterations == 1
    assert rep.samples == 50


def test_iteration_bound_values():
    assert iteration_bound(17, F(3, 10)) == 62
    assert iteration_bound(1, F(1, 2)) == 1
    # alpha = 1 halves T each round
    assert iteration_bound(1024, 1) == 10


def test_auto_k_matches_a_direct_scan():
    def direct(size, alpha, conf):
        s = max(1, math.ceil(math.log(size) / math.log(1 / (1 - alpha**2 / 2))))
        k = 1
        while s * 2 * (math.exp(-k * alpha) + math.exp(-k * alpha**2 / 32)) > 1 - conf:
            k += 1
        return k

    assert auto_k(129, F(1, 4), F(9, 10)) == direct(129, 0.25, 0.9)
    assert auto_k(17, F(3, 10), F(9, 10)) == direct(17, 0.3, 0.9) == 2533
    assert auto_k(64, 1, F(1, 2)) == direct(64, 1.0, 0.5)


def test_auto_k_grows_with_confidence():
    ks = [auto_k(65, F(1, 5), F(c, 1000)) for c in (500, 800, 900, 990, 999)]
    assert ks == sorted(ks)
    with pytest.raises(InputError):
        auto_k(65, F(1, 5), 1)


def walk(learner, access, step_cap=10_000):
    state = learner.init()
    states = [state]
    for _ in range(step_cap):
        state = learner.advance(state, access)
        if isinstance(state, Done):
            return states, state
        states.append(state)
    raise AssertionError("no termination")


@pytest.mark.parametrize("n,f", [(30, 3), (32, 11), (64, 60)])
def test_replay_reconstructs_every_state(n, f):
    c = ThresholdClass(n)
    alpha, eps = F(3, 10), F(1, 10)
    for o in (BruteForceOracle(c, alpha, eps), ThresholdOracle(c, alpha, eps)):
        learner = GeneralLearner(c, o, alpha, eps, k=400)
        states, done = walk(learner, Access(Stream(c, f, seed=f), 400))
        for s in states:
            assert learner.decode(learner.encode(s)) == s
        assert len(states[-1].log) <= learner.bound


def test_each_round_deletes_an_alpha_squared_fraction():
    c = ThresholdClass(24)
    alpha, eps = F(3, 10), F(1, 20)
    o = BruteForceOracle(c, alpha, eps)
    learner = GeneralLearner(c, o, alpha, eps, k=1)
    for f in (0, 7, 24):
        states, _ = walk(learner, Access(SQOracle(c, f, F(1, 10**6))))
        sizes = [len(s.T) for s in states if s.response is None]
        for a, b in zip(sizes, sizes[1:]):
            assert a - b >= max(1, math.ceil(alpha * alpha * a / 2))
        assert len(sizes) <= learner.bound


@pytest.mark.parametrize("n", [6, 12, 24])
def test_exact_sq_never_fails(n):
    c = ThresholdClass(n)
    alpha, eps = F(3, 10), F(1, 10)
    o = BruteForceOracle(c, alpha, eps)
    for f in range(c.count):
        learner = GeneralLearner(c, o, alpha, eps, k=1, sq=True)
        states, done = walk(learner, Access(SQOracle(c, f, F(1, 10**6))))
        # f is never deleted
        assert all(f in s.T for s in states)
        assert distance(c, done.output, f) <= 2 * eps


def test_structured_oracle_is_a_drop_in_replacement():
    c = ThresholdClass(64)
    alpha, eps = F(3, 10), F(1, 10)
    rng = np.random.default_rng(0)
    k = auto_k(c.count, alpha, F(9, 10))
    for oracle in (BruteForceOracle(c, alpha, eps), ThresholdOracle(c, alpha, eps)):
        ok = 0
        for t in range(30):
            f = int(rng.integers(c.count))
            rep = run_general(c, oracle, Stream(c, f, seed=t), alpha, eps, k)
            ok += distance(c, rep.hypothesis, f) <= 3 * eps
            assert rep.iterations <= rep.iteration_bound
        assert ok >= 27


def test_semantic_bits_stay_within_the_log_budget():
    c = ThresholdClass(30)
    alpha, eps = F(3, 10), F(1, 10)
    o = BruteForceOracle(c, alpha, eps)
    k = 300
    rep = run_general(c, o, Stream(c, 12, seed=1), alpha, eps, k)
    bound = iteration_bound(c.count, alpha)
    gamma = 2 * bound.bit_length() + 1
    scratch = math.ceil(2 * k / F(1, 30)).bit_length() + 2 * k.bit_length()
    assert rep.bits_semantic <= 2 + gamma + bound + scratch


class Liar(SQOracle):
    """Answers 0 to every query: Is-close always fails and Estimate always says 0."""

    def answer(self, query):
        self.queries += 1
        return Fraction(0)


def test_empty_candidate_set_is_reported():
    c = ThresholdClass(12)
    alpha, eps = F(3, 10), F(1, 10)
    with pytest.raises(SoundnessFailure):
        run_general(c, BruteForceOracle(c, alpha, eps), Liar(c, 12, F(1, 10**6)), alpha, eps, k=1)


def test_learner_preconditions():
    c = ThresholdClass(8)
    o = BruteForceOracle(c, F(1, 4), F(1, 8))
    with pytest.raises(InputError):
        GeneralLearner(c, o, 0, F(1, 8), k=5)
    with pytest.raises(InputError):
        GeneralLearner(c, o, F(1, 4), F(1, 8), k=0)


def test_witness_halves_are_what_gets_deleted():
    c = ThresholdClass(20)
    alpha, eps = F(1, 4), F(1, 20)
    o = BruteForceOracle(c, alpha, eps)
    learner = GeneralLearner(c, o, alpha, eps, k=1, sq=True)
    state = learner._query(GeneralState(o.initial()))
    assert isinstance(state.response, Separated)
    w = state.response.witness
    nxt = learner.advance(state, Access(SQOracle(c, 20, F(1, 10**6))))
    # the target labels all of S, so T0 goes
    assert nxt.log == "0" and nxt.T == o.initial() - w.T0
