"""The oracle-driven learner for any separable class.

Each iteration asks the oracle about the current candidate set T.  A tight
answer is tested with Is-close and either accepted or its ball deleted; a
separated answer is settled by one Estimate, which picks the half of the
witness to delete.  The semantic state is the removal log, one bit per
iteration, replayable against the (deterministic) oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .core import HypothesisClass, as_fraction, example_mask
from .errors import InputError, SoundnessFailure
from .oracle import Separated, Tight
from .runtime import (
    Access,
    BitReader,
    BitWriter,
    Done,
    StreamingLearner,
    account_memory,
    width,
)

QUERY, CLOSE, ESTIMATE = range(3)


def iteration_bound(class_size: int, alpha) -> int:
    """``ceil(log|H| / log(1 / (1 - alpha^2 / 2)))``, at least 1."""
    a = float(as_fraction(alpha))
    if class_size <= 1:
        return 1
    return max(1, math.ceil(math.log(class_size) / -math.log1p(-a * a / 2)))


def _failure(k: int, alpha: float, iterations: int) -> float:
    return iterations * 2 * (math.exp(-k * alpha) + math.exp(-2 * k * (alpha / 8) ** 2))


def auto_k(class_size: int, alpha, confidence) -> int:
    """Smallest k whose union bound over all iterations stays within ``1 - confidence``."""
    conf = float(as_fraction(confidence))
    if not 0 < conf < 1:
        raise InputError("confidence must lie in (0, 1)")
    a = float(as_fraction(alpha))
    if not 0 < a <= 1:
        raise InputError("alpha must lie in (0, 1]")
    s = iteration_bound(class_size, alpha)
    budget = 1 - conf
    hi = 1
    while _failure(hi, a, s) > budget:
        hi *= 2
    lo = hi // 2 + 1 if hi > 1 else 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _failure(mid, a, s) <= budget:
            hi = mid
        else:
            lo = mid + 1
    return hi


@dataclass(frozen=True)
class GeneralState:
    T: object
    log: str = ""
    phase: int = QUERY
    response: object = None


@dataclass
class GeneralReport:
    hypothesis: object
    samples: int
    queries: int
    bits_semantic: int
    bits_physical: int
    iterations: int
    iteration_bound: int


class GeneralLearner(StreamingLearner):
    name = "general"

    def __init__(self, cls: HypothesisClass, oracle, alpha, epsilon, k: int, sq: bool = False):
        self.cls = cls
        self.oracle = oracle
        self.alpha = as_fraction(alpha)
        self.epsilon = as_fraction(epsilon)
        if not 0 < self.alpha <= 1 or not 0 < self.epsilon < 1:
            raise InputError("alpha must lie in (0, 1] and epsilon in (0, 1)")
        if k < 1:
            raise InputError("k must be >= 1")
        self.k = k
        self.sq = sq
        self.bound = iteration_bound(cls.count, alpha)

    def init(self) -> GeneralState:
        return GeneralState(self.oracle.initial())

    def _alpha_min(self, w) -> Fraction:
        s = int(example_mask(self.cls, w.S).sum())
        return min(self.alpha, Fraction(s, self.cls.domain.size))

    def _query(self, state: GeneralState) -> GeneralState:
        if self.oracle.size(state.T) == 0:
            raise SoundnessFailure("candidate set became empty")
        resp = self.oracle.query(state.T)
        return replace(state, phase=CLOSE if isinstance(resp, Tight) else ESTIMATE, response=resp)

    def _apply(self, T, response, bit: str):
        if isinstance(response, Tight):
            return self.oracle.remove_ball(T, response.center)
        w = response.witness
        return self.oracle.remove(T, w.T0 if bit == "0" else w.T1)

    def advance(self, state: GeneralState, access):
        if not isinstance(access, Access):
            access = Access(access, self.k)
        if state.phase == QUERY:
            return self._query(state)
        resp = state.response
        if state.phase == CLOSE:
            if access.is_close(resp.center, self.epsilon):
                return Done(resp.center)
            bit = "0"
        else:
            w = resp.witness
            s = int(example_mask(self.cls, w.S).sum())
            tau = (w.d1 - w.d0) / (2 * s)
            r = access.estimate(w.S, tau, self._alpha_min(w))
            # ties fall to the else branch and delete T1
            bit = "0" if r * s > (w.d1 + w.d0) / 2 else "1"
        return GeneralState(self._apply(state.T, resp, bit), state.log + bit)

    # -- accounting
    def _scratch(self, state: GeneralState) -> int:
        if self.sq or state.phase == QUERY:
            return 0
        if state.phase == CLOSE:
            return 2 * width(self.k)
        cap = math.ceil(2 * self.k / self._alpha_min(state.response.witness))
        return width(cap) + 2 * width(self.k)

    def encode(self, state: GeneralState) -> str:
        w = BitWriter().uint(state.phase, 2).gamma(len(state.log)).bits(state.log)
        scratch = self._scratch(state)
        if scratch:
            w.uint(0, scratch)
        return w.getvalue()

    def decode(self, bits: str) -> GeneralState:
        r = BitReader(bits)
        phase = r.uint(2)
        log = r.take(r.gamma())
        state = GeneralState(self.oracle.initial())
        for bit in log:
            resp = self.oracle.query(state.T)
            state = GeneralState(self._apply(state.T, resp, bit), state.log + bit)
        if phase != QUERY:
            state = self._query(state)
        return state

    def physical_bits(self, state: GeneralState) -> int:
        return self.oracle.physical_bits(state.T) + self._scratch(state)


def run_general(cls: HypothesisClass, oracle, data, alpha, epsilon, k: int,
                step_cap: int = 100_000) -> GeneralReport:
    """Run the general learner on a Stream or SQOracle.

    Raises :class:`SoundnessFailure` if the target's region is deleted and
    T runs empty.
    """
    learner = GeneralLearner(cls, oracle, alpha, epsilon, k, sq=Access(data, k).sq)
    access = Access(data, k)
    report = account_memory(learner, access, step_cap=step_cap)
    iterations = (report.steps + 1) // 2
    return GeneralReport(
        hypothesis=report.output,
        samples=report.samples,
        queries=report.queries,
        bits_semantic=report.max_bits,
        bits_physical=report.max_physical_bits,
        iterations=iterations,
        iteration_bound=learner.bound,
    )
