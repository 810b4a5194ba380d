"""Discrete thresholds on the grid ``{1/n, ..., n/n}`` and their interval learner."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..core import UNIT_GRID, Domain, GridInterval, HypothesisClass, as_fraction
from ..errors import InputError
from ..runtime import (
    BitReader,
    BitWriter,
    Done,
    LabeledExample,
    StreamingLearner,
    account_memory,
    rejection_cap,
    width,
)


class ThresholdClass(HypothesisClass):
    """``h_b(x) = [x <= b]`` for ``b in {1/(2n), 3/(2n), ..., (2n+1)/(2n)}``.

    Hypothesis index ``i`` has ``b = (2i+1)/(2n)`` and labels exactly the
    first ``i`` grid points, so ``h_0`` is all-zero and ``h_n`` all-one.
    """

    def __init__(self, n: int):
        self.n = n
        self.domain = Domain(UNIT_GRID, n)

    @property
    def count(self) -> int:
        return self.n + 1

    def value(self, index: int) -> Fraction:
        return Fraction(2 * index + 1, 2 * self.n)

    def index_of(self, b) -> int:
        i = (as_fraction(b) * 2 * self.n - 1) / 2
        if i.denominator != 1 or not 0 <= i <= self.n:
            raise InputError(f"{b} is not a threshold of the n={self.n} class")
        return int(i)

    def nearest_index(self, b) -> int:
        """Index whose threshold value is closest to ``b`` (ties go down)."""
        i = math.ceil(as_fraction(b) * self.n - Fraction(1, 2) - Fraction(1, 2))
        return min(max(i, 0), self.n)

    def labels(self, index, xs) -> np.ndarray:
        return (np.asarray(xs) < index).astype(np.uint8)

    def describe(self, index: int) -> str:
        return f"h_{self.value(index)}"

    def _build_matrix(self) -> np.ndarray:
        xs = np.arange(self.n)
        return (xs[None, :] < np.arange(self.n + 1)[:, None]).astype(np.uint8)


@dataclass(frozen=True)
class ThresholdInterval:
    """Thresholds ``h_b`` with ``lo <= b <= hi``: the only shape T takes while
    the structured threshold oracle drives the general learner."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def expand(self, cls: ThresholdClass) -> frozenset:
        return frozenset(i for i in range(cls.count) if self.lo <= cls.value(i) <= self.hi)


def full_interval(cls: ThresholdClass) -> ThresholdInterval:
    return ThresholdInterval(Fraction(0), cls.value(cls.n))


def split_interval(T: ThresholdInterval):
    """Middle-third split: ``(S, T0, T1)`` with T0 below and T1 above S."""
    third = (T.hi - T.lo) / 3
    left, right = T.lo + third, T.hi - third
    S = GridInterval(left, right)
    # T0 = {b < left}, T1 = {b > right}
    T0 = _OpenBelow(T.lo, left)
    T1 = _OpenAbove(right, T.hi)
    return S, T0, T1


@dataclass(frozen=True)
class _OpenBelow:
    lo: Fraction
    bound: Fraction

    def expand(self, cls):
        return frozenset(i for i in range(cls.count) if self.lo <= cls.value(i) < self.bound)


@dataclass(frozen=True)
class _OpenAbove:
    bound: Fraction
    hi: Fraction

    def expand(self, cls):
        return frozenset(i for i in range(cls.count) if self.bound < cls.value(i) <= self.hi)


@dataclass(frozen=True)
class ThresholdState:
    lo: int  # candidate target indices lie in lo..hi
    hi: int


class ThresholdLearner(StreamingLearner):
    """Ternary search over the candidate interval, one example per round.

    The state is the pair of grid indices ``(lo, hi)`` bracketing the
    target's index.  Each round samples one example from the middle third
    of the bracket and discards the third its label rules out.
    """

    name = "threshold"

    def __init__(self, cls: ThresholdClass, epsilon):
        self.cls = cls
        self.epsilon = as_fraction(epsilon)
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")
        self._w = width(cls.n)

    def init(self) -> ThresholdState:
        return ThresholdState(0, self.cls.n)

    def finished(self, state: ThresholdState) -> bool:
        return state.hi - state.lo <= self.epsilon * self.cls.n

    def window(self, state: ThresholdState) -> tuple[int, int, int]:
        """``(step, first, last)``: 1-based grid positions ``first..last`` form S."""
        step = max(1, (state.hi - state.lo) // 3)
        return step, state.lo + step, state.hi - step + 1

    def output(self, state: ThresholdState) -> int:
        return (state.lo + state.hi) // 2

    def step(self, state: ThresholdState, example: LabeledExample):
        """Single-example transition; examples outside S leave the state alone."""
        if self.finished(state):
            return Done(self.output(state))
        step, first, last = self.window(state)
        pos = example.x + 1
        if not first <= pos <= last:
            return state
        if example.y:
            return ThresholdState(state.lo + step, state.hi)
        return ThresholdState(state.lo, state.hi - step)

    def advance(self, state: ThresholdState, stream):
        if self.finished(state):
            return Done(self.output(state))
        _, first, last = self.window(state)
        mask = np.zeros(self.cls.n, dtype=bool)
        mask[first - 1:last] = True
        cap = rejection_cap(Fraction(last - first + 1, self.cls.n))
        return self.step(state, stream.draw_until(mask, cap))

    def encode(self, state: ThresholdState) -> str:
        return BitWriter().uint(state.lo, self._w).uint(state.hi, self._w).getvalue()

    def decode(self, bits: str) -> ThresholdState:
        r = BitReader(bits)
        return ThresholdState(r.uint(self._w), r.uint(self._w))


def learn_threshold(stream, epsilon, step_cap: int = 100_000):
    """Run the threshold learner on ``stream``; returns a MemoryReport."""
    return account_memory(ThresholdLearner(stream.cls, epsilon), stream, step_cap=step_cap)
