"""Unions of disjoint, equal-length pieces on the unit grid.

A hypothesis is a tuple of start points ``a_1 < ... < a_k`` (possibly empty)
with ``a_i + p < a_{i+1}`` and ``a_k + p < 1``; it labels ``x`` with 1 iff
``x`` lies in some closed piece ``[a_i, a_i + p]``.  Start points live on the
grid ``{0, 1/n, ..., (n-1)/n}`` so the class is finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from ..core import UNIT_GRID, Domain, HypothesisClass, as_fraction
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

ENUMERATION_CAP = 1 << 20


def piece_table(n: int, p, starts) -> np.ndarray:
    """Truth table over the n-grid of the union of pieces ``[a, a + p]``."""
    p = as_fraction(p)
    table = np.zeros(n, dtype=np.uint8)
    for a in starts:
        a = as_fraction(a)
        # x = (j+1)/n in [a, a+p]
        first = max(0, math.ceil(a * n) - 1)
        stop = min(n, math.floor((a + p) * n))
        table[first:stop] = 1
    return table


class EqualPieceClass(HypothesisClass):
    def __init__(self, n: int, p):
        self.n = n
        self.p = as_fraction(p)
        if not 0 < self.p < 1:
            raise InputError("piece length p must lie in (0, 1)")
        self.domain = Domain(UNIT_GRID, n)

    def _max_start(self) -> int:
        # largest s with s/n + p < 1
        return math.ceil((1 - self.p) * self.n) - 1

    def _next_free(self, s: int) -> int:
        # smallest s' with s/n + p < s'/n
        return math.floor(s + self.p * self.n) + 1

    @cached_property
    def count(self) -> int:
        top = self._max_start()
        # tails[lo] = number of valid start tuples whose first start is >= lo
        tails = [1] * (top + 2)
        for lo in range(top, -1, -1):
            nxt = self._next_free(lo)
            tails[lo] = tails[lo + 1] + (tails[nxt] if nxt <= top else 1)
        return tails[0]

    @cached_property
    def hypotheses(self) -> list[tuple[int, ...]]:
        """Start tuples (as grid numerators) in lexicographic order, empty first."""
        if self.count > ENUMERATION_CAP:
            raise InputError(f"equal-piece class too large to enumerate ({self.count})")
        top = self._max_start()
        out: list[tuple[int, ...]] = []

        def walk(prefix, lo):
            out.append(prefix)
            for s in range(lo, top + 1):
                walk(prefix + (s,), self._next_free(s))

        walk((), 0)
        return out

    def starts(self, index: int) -> tuple[Fraction, ...]:
        return tuple(Fraction(s, self.n) for s in self.hypotheses[self.check_index(index)])

    def index_of(self, starts) -> int:
        key = tuple(int(as_fraction(a) * self.n) for a in starts)
        try:
            return self.hypotheses.index(key)
        except ValueError:
            raise InputError(f"{starts} is not a hypothesis of this class") from None

    def labels(self, index, xs) -> np.ndarray:
        return piece_table(self.n, self.p, self.starts(index))[np.asarray(xs)]

    def describe(self, index: int) -> str:
        return "{" + ", ".join(f"[{a}, {a + self.p}]" for a in self.starts(index)) + "}"


def default_alpha(p, epsilon) -> Fraction:
    return as_fraction(p) ** 2 * as_fraction(epsilon) / 48


@dataclass(frozen=True)
class EqualPieceState:
    window: int  # number of windows already processed
    starts: tuple[int, ...]  # window index at which each start was recorded


class EqualPieceLearner(StreamingLearner):
    """Slide a window of width alpha/2 across [0, 1]; one example per window.

    A positive label records the window's left end as a start point and
    jumps ahead by a full piece length.
    """

    name = "equal-piece"

    def __init__(self, n: int, p, epsilon, alpha=None):
        self.n = n
        self.p = as_fraction(p)
        self.epsilon = as_fraction(epsilon)
        self.alpha = default_alpha(p, epsilon) if alpha is None else as_fraction(alpha)
        if not 0 < self.p < 1:
            raise InputError("piece length p must lie in (0, 1)")
        if self.alpha <= Fraction(2, n):
            raise InputError(
                f"alpha={self.alpha} must exceed 2/|X| = {Fraction(2, n)}; "
                "pass a larger alpha or a finer grid"
            )
        self.half = self.alpha / 2
        self.max_windows = math.floor(1 / self.half) + 1
        self._w = width(self.max_windows)
        self.domain = Domain(UNIT_GRID, n)

    def jump(self, state: EqualPieceState) -> Fraction:
        return state.window * self.half + len(state.starts) * self.p

    def start_values(self, state: EqualPieceState) -> tuple[Fraction, ...]:
        return tuple(w * self.half + i * self.p for i, w in enumerate(state.starts))

    def init(self) -> EqualPieceState:
        return EqualPieceState(0, ())

    def _window_range(self, jump: Fraction) -> tuple[int, int]:
        first = max(0, math.ceil(jump * self.n) - 1)
        stop = min(self.n, math.floor((jump + self.half) * self.n))
        return first, stop

    def step(self, state: EqualPieceState, example: LabeledExample):
        jump = self.jump(state)
        if jump > 1:
            return Done(self.start_values(state))
        first, stop = self._window_range(jump)
        if not first <= example.x < stop:
            return state
        starts = state.starts + ((state.window,) if example.y else ())
        return EqualPieceState(state.window + 1, starts)

    def advance(self, state: EqualPieceState, stream):
        jump = self.jump(state)
        if jump > 1:
            return Done(self.start_values(state))
        first, stop = self._window_range(jump)
        mask = np.zeros(self.n, dtype=bool)
        mask[first:stop] = True
        cap = rejection_cap(Fraction(stop - first, self.n))
        return self.step(state, stream.draw_until(mask, cap))

    def encode(self, state: EqualPieceState) -> str:
        w = BitWriter().uint(state.window, self._w).gamma(len(state.starts))
        for s in state.starts:
            w.uint(s, self._w)
        return w.getvalue()

    def decode(self, bits: str) -> EqualPieceState:
        r = BitReader(bits)
        window = r.uint(self._w)
        count = r.gamma()
        return EqualPieceState(window, tuple(r.uint(self._w) for _ in range(count)))


def learn_equal_piece(stream, p, epsilon, alpha=None, step_cap: int = 10_000_000):
    """Run the sliding-window learner; ``report.output`` is the tuple of starts."""
    learner = EqualPieceLearner(stream.cls.domain.n, p, epsilon, alpha)
    return account_memory(learner, stream, step_cap=step_cap)
