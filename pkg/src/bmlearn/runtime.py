"""Labeled-example streams, the two sampling subroutines, an SQ oracle and
the memory-accounting harness for streaming learners.

A :class:`Stream` draws ``x`` uniformly from the domain of a class and labels
it with a hidden target, flipping each label independently with probability
``noise``.  Draws are generated in fixed-size chunks from a seeded numpy
generator, so the example sequence depends only on ``(seed, class, target,
noise)`` and never on how consumers slice it.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import HypothesisClass, LiteralConstraint, as_fraction, example_mask
from .errors import (
    EstimationFailure,
    InputError,
    MemoryBudgetExceeded,
    NonTermination,
)

CHUNK = 1 << 14


class LabeledExample(NamedTuple):
    x: int  # domain index
    y: int


def target_table(cls: HypothesisClass, target) -> np.ndarray:
    """Truth table of a target given as a class index or an explicit table."""
    if isinstance(target, (int, np.integer)):
        return cls.truth_table(int(target))
    table = np.asarray(target, dtype=np.uint8)
    if table.shape != (cls.domain.size,):
        raise InputError("explicit target must be a truth table over the domain")
    return table


class Stream:
    """i.i.d. uniform examples labelled by ``target``, with optional label noise.

    ``draws`` counts every example handed out and is the sample-complexity
    meter.
    """

    def __init__(self, cls: HypothesisClass, target, noise=0, seed: int = 0, chunk: int = CHUNK):
        self.cls = cls
        self.noise = as_fraction(noise)
        if not 0 <= self.noise < Fraction(1, 2):
            raise InputError("noise rate must lie in [0, 1/2)")
        self.target = target
        self.seed = seed
        self.draws = 0
        self._chunk = chunk
        self._rng = np.random.default_rng(seed)
        self._table = None
        if isinstance(target, (int, np.integer)):
            cls.check_index(int(target))
        else:
            self._table = target_table(cls, target)
        self._xs = np.zeros(0, dtype=np.int64)
        self._ys = np.zeros(0, dtype=np.uint8)
        self._pos = 0

    def _labels(self, xs):
        if self._table is not None:
            return self._table[xs]
        return self.cls.labels(int(self.target), xs).astype(np.uint8)

    def _refill(self):
        xs = self._rng.integers(0, self.cls.domain.size, self._chunk, dtype=np.int64)
        flips = self._rng.random(self._chunk) < float(self.noise)
        ys = self._labels(xs) ^ flips.astype(np.uint8)
        self._xs = np.concatenate([self._xs[self._pos:], xs])
        self._ys = np.concatenate([self._ys[self._pos:], ys])
        self._pos = 0

    def peek(self, m: int):
        """The next ``m`` examples without consuming them."""
        while self._xs.size - self._pos < m:
            self._refill()
        return self._xs[self._pos:self._pos + m], self._ys[self._pos:self._pos + m]

    def consume(self, m: int):
        self.peek(m)
        self._pos += m
        self.draws += m

    def draw(self, m: int):
        xs, ys = self.peek(m)
        xs, ys = xs.copy(), ys.copy()
        self.consume(m)
        return xs, ys

    def next(self) -> LabeledExample:
        xs, ys = self.draw(1)
        return LabeledExample(int(xs[0]), int(ys[0]))

    def draw_until(self, mask: np.ndarray, cap: Optional[int] = None) -> LabeledExample:
        """Rejection sampling: draw until ``mask[x]``; every draw is charged."""
        used = 0
        while True:
            if self._xs.size - self._pos == 0:
                self._refill()
            xs = self._xs[self._pos:]
            hits = np.flatnonzero(mask[xs])
            if hits.size:
                i = int(hits[0])
                if cap is not None and used + i + 1 > cap:
                    self.consume(cap - used)
                    raise NonTermination(f"rejection sampling exceeded {cap} draws")
                ex = LabeledExample(int(xs[i]), int(self._ys[self._pos + i]))
                self.consume(i + 1)
                return ex
            if cap is not None and used + xs.size >= cap:
                self.consume(cap - used)
                raise NonTermination(f"rejection sampling exceeded {cap} draws")
            used += xs.size
            self.consume(xs.size)


def rejection_cap(weight: Fraction, factor: int = 64) -> int:
    """Draw cap for rejection sampling: ``factor`` times the expected wait."""
    return math.ceil(factor / weight)


def sample_conditioned(stream: Stream, constraints, cap: Optional[int] = None) -> LabeledExample:
    """Draw from ``stream`` until x satisfies a conjunction of literals.

    ``constraints`` is a :class:`LiteralConstraint` or an iterable of
    ``(var, value)`` pairs.
    """
    if not isinstance(constraints, LiteralConstraint):
        constraints = LiteralConstraint(tuple(constraints))
    if not constraints.consistent:
        raise InputError("contradictory literal constraints")
    mask = constraints.mask(stream.cls.domain)
    if cap is None:
        cap = rejection_cap(constraints.weight(stream.cls.domain))
    return stream.draw_until(mask, cap)


# -- sampling subroutines ---------------------------------------------------


def _hyp_labels(cls: HypothesisClass, h, xs):
    if isinstance(h, (int, np.integer)):
        return cls.labels(cls.check_index(int(h)), xs)
    return np.asarray(h, dtype=np.uint8)[xs]


def is_close(stream: Stream, h, epsilon, k: int, noise=None) -> bool:
    """Test whether ``h`` is epsilon-close to the target using exactly k draws.

    True when the disagreement rate is at most ``2 * epsilon``.  Under label
    noise ``eta`` the observed rate is first de-biased:
    ``(rate - eta) / (1 - 2 eta)``.  ``h`` is a class index or a truth table.
    """
    if k < 1:
        raise InputError("is_close needs k >= 1")
    epsilon = as_fraction(epsilon)
    eta = stream.noise if noise is None else as_fraction(noise)
    xs, ys = stream.draw(k)
    j = int(np.count_nonzero(_hyp_labels(stream.cls, h, xs) != ys))
    return j <= k * (eta + 2 * epsilon * (1 - 2 * eta))


def estimate(stream: Stream, S, tau, k: int, alpha_min, noise=None) -> Fraction:
    """Estimate ``d(S, f)`` from at most ``ceil(2k / alpha_min)`` draws.

    Stops as soon as k examples have landed in S.  ``alpha_min`` is the
    promised lower bound on ``|S| / |X|``.
    """
    tau = as_fraction(tau)
    alpha_min = as_fraction(alpha_min)
    if k < 1:
        raise InputError("estimate needs k >= 1")
    if not 0 < tau < 1:
        raise InputError("tau must lie in (0, 1)")
    if not 0 < alpha_min <= 1:
        raise InputError("alpha_min must lie in (0, 1]")
    mask = example_mask(stream.cls, S)
    if not mask.any():
        raise InputError("S must be non-empty")
    eta = stream.noise if noise is None else as_fraction(noise)
    cap = math.ceil(2 * k / alpha_min)
    in_s = ones = 0
    drawn = 0
    while drawn < cap and in_s < k:
        m = min(cap - drawn, CHUNK)
        xs, ys = stream.peek(m)
        hit = mask[xs]
        cum = np.cumsum(hit)
        if cum.size and cum[-1] >= k - in_s:
            m = int(np.searchsorted(cum, k - in_s)) + 1
            hit = hit[:m]
        ones += int(np.count_nonzero(ys[:m][hit]))
        in_s += int(np.count_nonzero(hit))
        stream.consume(m)
        drawn += m
    if in_s == 0:
        raise EstimationFailure(f"no example of S among {drawn} draws")
    r = Fraction(ones, in_s)
    if eta:
        r = min(max((r - eta) / (1 - 2 * eta), Fraction(0)), Fraction(1))
    return r


def noise_inflation(noise) -> Fraction:
    """Sample inflation factor ``(1 - 2 eta)^-2`` for eta-noise."""
    eta = as_fraction(noise)
    return 1 / (1 - 2 * eta) ** 2


# -- statistical queries ----------------------------------------------------


@dataclass(frozen=True)
class SQQuery:
    """A statistical query: vectorised ``predicate(xs, ys) -> bool array``."""

    predicate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    tolerance: Fraction = Fraction(1, 100)


class SQOracle:
    """Answers ``E[psi(x, y)]`` within an additive tolerance.

    ``backend="exact"`` computes the expectation over uniform x and noisy y
    exactly, then adds a seeded perturbation of magnitude at most
    ``perturbation`` (itself at most the tolerance).  ``backend="sampled"``
    averages psi over ``ceil(ln(2/delta) / (2 tol^2))`` fresh draws.
    """

    def __init__(self, cls, target, tolerance, noise=0, backend="exact",
                 perturbation=0, seed=0, delta=Fraction(1, 100)):
        self.cls = cls
        self.target = target
        self.tolerance = as_fraction(tolerance)
        self.noise = as_fraction(noise)
        self.backend = backend
        self.perturbation = as_fraction(perturbation)
        self.delta = as_fraction(delta)
        if self.tolerance <= 0:
            raise InputError("SQ tolerance must be positive")
        if not 0 <= self.noise < Fraction(1, 2):
            raise InputError("noise rate must lie in [0, 1/2)")
        if backend not in ("exact", "sampled"):
            raise InputError(f"unknown SQ backend {backend!r}")
        if not 0 <= self.perturbation <= self.tolerance:
            raise InputError("perturbation must lie in [0, tolerance]")
        self.queries = 0
        self._rng = np.random.default_rng(seed)
        self._table = target_table(cls, target)
        self._stream = Stream(cls, self._table, noise, seed=seed) if backend == "sampled" else None

    def exact_expectation(self, predicate) -> Fraction:
        xs = np.arange(self.cls.domain.size)
        fx = self._table
        clean = int(np.count_nonzero(predicate(xs, fx)))
        flipped = int(np.count_nonzero(predicate(xs, 1 - fx)))
        eta = self.noise
        return ((1 - eta) * clean + eta * flipped) / self.cls.domain.size

    @property
    def samples_per_query(self) -> int:
        return math.ceil(math.log(2 / self.delta) / (2 * self.tolerance ** 2))

    def answer(self, query) -> Fraction:
        predicate = query.predicate if isinstance(query, SQQuery) else query
        self.queries += 1
        if self.backend == "exact":
            value = self.exact_expectation(predicate)
            if self.perturbation:
                u = Fraction(int(self._rng.integers(-1000, 1001)), 1000)
                value += u * self.perturbation
            return value
        xs, ys = self._stream.draw(self.samples_per_query)
        return Fraction(int(np.count_nonzero(predicate(xs, ys))), xs.size)

    # the oracle stands in for a stream in learners that accept either
    @property
    def draws(self) -> int:
        return self._stream.draws if self._stream is not None else 0


def sq_answer(config: dict, query) -> Fraction:
    """One-shot convenience: build an oracle from a config dict and answer ``query``."""
    return SQOracle(**config).answer(query)


def agreement_query(cls, h) -> Callable:
    """``psi_h(x, y) = [h(x) = y]``."""
    def psi(xs, ys):
        return _hyp_labels(cls, h, xs) == ys
    return psi


def positive_in_query(mask: np.ndarray) -> Callable:
    """``psi_S(x, y) = [x in S and y = 1]``."""
    def psi(xs, ys):
        return mask[xs] & (ys == 1)
    return psi


def is_close_sq(oracle: SQOracle, h, epsilon) -> bool:
    """Is-close with one statistical query on ``psi_h``."""
    epsilon = as_fraction(epsilon)
    eta = oracle.noise
    if oracle.tolerance > epsilon * (1 - 2 * eta):
        raise InputError("SQ tolerance too coarse for is_close_sq at this epsilon")
    answer = oracle.answer(agreement_query(oracle.cls, h))
    # E[psi_h] = (1 - eta) - (1 - 2 eta) * dist(h, f)
    dist = ((1 - eta) - answer) / (1 - 2 * eta)
    return dist <= 2 * epsilon


def estimate_sq(oracle: SQOracle, S, tau) -> Fraction:
    """Estimate with one statistical query on ``psi_S``, rescaled by |X|/|S|."""
    tau = as_fraction(tau)
    mask = example_mask(oracle.cls, S)
    s = int(mask.sum())
    if s == 0:
        raise InputError("S must be non-empty")
    size = oracle.cls.domain.size
    eta = oracle.noise
    if oracle.tolerance > tau * (1 - 2 * eta) * Fraction(s, size):
        raise InputError("SQ tolerance exceeds tau * |S| / |X|")
    answer = oracle.answer(positive_in_query(mask))
    # E[psi_S] = (|S|/|X|) * (eta + (1 - 2 eta) d(S, f))
    r = (answer * Fraction(size, s) - eta) / (1 - 2 * eta)
    return min(max(r, Fraction(0)), Fraction(1))


class Access:
    """Uniform front for learners: sample-based (stream, k) or SQ (oracle)."""

    def __init__(self, data, k: Optional[int] = None):
        self.data = data
        self.k = k
        self.sq = isinstance(data, SQOracle)
        if not self.sq and (k is None or k < 1):
            raise InputError("sample-based access needs k >= 1")

    @property
    def cls(self):
        return self.data.cls

    @property
    def draws(self) -> int:
        return self.data.draws

    @property
    def queries(self) -> int:
        return self.data.queries if self.sq else 0

    def is_close(self, h, epsilon) -> bool:
        if self.sq:
            return is_close_sq(self.data, h, epsilon)
        return is_close(self.data, h, epsilon, self.k)

    def estimate(self, S, tau, alpha_min) -> Fraction:
        if self.sq:
            return estimate_sq(self.data, S, tau)
        return estimate(self.data, S, tau, self.k, alpha_min)

    def close_scratch_bits(self) -> int:
        """Counters held while Is-close runs: loop index and mismatch count."""
        return 0 if self.sq else 2 * width(self.k)

    def estimate_scratch_bits(self, alpha_min) -> int:
        """Counters held while Estimate runs: loop index, counter_S, counter_1."""
        if self.sq:
            return 0
        cap = math.ceil(2 * self.k / as_fraction(alpha_min))
        return width(cap) + 2 * width(self.k)


# -- bit encodings ------------------------------------------------------------


def width(max_value: int) -> int:
    """Bits needed for a fixed-width field holding ``0 .. max_value``."""
    return max(1, int(max_value).bit_length())


class BitWriter:
    def __init__(self):
        self._parts: list[str] = []

    def uint(self, value: int, bits: int) -> "BitWriter":
        if value < 0 or value >= 1 << bits:
            raise ValueError(f"{value} does not fit in {bits} bits")
        self._parts.append(format(value, f"0{bits}b"))
        return self

    def flag(self, value: bool) -> "BitWriter":
        self._parts.append("1" if value else "0")
        return self

    def gamma(self, value: int) -> "BitWriter":
        """Elias gamma code of ``value + 1`` (so 0 is encodable)."""
        v = value + 1
        self._parts.append("0" * (v.bit_length() - 1) + format(v, "b"))
        return self

    def bits(self, s: str) -> "BitWriter":
        self._parts.append(s)
        return self

    def getvalue(self) -> str:
        return "".join(self._parts)


class BitReader:
    def __init__(self, bits: str):
        self._bits = bits
        self._pos = 0

    def uint(self, bits: int) -> int:
        chunk = self._bits[self._pos:self._pos + bits]
        if len(chunk) != bits:
            raise InputError("truncated state encoding")
        self._pos += bits
        return int(chunk, 2)

    def flag(self) -> bool:
        return bool(self.uint(1))

    def gamma(self) -> int:
        zeros = 0
        while self._bits[self._pos + zeros] == "0":
            zeros += 1
        self._pos += zeros
        return self.uint(zeros + 1) - 1

    def take(self, bits: int) -> str:
        chunk = self._bits[self._pos:self._pos + bits]
        self._pos += bits
        return chunk

    def done(self) -> bool:
        return self._pos == len(self._bits)


# -- streaming learners and the accountant --------------------------------------


class Done(NamedTuple):
    output: object


class StreamingLearner(ABC):
    """A learner as a state machine over an example source.

    ``advance`` performs one macro-step: it consumes zero or more examples
    and returns the next state or :class:`Done`.  Counters that change inside
    a macro-step are encoded at fixed width, so the encoding length of the
    states at macro-step boundaries bounds every intermediate state.
    """

    name = "learner"

    @abstractmethod
    def init(self): ...

    @abstractmethod
    def advance(self, state, data): ...

    @abstractmethod
    def encode(self, state) -> str: ...

    @abstractmethod
    def decode(self, bits: str): ...

    def physical_bits(self, state) -> int:
        return len(self.encode(state))


@dataclass
class MemoryReport:
    max_bits: int
    samples: int
    output: object
    steps: int
    max_physical_bits: int = 0
    queries: int = 0
    trace: list = field(default_factory=list)


def account_memory(learner: StreamingLearner, stream, step_cap: int = 1_000_000,
                   budget: Optional[int] = None, keep_trace: bool = False) -> MemoryReport:
    """Run ``learner`` to completion, recording the largest encoded state."""
    state = learner.init()
    max_bits = max_phys = 0
    trace = []
    for steps in range(step_cap + 1):
        bits = len(learner.encode(state))
        max_bits = max(max_bits, bits)
        max_phys = max(max_phys, learner.physical_bits(state))
        if keep_trace:
            trace.append(bits)
        if budget is not None and max_bits > budget:
            raise MemoryBudgetExceeded(max_bits, budget)
        state = learner.advance(state, stream)
        if isinstance(state, Done):
            return MemoryReport(
                max_bits=max_bits,
                samples=stream.draws,
                output=state.output,
                steps=steps + 1,
                max_physical_bits=max_phys,
                queries=getattr(stream, "queries", 0),
                trace=trace,
            )
    raise NonTermination(f"learner did not finish within {step_cap} steps")
