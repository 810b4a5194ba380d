"""Hypothesis classes viewed as bipartite graphs.

Hypotheses sit on one side of the graph and domain points on the other; an
edge ``(h, x)`` is present iff ``h(x) == 1``.  Every quantity here (edge
counts, densities, distances, balls, tightness) is computed exactly: counts
are integers and ratios are :class:`fractions.Fraction`.

Example subsets ``S`` are given either as an iterable of domain indices or as
a descriptor with a ``mask(domain)`` method (:class:`GridInterval`,
:class:`LiteralConstraint`).  Hypothesis subsets ``T`` are an iterable of
hypothesis indices or a descriptor with an ``expand(cls)`` method.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from .errors import InputError

UNIT_GRID = "unit-grid"
BOOLEAN_CUBE = "boolean-cube"

# label matrices above this many cells are refused (brute force only)
MATRIX_CELL_CAP = 1 << 25


def as_fraction(value) -> Fraction:
    """Convert ints, Fractions, decimal strings and floats to an exact Fraction.

    Floats go through ``str`` so that ``0.05`` becomes ``1/20`` rather than
    its binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(str(float(value)))


@dataclass(frozen=True)
class Domain:
    """Finite domain: the grid ``{1/n, ..., n/n}`` or the cube ``{0,1}^n``.

    Points are addressed by index ``0 .. size-1``.  Grid index ``i`` is the
    value ``(i+1)/n``; cube index ``i`` is the bit vector whose first
    coordinate is the most significant bit, so index order is lexicographic.
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in (UNIT_GRID, BOOLEAN_CUBE):
            raise InputError(f"unknown domain kind {self.kind!r}")
        if self.n < 1:
            raise InputError("domain parameter n must be >= 1")

    @property
    def size(self) -> int:
        return self.n if self.kind == UNIT_GRID else 1 << self.n

    def point(self, index: int):
        if not 0 <= index < self.size:
            raise InputError(f"domain index {index} out of range")
        if self.kind == UNIT_GRID:
            return Fraction(index + 1, self.n)
        return tuple((index >> (self.n - 1 - r)) & 1 for r in range(self.n))

    def index(self, x) -> int:
        if self.kind == UNIT_GRID:
            i = Fraction(x) * self.n - 1
            if i.denominator != 1 or not 0 <= i < self.n:
                raise InputError(f"{x} is not a grid point")
            return int(i)
        if len(x) != self.n or any(b not in (0, 1) for b in x):
            raise InputError(f"{x} is not a point of the {self.n}-cube")
        return int("".join(str(int(b)) for b in x), 2)

    def points(self) -> list:
        return [self.point(i) for i in range(self.size)]

    def bits(self, idx) -> np.ndarray:
        """Bit matrix (len(idx), n) for cube indices; column r is variable r+1."""
        idx = np.asarray(idx, dtype=np.int64)
        shifts = np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


@dataclass(frozen=True)
class GridInterval:
    """Closed interval ``[lo, hi]`` of the unit grid (endpoints need not be grid points)."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))

    def index_range(self, domain: Domain) -> tuple[int, int]:
        """Half-open range ``[first, stop)`` of grid indices inside the interval."""
        n = domain.n
        # x = (i+1)/n in [lo, hi]  <=>  lo*n - 1 <= i <= hi*n - 1
        first = max(0, math.ceil(self.lo * n) - 1)
        stop = min(n, math.floor(self.hi * n))
        return first, max(first, stop)

    def mask(self, domain: Domain) -> np.ndarray:
        if domain.kind != UNIT_GRID:
            raise InputError("GridInterval needs a unit-grid domain")
        m = np.zeros(domain.size, dtype=bool)
        first, stop = self.index_range(domain)
        m[first:stop] = True
        return m

    def expand(self, domain: Domain) -> frozenset:
        first, stop = self.index_range(domain)
        return frozenset(range(first, stop))


@dataclass(frozen=True)
class LiteralConstraint:
    """Cube points satisfying a conjunction of literals.

    ``literals`` holds ``(var, value)`` pairs, ``var`` 1-based, meaning
    ``x_var == value``.
    """

    literals: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self, "literals", tuple(sorted({(int(v), int(b)) for v, b in self.literals}))
        )

    @property
    def consistent(self) -> bool:
        vars_ = [v for v, _ in self.literals]
        return len(vars_) == len(set(vars_))

    def weight(self, domain: Domain) -> Fraction:
        if not self.consistent:
            return Fraction(0)
        return Fraction(1, 1 << len(self.literals))

    def mask(self, domain: Domain) -> np.ndarray:
        if domain.kind != BOOLEAN_CUBE:
            raise InputError("LiteralConstraint needs a boolean-cube domain")
        for v, _ in self.literals:
            if not 1 <= v <= domain.n:
                raise InputError(f"variable x{v} outside 1..{domain.n}")
        if not self.consistent:
            return np.zeros(domain.size, dtype=bool)
        idx = np.arange(domain.size, dtype=np.int64)
        m = np.ones(domain.size, dtype=bool)
        for v, b in self.literals:
            m &= ((idx >> (domain.n - v)) & 1) == b
        return m

    def expand(self, domain: Domain) -> frozenset:
        return frozenset(np.flatnonzero(self.mask(domain)).tolist())


@dataclass(frozen=True)
class IndexRange:
    """Hypotheses with index in ``lo..hi`` (inclusive); empty when ``lo > hi``."""

    lo: int
    hi: int

    def expand(self, cls: "HypothesisClass") -> frozenset:
        lo, hi = max(self.lo, 0), min(self.hi, cls.count - 1)
        return frozenset(range(lo, hi + 1))


class HypothesisClass(ABC):
    """A finite family ``h: X -> {0,1}`` addressed by integer index."""

    domain: Domain

    @property
    @abstractmethod
    def count(self) -> int:
        """Number of hypotheses |H|."""

    @abstractmethod
    def labels(self, index: int, xs) -> np.ndarray:
        """Labels of hypothesis ``index`` at the domain indices ``xs`` (uint8)."""

    def describe(self, index: int) -> str:
        return f"h[{index}]"

    def __len__(self) -> int:
        return self.count

    def check_index(self, index) -> int:
        if not isinstance(index, (int, np.integer)) or not 0 <= index < self.count:
            raise InputError(f"hypothesis index {index!r} out of range 0..{self.count - 1}")
        return int(index)

    def evaluate(self, index: int, x) -> int:
        index = self.check_index(index)
        xi = self.domain.index(x)
        return int(self.labels(index, np.array([xi]))[0])

    def truth_table(self, index: int) -> np.ndarray:
        return self.labels(self.check_index(index), np.arange(self.domain.size))

    @cached_property
    def label_matrix(self) -> np.ndarray:
        """Dense ``|H| x |X|`` adjacency matrix of the hypotheses graph."""
        if self.count * self.domain.size > MATRIX_CELL_CAP:
            raise InputError(
                f"class too large for brute force ({self.count} x {self.domain.size})"
            )
        return self._build_matrix()

    def _build_matrix(self) -> np.ndarray:
        xs = np.arange(self.domain.size)
        return np.stack([self.labels(h, xs) for h in range(self.count)]).astype(np.uint8)


# -- subset normalisation ---------------------------------------------------


def example_mask(cls: HypothesisClass, S) -> np.ndarray:
    """Boolean mask over the domain for an explicit or descriptor subset."""
    if hasattr(S, "mask"):
        return S.mask(cls.domain)
    if isinstance(S, np.ndarray) and S.dtype == bool:
        if S.shape != (cls.domain.size,):
            raise InputError("boolean example mask has the wrong length")
        return S
    m = np.zeros(cls.domain.size, dtype=bool)
    idx = list(S)
    if idx:
        arr = np.asarray(idx, dtype=np.int64)
        if arr.min() < 0 or arr.max() >= cls.domain.size:
            raise InputError("example index out of range")
        m[arr] = True
    return m


def hypothesis_indices(cls: HypothesisClass, T) -> np.ndarray:
    """Sorted array of hypothesis indices for an explicit or descriptor subset."""
    if hasattr(T, "expand"):
        T = T.expand(cls)
    arr = np.asarray(sorted(set(int(t) for t in T)), dtype=np.int64)
    if arr.size and (arr[0] < 0 or arr[-1] >= cls.count):
        raise InputError("hypothesis index out of range")
    return arr


def _rows(cls: HypothesisClass, T_idx: np.ndarray) -> np.ndarray:
    try:
        return cls.label_matrix[T_idx]
    except InputError:
        xs = np.arange(cls.domain.size)
        return np.stack([cls.labels(int(h), xs) for h in T_idx]) if T_idx.size else (
            np.zeros((0, cls.domain.size), dtype=np.uint8)
        )


# -- graph quantities -------------------------------------------------------


def edge_counts(cls: HypothesisClass, S, T) -> np.ndarray:
    """Per-hypothesis ``e({h}, S)`` for each h in T (sorted index order)."""
    mask = example_mask(cls, S)
    T_idx = hypothesis_indices(cls, T)
    if T_idx.size == 0:
        return np.zeros(0, dtype=np.int64)
    return _rows(cls, T_idx)[:, mask].sum(axis=1, dtype=np.int64)


def edge_count(cls: HypothesisClass, S, T) -> int:
    """Number of edges ``(x, h)`` with x in S, h in T and h(x) = 1."""
    return int(edge_counts(cls, S, T).sum())


def density(cls: HypothesisClass, S, T) -> Fraction:
    """``e(S, T) / (|S| |T|)`` as an exact fraction."""
    s = int(example_mask(cls, S).sum())
    t = hypothesis_indices(cls, T).size
    if s == 0 or t == 0:
        raise InputError("density needs non-empty S and T")
    return Fraction(edge_count(cls, S, T), s * t)


def disagreement(a: np.ndarray, b: np.ndarray) -> Fraction:
    """Fraction of positions where two truth tables differ."""
    a = np.asarray(a)
    b = np.asarray(b)
    return Fraction(int(np.count_nonzero(a != b)), a.size)


def distance(cls: HypothesisClass, h1: int, h2: int) -> Fraction:
    """Probability under the uniform distribution that h1 and h2 disagree."""
    return disagreement(cls.truth_table(h1), cls.truth_table(h2))


def _within(count: np.ndarray, epsilon: Fraction, size: int) -> np.ndarray:
    # count / size <= epsilon  <=>  count <= floor(epsilon * size)
    return count <= math.floor(epsilon * size)


def ball(cls: HypothesisClass, center: int, epsilon) -> frozenset:
    """All hypotheses epsilon-close to ``center`` (always includes it)."""
    epsilon = as_fraction(epsilon)
    if not 0 <= epsilon <= 1:
        raise InputError("epsilon must lie in [0, 1]")
    row = cls.truth_table(center)
    M = cls.label_matrix
    counts = (M != row[None, :]).sum(axis=1)
    return frozenset(np.flatnonzero(_within(counts, epsilon, cls.domain.size)).tolist())


def pairwise_disagreements(cls: HypothesisClass, T_idx: np.ndarray) -> np.ndarray:
    """``|H| x |T|`` matrix of disagreement counts between every h and every t."""
    M = cls.label_matrix.astype(np.int64)
    MT = M[T_idx]
    return M @ (1 - MT).T + (1 - M) @ MT.T


def is_tight(cls: HypothesisClass, T, alpha, epsilon) -> Optional[int]:
    """Lowest-index center h in H with ``|T ∩ B_h(eps)| >= alpha |T|``, else None.

    The center ranges over the whole class, not just T.
    """
    alpha = as_fraction(alpha)
    epsilon = as_fraction(epsilon)
    if not 0 < alpha <= 1:
        raise InputError("alpha must lie in (0, 1]")
    if not 0 <= epsilon <= 1:
        raise InputError("epsilon must lie in [0, 1]")
    T_idx = hypothesis_indices(cls, T)
    if T_idx.size == 0:
        raise InputError("T must be non-empty")
    need = math.ceil(alpha * T_idx.size)
    covered = _within(pairwise_disagreements(cls, T_idx), epsilon, cls.domain.size).sum(axis=1)
    hits = np.flatnonzero(covered >= need)
    return int(hits[0]) if hits.size else None


def enumerate_subsets(items: Iterable[int]):
    """All subsets of ``items`` as tuples, in bitmask order (empty set first)."""
    items = list(items)
    for mask in range(1 << len(items)):
        yield tuple(items[i] for i in range(len(items)) if mask >> i & 1)
