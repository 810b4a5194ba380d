"""Decision lists over n boolean variables and a level-by-level bounded-memory learner.

Literals are signed variable numbers: ``+3`` is ``x3`` and ``-1`` is
``not x1``.  A decision list is a sequence of ``(literal, bit)`` levels plus a
default bit; its text form is ``[(+3,1),(-1,0)]:0``.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from ..core import BOOLEAN_CUBE, Domain, HypothesisClass, LiteralConstraint, as_fraction
from ..errors import InputError, LearnerFailure
from ..runtime import (
    Access,
    BitReader,
    BitWriter,
    Done,
    StreamingLearner,
    account_memory,
    width,
)


@dataclass(frozen=True)
class DecisionList:
    levels: tuple = ()
    default: int = 0

    def __post_init__(self):
        levels = tuple((int(l), int(b)) for l, b in self.levels)
        object.__setattr__(self, "levels", levels)
        seen = set()
        for lit, bit in levels:
            if lit == 0 or bit not in (0, 1):
                raise InputError(f"bad level ({lit}, {bit})")
            if abs(lit) in seen:
                raise InputError(f"variable x{abs(lit)} appears on two levels")
            seen.add(abs(lit))
        if self.default not in (0, 1):
            raise InputError("default bit must be 0 or 1")

    def evaluate(self, assignment) -> int:
        """Output bit of the first true literal, else the default."""
        for lit, bit in self.levels:
            if int(assignment[abs(lit) - 1]) == (1 if lit > 0 else 0):
                return bit
        return self.default

    def table(self, n: int) -> np.ndarray:
        domain = Domain(BOOLEAN_CUBE, n)
        return self.labels_of_bits(domain.bits(np.arange(domain.size)))

    def labels_of_bits(self, bits: np.ndarray) -> np.ndarray:
        out = np.full(bits.shape[0], self.default, dtype=np.uint8)
        decided = np.zeros(bits.shape[0], dtype=bool)
        for lit, bit in self.levels:
            col = bits[:, abs(lit) - 1].astype(bool)
            fires = (col if lit > 0 else ~col) & ~decided
            out[fires] = bit
            decided |= fires
        return out

    def __str__(self) -> str:
        body = ",".join(f"({lit:+d},{bit})" for lit, bit in self.levels)
        return f"[{body}]:{self.default}"


_LEVEL = re.compile(r"\(\s*([+-]\d+)\s*,\s*([01])\s*\)")


def parse_decision_list(text: str) -> DecisionList:
    """Parse the ``[(+3,1),(-1,0)]:0`` text form."""
    m = re.fullmatch(r"\s*\[(.*)\]\s*:\s*([01])\s*", text)
    if not m:
        raise InputError(f"malformed decision list {text!r}")
    body = m.group(1).strip()
    levels = _LEVEL.findall(body)
    rebuilt = ",".join(f"({a},{b})" for a, b in levels)
    if re.sub(r"\s+", "", body) != rebuilt.replace(" ", ""):
        raise InputError(f"malformed decision list {text!r}")
    return DecisionList(tuple((int(a), int(b)) for a, b in levels), int(m.group(2)))


class DecisionListClass(HypothesisClass):
    """Full-length decision lists: every variable used once, default = last bit.

    Index layout: ``(perm_rank * 2^n + signs) * 2^n + bits`` where the
    permutation is ranked lexicographically and bit r of ``signs``/``bits``
    belongs to level r+1, so the count is exactly ``n! * 4^n``.  Tying the
    default to the last bit keeps that count but leaves out lists whose last
    literal still matters; :func:`random_decision_list` draws those too.
    """

    def __init__(self, n: int):
        if n < 1:
            raise InputError("n must be >= 1")
        self.n = n
        self.domain = Domain(BOOLEAN_CUBE, n)
        self._cache: dict[int, DecisionList] = {}

    @property
    def count(self) -> int:
        return math.factorial(self.n) * 4 ** self.n

    def decision_list(self, index: int) -> DecisionList:
        index = self.check_index(index)
        hit = self._cache.get(index)
        if hit is not None:
            return hit
        n = self.n
        rest, bits = divmod(index, 1 << n)
        rank, signs = divmod(rest, 1 << n)
        pool = list(range(1, n + 1))
        order = []
        for r in range(n, 0, -1):
            q, rank = divmod(rank, math.factorial(r - 1))
            order.append(pool.pop(q))
        levels = []
        for r, var in enumerate(order):
            lit = var if (signs >> r) & 1 == 0 else -var
            levels.append((lit, (bits >> r) & 1))
        dl = DecisionList(tuple(levels), levels[-1][1])
        if len(self._cache) < 4096:
            self._cache[index] = dl
        return dl

    def index_of(self, dl: DecisionList) -> int:
        n = self.n
        if len(dl.levels) != n or dl.default != dl.levels[-1][1]:
            raise InputError("only full-length lists with default = last bit are class members")
        order = [abs(l) for l, _ in dl.levels]
        pool = list(range(1, n + 1))
        rank = 0
        for r, var in enumerate(order):
            q = pool.index(var)
            rank += q * math.factorial(n - 1 - r)
            pool.pop(q)
        signs = sum(1 << r for r, (l, _) in enumerate(dl.levels) if l < 0)
        bits = sum(b << r for r, (_, b) in enumerate(dl.levels))
        return (rank * (1 << n) + signs) * (1 << n) + bits

    def random_index(self, rng: np.random.Generator) -> int:
        perm = rng.permutation(self.n) + 1
        levels = [(int(v) * (1 if rng.integers(2) else -1), int(rng.integers(2))) for v in perm]
        return self.index_of(DecisionList(tuple(levels), levels[-1][1]))

    def labels(self, index, xs) -> np.ndarray:
        return self.decision_list(index).labels_of_bits(self.domain.bits(xs))

    def describe(self, index: int) -> str:
        return str(self.decision_list(index))


def random_decision_list(rng: np.random.Generator, n: int) -> DecisionList:
    """Uniform full-length list over n variables with an independent default bit."""
    perm = rng.permutation(n) + 1
    levels = tuple((int(v) * (1 if rng.integers(2) else -1), int(rng.integers(2))) for v in perm)
    return DecisionList(levels, int(rng.integers(2)))


def decision_list_functions(n: int) -> set:
    """Truth tables (as bytes) of every decision list of length at most n."""
    out = set()
    for r in range(n + 1):
        for vars_ in itertools.permutations(range(1, n + 1), r):
            for signs in itertools.product((1, -1), repeat=r):
                for bits in itertools.product((0, 1), repeat=r):
                    levels = tuple((s * v, b) for v, s, b in zip(vars_, signs, bits))
                    for default in (0, 1):
                        out.add(DecisionList(levels, default).table(n).tobytes())
    return out


def log2_count_bound(n: int) -> float:
    """``n log2 n + 2n``, the upper bound on ``log2 |H_DL;n|``."""
    return n * math.log2(n) + 2 * n if n > 1 else 2.0


# -- the learner ----------------------------------------------------------------

START, SAME, SPECIAL_CLOSE, SPECIAL_EST, CONFIRM = range(5)
PHASE_BITS = 3


def pair_id(lit: int, bit: int) -> int:
    """Pairs ``(literal, bit)`` are numbered ``4 (var-1) + 2 [negated] + bit``."""
    return 4 * (abs(lit) - 1) + 2 * (lit < 0) + bit


def pair_of(pid: int) -> tuple[int, int]:
    var, rem = divmod(pid, 4)
    neg, bit = divmod(rem, 2)
    return (-(var + 1) if neg else var + 1), bit


def literal_true(lit: int) -> tuple[int, int]:
    """The ``(var, value)`` constraint making ``lit`` true."""
    return abs(lit), 1 if lit > 0 else 0


def literal_false(lit: int) -> tuple[int, int]:
    return abs(lit), 0 if lit > 0 else 1


@dataclass(frozen=True)
class DLState:
    """Learner state.

    ``block[v]`` is 0 for an unused variable or the 1-based block (level) at
    which ``x_v`` was frozen, with literal sign ``neg[v]``; every literal of
    block ``t`` leads to ``block_bit[t-1]``.  ``pairs`` is the surviving
    ``(literal, bit)`` set of the current level as a bitmask over pair ids.
    """

    level: int
    phase: int
    block: tuple
    neg: tuple
    block_bit: tuple
    pairs: int = 0
    bit: int = 0
    cursor: int = 0

    @property
    def frozen_literals(self) -> list[int]:
        return [(-(v + 1) if self.neg[v] else v + 1) for v in range(len(self.block)) if self.block[v]]

    def constraint(self, *true_literals: int) -> LiteralConstraint:
        """Assignments reaching the current level (frozen literals false) plus extras."""
        lits = [literal_false(l) for l in self.frozen_literals]
        lits += [literal_true(l) for l in true_literals]
        return LiteralConstraint(tuple(lits))

    def pair_ids(self) -> list[int]:
        out, mask, pid = [], self.pairs, 0
        while mask:
            if mask & 1:
                out.append(pid)
            mask >>= 1
            pid += 1
        return out

    def prefix(self) -> list[tuple[int, int]]:
        levels = []
        for t in range(1, self.level):
            for v in range(len(self.block)):
                if self.block[v] == t:
                    lit = -(v + 1) if self.neg[v] else v + 1
                    levels.append((lit, self.block_bit[t - 1]))
        return levels


@dataclass
class DeletionRecord:
    level: int
    pair: tuple
    constraint: LiteralConstraint


def dl_levels(epsilon) -> int:
    return max(1, math.ceil(math.log2(1 / as_fraction(epsilon))))


def dl_call_bound(n: int, epsilon) -> int:
    """Upper bound on subroutine calls: per level at most 4n-1 same-level
    deletions, 2 for the complementary special case and 2n confirmations."""
    return (6 * n + 2) * dl_levels(epsilon)


def dl_auto_k(n: int, epsilon, failure_budget=Fraction(1, 10)) -> int:
    """k such that every Estimate (tau = eps/2) and Is-close call fails with
    probability at most ``failure_budget / dl_call_bound``."""
    eps = as_fraction(epsilon)
    delta = float(as_fraction(failure_budget)) / dl_call_bound(n, eps)
    tau = float(eps) / 2
    return math.ceil(math.log(4 / delta) / (2 * tau * tau))


class DecisionListLearner(StreamingLearner):
    """Learns a decision list level by level.

    Level ``i`` starts from every ``(literal, bit)`` pair over unused
    variables.  Conflicting pairs ``(l, 0)``/``(l', 1)`` are resolved with one
    Estimate on the assignments reaching the level where both literals hold.
    A surviving complementary pair ``(l, 0)``/``(not l, 1)`` is settled with
    Is-close on a candidate list and, failing that, one Estimate.  Survivors
    that all lead to the same bit are confirmed one Estimate each and then
    frozen together as one block: literals leading to the same bit commute,
    so their relative order is immaterial.
    """

    name = "decision-list"

    def __init__(self, n: int, epsilon, k: Optional[int] = None, record: bool = False):
        self.n = n
        self.epsilon = as_fraction(epsilon)
        if not Fraction(1, 2 ** n) < self.epsilon < 1:
            raise InputError("epsilon must lie in (2^-n, 1)")
        self.levels = dl_levels(self.epsilon)
        self.k = dl_auto_k(n, self.epsilon) if k is None else k
        self.tau = self.epsilon / 2
        self.record = record
        self.deletions: list[DeletionRecord] = []
        self.domain = Domain(BOOLEAN_CUBE, n)
        self._wl = width(self.levels + 1)
        self._wc = width(4 * n)

    # -- helpers
    def init(self) -> DLState:
        z = (0,) * self.n
        return DLState(1, START, z, z, (0,) * self.levels)

    def _unused(self, state: DLState) -> list[int]:
        return [v + 1 for v in range(self.n) if not state.block[v]]

    def _estimate(self, access: Access, state: DLState, S: LiteralConstraint) -> Fraction:
        return access.estimate(S, self.tau, S.weight(self.domain))

    def _delete(self, state: DLState, pid: int) -> DLState:
        if self.record:
            self.deletions.append(DeletionRecord(state.level, pair_of(pid), state.constraint()))
        return replace(state, pairs=state.pairs & ~(1 << pid))

    def _finish(self, state: DLState, default: Optional[int] = None) -> Done:
        prefix = state.prefix()
        if default is None:
            last = prefix[-1][1] if prefix else 0
            # the next block of the target, if any, leads to the other bit
            default = 1 - last if self._unused(state) and prefix else last
        return Done(DecisionList(tuple(prefix), default))

    def candidate(self, state: DLState, lit: int) -> DecisionList:
        """Frozen prefix, then ``not lit -> 1``, then every other unused variable -> 0."""
        levels = state.prefix() + [(-lit, 1)]
        levels += [(v, 0) for v in self._unused(state) if v != abs(lit)]
        return DecisionList(tuple(levels), 0)

    def expand_pairs(self, state: DLState) -> DLState:
        """The START transition: every pair over the unused variables."""
        pairs = 0
        for v in self._unused(state):
            for lit in (v, -v):
                for bit in (0, 1):
                    pairs |= 1 << pair_id(lit, bit)
        return replace(state, phase=SAME, pairs=pairs)

    def pending(self, state: DLState):
        """The subroutine call the next transition will make, without making it.

        ``("estimate", S)`` or ``("close", h)``; None when the transition
        makes no call.
        """
        if state.phase == START:
            if state.level > self.levels or not self._unused(state):
                return None
            state = self.expand_pairs(state)
        ids = state.pair_ids()
        if state.phase == SAME:
            zeros = [pair_of(p)[0] for p in ids if p % 2 == 0]
            ones = [pair_of(p)[0] for p in ids if p % 2 == 1]
            for l0 in zeros:
                for l1 in ones:
                    if l1 != -l0:
                        return "estimate", state.constraint(l0, l1)
            return None
        if state.phase in (SPECIAL_CLOSE, SPECIAL_EST):
            (lit, _), = [pair_of(p) for p in ids if p % 2 == 0]
            if state.phase == SPECIAL_CLOSE:
                return "close", self.candidate(state, lit)
            return "estimate", state.constraint(lit)
        if state.phase == CONFIRM:
            pending = [p for p in ids if p >= state.cursor]
            if pending:
                return "estimate", state.constraint(pair_of(pending[0])[0])
        return None

    # -- transitions
    def advance(self, state: DLState, access):
        if not isinstance(access, Access):
            access = Access(access, self.k)
        if state.phase == START:
            unused = self._unused(state)
            if state.level > self.levels or not unused:
                return self._finish(state)
            return self.expand_pairs(state)

        if state.phase == SAME:
            ids = state.pair_ids()
            zeros = [pair_of(p)[0] for p in ids if p % 2 == 0]
            ones = [pair_of(p)[0] for p in ids if p % 2 == 1]
            for l0 in zeros:
                for l1 in ones:
                    if l1 != -l0:
                        S = state.constraint(l0, l1)
                        if self._estimate(access, state, S) < self.epsilon:
                            return self._delete(state, pair_id(l1, 1))
                        return self._delete(state, pair_id(l0, 0))
            if zeros and ones:
                return replace(state, phase=SPECIAL_CLOSE)
            if not ids:
                raise LearnerFailure(f"level {state.level} lost every candidate pair")
            return replace(state, phase=CONFIRM, bit=0 if zeros else 1, cursor=0)

        if state.phase == SPECIAL_CLOSE:
            (lit, _), = [pair_of(p) for p in state.pair_ids() if p % 2 == 0]
            h = self.candidate(state, lit)
            if access.is_close(h.table(self.n), self.epsilon):
                return Done(h)
            return replace(state, phase=SPECIAL_EST)

        if state.phase == SPECIAL_EST:
            (lit, _), = [pair_of(p) for p in state.pair_ids() if p % 2 == 0]
            if self._estimate(access, state, state.constraint(lit)) < self.epsilon:
                state = self._delete(state, pair_id(-lit, 1))
                bit = 0
            else:
                state = self._delete(state, pair_id(lit, 0))
                bit = 1
            return replace(state, phase=CONFIRM, bit=bit, cursor=0)

        if state.phase == CONFIRM:
            pending = [p for p in state.pair_ids() if p >= state.cursor]
            if pending:
                pid = pending[0]
                lit, _ = pair_of(pid)
                d = self._estimate(access, state, state.constraint(lit))
                off = d if state.bit == 0 else 1 - d
                if off >= self.epsilon:
                    state = self._delete(state, pid)
                return replace(state, cursor=pid + 1)
            survivors = [pair_of(p)[0] for p in state.pair_ids()]
            if not survivors:
                raise LearnerFailure(f"level {state.level} confirmed no literal")
            if any(-l in survivors for l in survivors):
                # the target is constant on every assignment reaching this level
                return self._finish(state, default=state.bit)
            block, neg = list(state.block), list(state.neg)
            for lit in survivors:
                block[abs(lit) - 1] = state.level
                neg[abs(lit) - 1] = int(lit < 0)
            bits = list(state.block_bit)
            bits[state.level - 1] = state.bit
            return DLState(state.level + 1, START, tuple(block), tuple(neg), tuple(bits))
        raise LearnerFailure(f"unknown phase {state.phase}")

    # -- encoding
    def _scratch(self, state: DLState) -> int:
        """Width of the subroutine counters live during this phase."""
        if self.k is None:
            return 0
        if state.phase == SPECIAL_CLOSE:
            return 2 * width(self.k)
        if state.phase in (SAME, SPECIAL_EST, CONFIRM):
            # worst-case weight of S at this level: frozen literals false plus two literals true
            used = sum(1 for b in state.block if b)
            cap = math.ceil(2 * self.k * 2 ** min(self.n, used + 2))
            return width(cap) + 2 * width(self.k)
        return 0

    def encode(self, state: DLState) -> str:
        w = BitWriter().uint(state.phase, PHASE_BITS).uint(state.level, self._wl)
        for v in range(self.n):
            w.uint(state.block[v], self._wl).flag(state.neg[v])
        for b in state.block_bit:
            w.flag(b)
        w.uint(state.pairs, 4 * self.n).flag(state.bit).uint(state.cursor, self._wc)
        scratch = self._scratch(state)
        if scratch:
            w.uint(0, scratch)
        return w.getvalue()

    def decode(self, bits: str) -> DLState:
        r = BitReader(bits)
        phase = r.uint(PHASE_BITS)
        level = r.uint(self._wl)
        block, neg = [], []
        for _ in range(self.n):
            block.append(r.uint(self._wl))
            neg.append(int(r.flag()))
        block_bit = tuple(int(r.flag()) for _ in range(self.levels))
        pairs = r.uint(4 * self.n)
        bit = int(r.flag())
        cursor = r.uint(self._wc)
        return DLState(level, phase, tuple(block), tuple(neg), block_bit, pairs, bit, cursor)


def learn_decision_list(data, n: int, epsilon, k: Optional[int] = None, record: bool = False,
                        step_cap: int = 100_000):
    """Run the decision-list learner; ``data`` is a Stream or an SQOracle.

    Returns ``(report, learner)``; ``report.output`` is a :class:`DecisionList`
    and ``learner.deletions`` holds the deletion log when ``record`` is set.
    """
    learner = DecisionListLearner(n, epsilon, k, record=record)
    access = Access(data, learner.k)
    return account_memory(learner, access, step_cap=step_cap), learner


def valid_pair(target_table: np.ndarray, n: int, constraint: LiteralConstraint, lit: int, bit: int) -> bool:
    """Whether the target is constantly ``bit`` where ``constraint`` and ``lit`` hold.

    Exactly the pairs that can occupy the next level of some decision list
    agreeing with the target there.
    """
    domain = Domain(BOOLEAN_CUBE, n)
    S = LiteralConstraint(constraint.literals + (literal_true(lit),))
    mask = S.mask(domain)
    return bool(mask.any()) and bool(np.all(target_table[mask] == bit))


def enumerate_structures(n: int):
    """Every full-length list with default = last bit, by brute force over
    permutations, signs and bits (independent of the index arithmetic)."""
    for perm in itertools.permutations(range(1, n + 1)):
        for signs in itertools.product((1, -1), repeat=n):
            for bits in itertools.product((0, 1), repeat=n):
                levels = tuple((s * v, b) for v, s, b in zip(perm, signs, bits))
                yield DecisionList(levels, bits[-1])
