"""Separability checks and the oracles that drive the general learner.

An oracle looks at a candidate set T and answers either ``Tight(center)``
(some ball of radius epsilon holds an alpha fraction of T) or
``Separated(witness)``: an example set S and two disjoint parts T0, T1 of T
whose per-hypothesis edge counts into S sit on opposite sides of a gap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .core import (
    BOOLEAN_CUBE,
    UNIT_GRID,
    GridInterval,
    HypothesisClass,
    LiteralConstraint,
    as_fraction,
    ball,
    edge_counts,
    example_mask,
    hypothesis_indices,
    is_tight,
)
from .errors import ContractViolation, InputError

EXHAUSTIVE_CAP = 24
_BATCH = 1 << 15


@dataclass(frozen=True)
class SeparationWitness:
    S: object
    T0: object
    T1: object
    d0: Fraction
    d1: Fraction


@dataclass(frozen=True)
class Tight:
    center: object


@dataclass(frozen=True)
class Separated:
    witness: SeparationWitness


OracleResponse = Union[Tight, Separated]


@dataclass(frozen=True)
class Verdict:
    """Result of :func:`check_separability`.

    ``kind`` is ``"separable"`` (with S, T0, T1), ``"tight"`` (with center)
    or ``"counterexample"``.  ``complete`` is False when the search was
    sampled, so a counterexample only means none was found.
    """

    kind: str
    T: frozenset
    center: Optional[int] = None
    S: Optional[frozenset] = None
    T0: Optional[frozenset] = None
    T1: Optional[frozenset] = None
    complete: bool = True


def _ceil(x: Fraction) -> int:
    return math.ceil(x)


def _fraction_parts(alpha: Fraction) -> tuple[int, int]:
    return alpha.numerator, alpha.denominator


# -- validators -------------------------------------------------------------


def definition_gap_ok(cls: HypothesisClass, T, S, T0, T1, alpha) -> list[str]:
    """Problems with ``(S, T0, T1)`` as a separability witness for T (empty if valid).

    Checks inclusion, disjointness, ``|S| >= alpha |X|``,
    ``|T0|, |T1| >= alpha |T|`` and ``|d(S, T0) - d(S, T1)| >= alpha``.
    """
    alpha = as_fraction(alpha)
    T = frozenset(hypothesis_indices(cls, T).tolist())
    T0 = frozenset(hypothesis_indices(cls, T0).tolist())
    T1 = frozenset(hypothesis_indices(cls, T1).tolist())
    s = int(example_mask(cls, S).sum())
    problems = []
    if not (T0 <= T and T1 <= T):
        problems.append("T0/T1 not inside T")
    if T0 & T1:
        problems.append("T0 and T1 overlap")
    if s < alpha * cls.domain.size:
        problems.append(f"|S|={s} below alpha|X|")
    need = _ceil(alpha * len(T))
    if len(T0) < need or len(T1) < need:
        problems.append(f"|T0|={len(T0)} or |T1|={len(T1)} below {need}")
    if not problems:
        e0 = Fraction(int(edge_counts(cls, S, T0).sum()), s * len(T0))
        e1 = Fraction(int(edge_counts(cls, S, T1).sum()), s * len(T1))
        if abs(e1 - e0) < alpha:
            problems.append(f"density gap {abs(e1 - e0)} below alpha")
    return problems


def witness_problems(cls: HypothesisClass, T, w: SeparationWitness, alpha,
                     s_floor=None, size_floors: bool = True) -> list[str]:
    """Independent check of a localized witness; returns the list of violations.

    ``s_floor`` is the least admissible ``|S|`` (default ``alpha |X|``).
    Structured oracles pass a smaller floor because their S is a fraction
    of the current candidate region rather than of X.
    """
    alpha = as_fraction(alpha)
    T = frozenset(hypothesis_indices(cls, T).tolist())
    T0 = frozenset(hypothesis_indices(cls, w.T0).tolist())
    T1 = frozenset(hypothesis_indices(cls, w.T1).tolist())
    mask = example_mask(cls, w.S)
    s = int(mask.sum())
    floor_s = alpha * cls.domain.size if s_floor is None else as_fraction(s_floor)
    problems = []
    if not (T0 <= T and T1 <= T):
        problems.append("T0/T1 not inside T")
    if T0 & T1:
        problems.append("T0 and T1 overlap")
    if s == 0 or s < floor_s:
        problems.append(f"|S|={s} below floor {floor_s}")
    if size_floors:
        need = max(1, _ceil(alpha * alpha * len(T) / 2))
        if len(T0) < need or len(T1) < need:
            problems.append(f"|T0|={len(T0)} or |T1|={len(T1)} below {need}")
    if as_fraction(w.d1) - as_fraction(w.d0) < alpha / 4 * s:
        problems.append(f"gap d1-d0={w.d1 - w.d0} below alpha|S|/4")
    if T0 and int(edge_counts(cls, mask, T0).max()) > w.d0:
        problems.append("some h in T0 exceeds d0")
    if T1 and int(edge_counts(cls, mask, T1).min()) < w.d1:
        problems.append("some h in T1 falls below d1")
    return problems


def validate_witness(cls, T, w: SeparationWitness, alpha, s_floor=None, size_floors=True):
    problems = witness_problems(cls, T, w, alpha, s_floor, size_floors)
    if problems:
        raise ContractViolation("; ".join(problems))
    return w


# -- S candidates -----------------------------------------------------------


def structured_candidates(cls: HypothesisClass):
    """Example subsets shaped like the known witnesses: grid intervals by
    decreasing length (X first), or partial assignments by increasing size."""
    domain = cls.domain
    size = domain.size
    if domain.kind == UNIT_GRID:
        for length in range(size, 0, -1):
            for start in range(size - length + 1):
                m = np.zeros(size, dtype=bool)
                m[start:start + length] = True
                yield m
    elif domain.kind == BOOLEAN_CUBE:
        n = domain.n
        from itertools import combinations, product

        for r in range(n + 1):
            for vars_ in combinations(range(1, n + 1), r):
                for vals in product((1, 0), repeat=r):
                    yield LiteralConstraint(tuple(zip(vars_, vals))).mask(domain)


def _masks_from_ints(codes: np.ndarray, size: int) -> np.ndarray:
    return ((codes[:, None] >> np.arange(size)[None, :]) & 1).astype(np.int64)


def _best_split(counts: np.ndarray, need: int) -> tuple[np.ndarray, np.ndarray]:
    """Sum of the ``need`` smallest and ``need`` largest entries per row."""
    srt = np.sort(counts, axis=1)
    return srt[:, :need].sum(axis=1), srt[:, -need:].sum(axis=1)


class _Search:
    def __init__(self, cls, T_idx, alpha):
        self.cls = cls
        self.T_idx = T_idx
        self.alpha = alpha
        self.need = _ceil(alpha * T_idx.size)
        self.need_s = max(1, _ceil(alpha * cls.domain.size))
        self.rows = cls.label_matrix[T_idx].astype(np.int64)
        self.p, self.q = _fraction_parts(alpha)

    def feasible(self) -> bool:
        return self.need >= 1 and 2 * self.need <= self.T_idx.size

    def hits(self, B: np.ndarray) -> np.ndarray:
        """Rows of the 0/1 matrix B (candidate S's) that admit a witness."""
        sizes = B.sum(axis=1)
        counts = B @ self.rows.T
        low, high = _best_split(counts, self.need)
        # (high - low) / (need |S|) >= alpha
        ok = self.q * (high - low) >= self.p * self.need * sizes
        return np.flatnonzero(ok & (sizes >= self.need_s))

    def witness(self, mask: np.ndarray):
        counts = self.rows[:, mask].sum(axis=1)
        order = np.argsort(counts, kind="stable")
        T0 = frozenset(self.T_idx[order[: self.need]].tolist())
        T1 = frozenset(self.T_idx[order[-self.need:]].tolist())
        S = frozenset(np.flatnonzero(mask).tolist())
        return S, T0, T1


def check_separability(cls: HypothesisClass, T, alpha, epsilon, mode: str = "exhaustive",
                       seed: Optional[int] = None, budget: Optional[int] = None,
                       reverse: bool = False) -> Verdict:
    """Tightness test, then a search for a separability witness.

    Exhaustive mode tries every ``S`` (structured shapes first, then all
    subsets in bitmask order) and is complete.  Sampled mode tries the
    structured shapes and then ``budget`` random subsets.  ``reverse`` runs
    the exhaustive search in the opposite order; the verdict must not change.
    """
    alpha = as_fraction(alpha)
    epsilon = as_fraction(epsilon)
    T_idx = hypothesis_indices(cls, T)
    Tset = frozenset(T_idx.tolist())
    size = cls.domain.size
    if mode == "exhaustive":
        if T_idx.size > EXHAUSTIVE_CAP or size > EXHAUSTIVE_CAP:
            raise InputError(f"exhaustive mode needs |T|, |X| <= {EXHAUSTIVE_CAP}")
    elif mode == "sampled":
        if seed is None or budget is None or budget < 0:
            raise InputError("sampled mode needs a seed and a non-negative budget")
    else:
        raise InputError(f"unknown mode {mode!r}")
    center = is_tight(cls, T_idx, alpha, epsilon)
    if center is not None:
        return Verdict("tight", Tset, center=center)
    search = _Search(cls, T_idx, alpha)
    complete = mode == "exhaustive"
    if not search.feasible():
        return Verdict("counterexample", Tset, complete=True)

    def found(mask):
        S, T0, T1 = search.witness(mask)
        return Verdict("separable", Tset, S=S, T0=T0, T1=T1, complete=complete)

    structured = list(structured_candidates(cls))
    if reverse:
        structured.reverse()
    for start in range(0, len(structured), _BATCH):
        B = np.array(structured[start:start + _BATCH], dtype=np.int64)
        hit = search.hits(B)
        if hit.size:
            return found(B[hit[0]].astype(bool))

    if mode == "exhaustive":
        total = 1 << size
        starts = range(0, total, _BATCH)
        for start in (reversed(starts) if reverse else starts):
            codes = np.arange(start, min(start + _BATCH, total), dtype=np.int64)
            if reverse:
                codes = codes[::-1]
            B = _masks_from_ints(codes, size)
            hit = search.hits(B)
            if hit.size:
                return found(B[hit[0]].astype(bool))
        return Verdict("counterexample", Tset, complete=True)

    rng = np.random.default_rng(seed)
    for start in range(0, budget, _BATCH):
        m = min(_BATCH, budget - start)
        B = (rng.random((m, size)) < 0.5).astype(np.int64)
        hit = search.hits(B)
        if hit.size:
            return found(B[hit[0]].astype(bool))
    return Verdict("counterexample", Tset, complete=False)


def localize_witness(cls: HypothesisClass, S, T, alpha) -> SeparationWitness:
    """Turn a separating S into edge-count thresholds.

    Sorts T by ``e({h}, S)`` and keeps the bottom and top
    ``ceil(alpha^2 |T| / 2)`` hypotheses.
    """
    alpha = as_fraction(alpha)
    T_idx = hypothesis_indices(cls, T)
    mask = example_mask(cls, S)
    s = int(mask.sum())
    if T_idx.size == 0 or s == 0:
        raise InputError("localize_witness needs non-empty S and T")
    m = max(1, _ceil(alpha * alpha * T_idx.size / 2))
    if 2 * m > T_idx.size:
        raise ContractViolation(f"|T|={T_idx.size} too small for two disjoint parts of size {m}")
    counts = edge_counts(cls, mask, T_idx)
    order = np.argsort(counts, kind="stable")
    low, high = order[:m], order[-m:]
    d0 = Fraction(int(counts[low].max()))
    d1 = Fraction(int(counts[high].min()))
    if d1 - d0 < alpha / 4 * s:
        raise ContractViolation(f"gap {d1 - d0} below alpha|S|/4 = {alpha / 4 * s}")
    S_out = S if hasattr(S, "mask") else frozenset(np.flatnonzero(mask).tolist())
    return SeparationWitness(S_out, frozenset(T_idx[low].tolist()),
                             frozenset(T_idx[high].tolist()), d0, d1)


# -- oracles ----------------------------------------------------------------


class BruteForceOracle:
    """Answers by search on explicit candidate sets (small classes only).

    ``mode="auto"`` searches exhaustively while T and X fit the exhaustive
    cap and falls back to the sampled search above it.
    """

    name = "brute-force"

    def __init__(self, cls: HypothesisClass, alpha, epsilon, mode="auto",
                 seed: int = 0, budget: int = 4096, validate: bool = True):
        self.cls = cls
        self.alpha = as_fraction(alpha)
        self.epsilon = as_fraction(epsilon)
        self.mode = mode
        self.seed = seed
        self.budget = budget
        self.validate = validate
        self._memo: dict[frozenset, OracleResponse] = {}

    def initial(self) -> frozenset:
        return frozenset(range(self.cls.count))

    def query(self, T) -> OracleResponse:
        T = frozenset(T)
        hit = self._memo.get(T)
        if hit is not None:
            return hit
        mode = self.mode
        if mode == "auto":
            small = len(T) <= EXHAUSTIVE_CAP and self.cls.domain.size <= EXHAUSTIVE_CAP
            mode = "exhaustive" if small else "sampled"
        v = check_separability(self.cls, T, self.alpha, self.epsilon, mode,
                               seed=self.seed, budget=self.budget)
        if v.kind == "tight":
            out = Tight(v.center)
        elif v.kind == "separable":
            w = localize_witness(self.cls, v.S, T, self.alpha)
            if self.validate:
                validate_witness(self.cls, T, w, self.alpha)
            out = Separated(w)
        else:
            raise ContractViolation(f"class is not separable at this T ({sorted(T)})")
        self._memo[T] = out
        return out

    def size(self, T) -> int:
        return len(T)

    def remove_ball(self, T, center) -> frozenset:
        return frozenset(T) - ball(self.cls, center, self.epsilon)

    def remove(self, T, part) -> frozenset:
        return frozenset(T) - frozenset(part)

    def physical_bits(self, T) -> int:
        # one membership bit per hypothesis
        return self.cls.count


class ThresholdOracle:
    """Structured oracle for thresholds; T is a :class:`ThresholdInterval`."""

    name = "structured"

    def __init__(self, cls, alpha, epsilon):
        from .classes.threshold import ThresholdClass

        if not isinstance(cls, ThresholdClass):
            raise InputError("the structured threshold oracle needs a threshold class")
        self.cls = cls
        self.alpha = as_fraction(alpha)
        self.epsilon = as_fraction(epsilon)
        if self.epsilon * cls.n < 3:
            raise InputError("the structured threshold oracle needs epsilon >= 3/n")

    def initial(self):
        from .classes.threshold import full_interval

        return full_interval(self.cls)

    def query(self, T) -> OracleResponse:
        return threshold_response(self.cls, T, self.epsilon)

    def size(self, T) -> int:
        return len(T.expand(self.cls))

    def remove_ball(self, T, center):
        from .classes.threshold import ThresholdInterval

        rest = sorted(T.expand(self.cls) - ball(self.cls, center, self.epsilon))
        if not rest:
            return ThresholdInterval(T.hi + 1, T.hi)
        if rest[-1] - rest[0] + 1 != len(rest):
            raise ContractViolation("ball removal split the threshold interval")
        return ThresholdInterval(self.cls.value(rest[0]), self.cls.value(rest[-1]))

    def remove(self, T, part):
        from .classes.threshold import ThresholdInterval, _OpenAbove, _OpenBelow

        if isinstance(part, _OpenBelow):
            return ThresholdInterval(part.bound, T.hi)
        if isinstance(part, _OpenAbove):
            return ThresholdInterval(T.lo, part.bound)
        raise InputError("unexpected part descriptor")

    def physical_bits(self, T) -> int:
        return sum(v.numerator.bit_length() + v.denominator.bit_length() for v in (T.lo, T.hi))


def threshold_response(cls, T, epsilon) -> OracleResponse:
    """Tight at the midpoint when the interval is at most epsilon wide,
    else split into thirds with S the middle third."""
    from .classes.threshold import ThresholdInterval, split_interval

    if not isinstance(T, ThresholdInterval):
        raise InputError("threshold descriptor must be a ThresholdInterval")
    epsilon = as_fraction(epsilon)
    if T.hi - T.lo <= epsilon:
        return Tight(cls.nearest_index((T.lo + T.hi) / 2))
    S, T0, T1 = split_interval(T)
    s = int(S.mask(cls.domain).sum())
    return Separated(SeparationWitness(S, T0, T1, Fraction(0), Fraction(s)))


@dataclass(frozen=True)
class _Consistent:
    """Hypotheses of an explicit family passing a predicate; expands by filtering."""

    family: tuple
    predicate: object

    def expand(self, cls):
        return frozenset(h for h in self.family if self.predicate(h))


def equal_piece_response(learner, state, cls=None) -> OracleResponse:
    """The window the equal-piece learner samples next, as a witness.

    T0 holds hypotheses with no start in the window (zero edges into it);
    T1 those with a start in the window (at least one edge).  Candidate sets
    are materialised only when ``cls`` is given, for auditing small grids.
    """
    from .classes.equal_piece import EqualPieceState

    if not isinstance(state, EqualPieceState):
        raise InputError("equal-piece descriptor must be an EqualPieceState")
    jump = learner.jump(state)
    if jump > 1:
        return Tight(learner.start_values(state))
    first, stop = learner._window_range(jump)
    S = GridInterval(Fraction(first + 1, learner.n), Fraction(stop, learner.n))
    if cls is None:
        return Separated(SeparationWitness(S, None, None, Fraction(0), Fraction(1)))
    known = learner.start_values(state)
    # a start at the window's left end may sit just below the first grid point
    lo, hi = jump, Fraction(stop, learner.n)

    def agrees(h):
        starts = cls.starts(h)
        before = tuple(a for a in starts if a < jump)
        return len(before) == len(known) and all(
            k <= a < k + learner.half for a, k in zip(before, known)
        )

    family = tuple(h for h in range(cls.count) if agrees(h))
    T0 = _Consistent(family, lambda h: not any(lo <= a <= hi for a in cls.starts(h)))
    T1 = _Consistent(family, lambda h: any(lo <= a <= hi for a in cls.starts(h)))
    return Separated(SeparationWitness(S, T0, T1, Fraction(0), Fraction(1)))


def decision_list_candidates(learner, state, cls) -> frozenset:
    """Class members agreeing with the frozen prefix wherever some frozen literal holds."""
    reach = state.constraint().mask(cls.domain)
    prefix_table = _prefix_table(state, cls.n)
    M = cls.label_matrix
    ok = np.all(M[:, ~reach] == prefix_table[~reach][None, :], axis=1)
    return frozenset(np.flatnonzero(ok).tolist())


def _prefix_table(state, n):
    from .classes.decision_list import DecisionList

    return DecisionList(tuple(state.prefix()), 0).table(n)


def decision_list_response(learner, state, cls=None) -> OracleResponse:
    """The decision-list learner's next call as an oracle answer.

    An Estimate on S becomes a witness with T0 (T1) the candidates constant
    0 (1) on S; an Is-close call becomes Tight at the candidate list.
    """
    from .classes.decision_list import DLState

    if not isinstance(state, DLState):
        raise InputError("decision-list descriptor must be a DLState")
    call = learner.pending(state)
    if call is None:
        raise InputError("no subroutine call is pending in this state")
    kind, arg = call
    if kind == "close":
        return Tight(arg)
    S = arg
    if cls is None:
        s = int(S.weight(learner.domain) * learner.domain.size)
        return Separated(SeparationWitness(S, None, None, Fraction(0), Fraction(s)))
    T = decision_list_candidates(learner, state, cls)
    mask = S.mask(cls.domain)
    counts = cls.label_matrix[:, mask].sum(axis=1)
    s = int(mask.sum())
    T0 = frozenset(h for h in T if counts[h] == 0)
    T1 = frozenset(h for h in T if counts[h] == s)
    return Separated(SeparationWitness(S, T0, T1, Fraction(0), Fraction(s)))


def structured_oracle(kind: str, descriptor, alpha, epsilon, cls=None, learner=None) -> OracleResponse:
    """Dispatch on the class kind; never enumerates H unless ``cls`` is given
    for the equal-piece and decision-list audits."""
    if kind == "threshold":
        if cls is None:
            raise InputError("the threshold oracle needs the class for grid sizes")
        return threshold_response(cls, descriptor, epsilon)
    if kind == "equal-piece":
        if learner is None:
            raise InputError("the equal-piece oracle needs the learner parameters")
        return equal_piece_response(learner, descriptor, cls)
    if kind == "decision-list":
        if learner is None:
            raise InputError("the decision-list oracle needs the learner parameters")
        return decision_list_response(learner, descriptor, cls)
    raise InputError(f"unknown class kind {kind!r}")


# -- witness log ------------------------------------------------------------


def _fmt_set(s) -> str:
    return "{" + ",".join(str(i) for i in sorted(s)) + "}"


def _parse_set(text: str) -> frozenset:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise InputError(f"malformed set {text!r}")
    body = text[1:-1].strip()
    return frozenset(int(t) for t in body.split(",")) if body else frozenset()


def format_verdict(v: Verdict) -> str:
    """One log line: ``T={..} verdict=<kind> [center=h | S={..} T0={..} T1={..}]``."""
    parts = [f"T={_fmt_set(v.T)}", f"verdict={v.kind}"]
    if v.kind == "tight":
        parts.append(f"center={v.center}")
    elif v.kind == "separable":
        parts += [f"S={_fmt_set(v.S)}", f"T0={_fmt_set(v.T0)}", f"T1={_fmt_set(v.T1)}"]
    elif not v.complete:
        parts.append("(none found within budget; not a proof)")
    return " ".join(parts)


def parse_verdict(line: str) -> Verdict:
    fields = {}
    for token in line.split():
        if "=" in token:
            key, value = token.split("=", 1)
            fields[key] = value
    try:
        kind = fields["verdict"]
        T = _parse_set(fields["T"])
        if kind == "tight":
            return Verdict(kind, T, center=int(fields["center"]))
        if kind == "separable":
            return Verdict(kind, T, S=_parse_set(fields["S"]), T0=_parse_set(fields["T0"]),
                           T1=_parse_set(fields["T1"]))
        return Verdict(kind, T, complete="not a proof" not in line)
    except KeyError as exc:
        raise InputError(f"malformed verdict line {line!r}") from exc


def verdict_problems(cls, v: Verdict, alpha, epsilon) -> list[str]:
    """Re-check a verdict from scratch."""
    alpha = as_fraction(alpha)
    epsilon = as_fraction(epsilon)
    if v.kind == "tight":
        need = _ceil(alpha * len(v.T))
        inside = len(v.T & ball(cls, v.center, epsilon))
        return [] if inside >= need else [f"center covers {inside} < {need}"]
    if v.kind == "separable":
        problems = definition_gap_ok(cls, v.T, v.S, v.T0, v.T1, alpha)
        if is_tight(cls, v.T, alpha, epsilon) is not None:
            problems.append("T is tight but reported separable")
        return problems
    return []
