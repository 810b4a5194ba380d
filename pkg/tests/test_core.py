import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmlearn.classes import DecisionListClass, EqualPieceClass, ThresholdClass
from bmlearn.core import (
    BOOLEAN_CUBE,
    UNIT_GRID,
    Domain,
    GridInterval,
    LiteralConstraint,
    ball,
    density,
    distance,
    edge_count,
    is_tight,
)
from bmlearn.errors import InputError


def xs(c, *points):
    return [c.domain.index(Fraction(p)) for p in points]


def test_domains_enumerate_in_fixed_order():
    grid = Domain(UNIT_GRID, 4)
    assert grid.points() == [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)]
    cube = Domain(BOOLEAN_CUBE, 2)
    assert cube.size == 4
    assert cube.bits(np.arange(4)).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_edge_count_examples():
    c = ThresholdClass(4)
    T = [c.index_of(Fraction(3, 8)), c.index_of(Fraction(5, 8))]
    assert edge_count(c, xs(c, "1/4", "1/2"), T) == 3
    assert edge_count(c, [], T) == 0
    assert edge_count(c, range(4), [c.index_of(Fraction(9, 8))]) == 4
    with pytest.raises(InputError):
        edge_count(c, [7], T)


def test_density_examples():
    c = ThresholdClass(4)
    T = [c.index_of(Fraction(3, 8)), c.index_of(Fraction(5, 8))]
    assert density(c, xs(c, "1/4", "1/2"), T) == Fraction(3, 4)
    assert density(c, range(4), [0]) == 0
    with pytest.raises(InputError):
        density(c, [], T)
    with pytest.raises(InputError):
        density(c, [0], [])


@pytest.mark.parametrize("n", [1, 4, 9, 16])
def test_threshold_density_of_whole_domain(n):
    c = ThresholdClass(n)
    for i in range(c.count):
        b = c.value(i)
        assert density(c, range(n), [i]) == Fraction(int(b * n), n)
        assert density(c, range(n), [i]) == Fraction(int(c.truth_table(i).sum()), n)


def test_distance_examples():
    c = ThresholdClass(4)
    h = lambda b: c.index_of(Fraction(b))
    assert distance(c, h("3/8"), h("5/8")) == Fraction(1, 4)
    assert distance(c, h("5/8"), h("5/8")) == 0
    # h_{1/8} labels nothing and h_{9/8} everything
    assert distance(c, h("1/8"), h("9/8")) == 1
    # disagreement at 1/2, 3/4 and 1 only
    assert distance(c, h("3/8"), h("9/8")) == Fraction(3, 4)


def test_ball_examples():
    c = ThresholdClass(4)
    h = lambda b: c.index_of(Fraction(b))
    assert ball(c, h("5/8"), Fraction(1, 4)) == {h("3/8"), h("5/8"), h("7/8")}
    assert ball(c, 2, 0) == {2}
    assert ball(c, 2, 1) == set(range(5))


def test_is_tight_examples():
    c = ThresholdClass(4)
    assert is_tight(c, range(5), 1, Fraction(1, 2)) == c.index_of(Fraction(5, 8))
    assert is_tight(c, [3], Fraction(1, 10), 0) == 3
    c8 = ThresholdClass(8)
    T = [c8.index_of(Fraction(1, 16)), c8.index_of(Fraction(17, 16))]
    assert is_tight(c8, T, 1, Fraction(3, 10)) is None


def test_is_tight_center_may_lie_outside_t():
    c = ThresholdClass(4)
    # h_{1/8} and h_{5/8} are 2/4 apart; h_{3/8} covers both at radius 1/4
    assert is_tight(c, [0, 2], 1, Fraction(1, 4)) == 1


def small_classes():
    return [ThresholdClass(n) for n in (1, 3, 6)] + [
        DecisionListClass(2),
        EqualPieceClass(8, Fraction(1, 2)),
        EqualPieceClass(10, Fraction(1, 4)),
    ]


@pytest.mark.parametrize("cls", small_classes(), ids=lambda c: type(c).__name__)
def test_distance_is_a_pseudometric(cls):
    assert cls.count <= 64
    M = cls.label_matrix.astype(int)
    D = (M[:, None, :] != M[None, :, :]).sum(axis=2)
    assert (np.diag(D) == 0).all()
    assert (D == D.T).all()
    assert (D[:, :, None] <= D[:, None, :] + D.T[None, :, :]).all()
    for a, b in itertools.combinations(range(cls.count), 2):
        assert distance(cls, a, b) == Fraction(int(D[a, b]), cls.domain.size)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_density_is_linear_over_t(data):
    cls = data.draw(st.sampled_from(small_classes()))
    S = data.draw(st.sets(st.integers(0, cls.domain.size - 1), min_size=1))
    T = data.draw(st.sets(st.integers(0, cls.count - 1), min_size=1))
    mean = sum(density(cls, S, [h]) for h in T) / len(T)
    assert density(cls, S, T) == mean


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_is_tight_matches_a_ball_scan(data):
    cls = data.draw(st.sampled_from(small_classes()))
    T = data.draw(st.sets(st.integers(0, cls.count - 1), min_size=1))
    alpha = Fraction(data.draw(st.integers(1, 10)), 10)
    eps = Fraction(data.draw(st.integers(0, 10)), 10)
    need = -(-alpha * len(T) // 1)
    centers = [h for h in range(cls.count) if len(set(T) & ball(cls, h, eps)) >= need]
    got = is_tight(cls, T, alpha, eps)
    assert got == (centers[0] if centers else None)


def test_threshold_neighbours_differ_at_one_point():
    c = ThresholdClass(12)
    for i in range(c.count - 1):
        assert distance(c, i, i + 1) == Fraction(1, 12)
        assert density(c, range(12), [i]) <= density(c, range(12), [i + 1])


def test_descriptors_expand_to_their_explicit_sets():
    grid = Domain(UNIT_GRID, 10)
    S = GridInterval(Fraction(1, 3), Fraction(2, 3))
    assert S.expand(grid) == frozenset(i for i, x in enumerate(grid.points()) if S.lo <= x <= S.hi)
    cube = Domain(BOOLEAN_CUBE, 3)
    C = LiteralConstraint(((1, 1), (3, 0)))
    pts = cube.bits(np.arange(8))
    assert C.expand(cube) == frozenset(i for i in range(8) if pts[i][0] == 1 and pts[i][2] == 0)
    assert C.weight(cube) == Fraction(1, 4)
