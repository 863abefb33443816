import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_facets, brute_lp_max
from pioco.behavior import CapExceeded
from pioco.convex import (
    DimensionError,
    Facet,
    HRep,
    Polytope,
    contains,
    hrep,
    hull_member,
    lp,
)

F = Fraction


def test_lp_examples():
    res = lp((1, 1), ub=[Facet((1, 1), 1)], bounds=[(0, None), (0, None)])
    assert res.status == "optimal" and res.value == 1
    assert lp((1,), ub=[Facet((1,), 1), Facet((-1,), -2)]).status == "infeasible"
    assert lp((1,), bounds=[(0, None)]).status == "unbounded"


def test_lp_equalities_bounds_and_minimise():
    res = lp((1, 2, 3), eq=[Facet((1, 1, 1), 1)], bounds=[(0, None)] * 3, maximize=False)
    assert res.value == 1 and res.point == (1, 0, 0)
    res = lp((1, -1), bounds=[(F(-1, 2), F(1, 3)), (-2, 5)])
    assert res.value == F(1, 3) + 2
    with pytest.raises(DimensionError):
        lp((1, 1), ub=[Facet((1,), 1)])


def test_lp_degenerate_does_not_cycle():
    # a classic cycling instance for the textbook rule
    ub = [Facet((F(1, 4), -8, -1, 9), 0), Facet((F(1, 2), -12, F(-1, 2), 3), 0), Facet((0, 0, 1, 0), 1)]
    res = lp((F(3, 4), -20, F(1, 2), -6), ub=ub, bounds=[(0, None)] * 4)
    assert res.status == "optimal" and res.value == F(5, 4)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-4, 6)), max_size=5),
       st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
def test_lp_agrees_with_corner_enumeration(rows, obj):
    box = [((1, 0), 5), ((-1, 0), 5), ((0, 1), 5), ((0, -1), 5)]
    cons = [((a, b), c) for a, b, c in rows if (a, b) != (0, 0)] + box
    res = lp(obj, ub=[Facet(a, b) for a, b in cons])
    best = brute_lp_max(obj, cons)
    if best is None:
        assert res.status == "infeasible"
    else:
        assert res.status == "optimal" and res.value == best
        assert all(sum(x * y for x, y in zip(a, res.point)) <= b for a, b in cons)


def test_hull_member_examples():
    ok = hull_member((F(1, 2), F(1, 2)), [(1, 0), (0, 1)])
    assert ok.member and ok.weights == (F(1, 2), F(1, 2))
    assert not hull_member((F(3, 5), F(1, 2)), [(1, 0), (0, 1)]).member
    # two-output example: coordinates (eps, a, b); the Dirac a-point is not a mix of halt and the coin
    assert not hull_member((1, 1, 0), [(1, 0, 0), (1, F(1, 2), F(1, 2))]).member
    with pytest.raises(ValueError):
        hull_member((1,), [])


def facets(h):
    return {(f.normal, f.offset) for f in h.facets}


def test_hrep_examples():
    tri = hrep([(0, 0), (1, 0), (0, 1)])
    assert tri.equalities == ()
    assert facets(tri) == {((-1, 0), 0), ((0, -1), 0), ((1, 1), 1)}
    pt = hrep([(F(1, 2), 3)])
    assert pt.facets == () and {(e.normal, e.offset) for e in pt.equalities} == {((2, 0), 1), ((0, 1), 3)}
    seg = hrep([(1, 0), (0, 1)])
    assert [(e.normal, e.offset) for e in seg.equalities] == [((1, 1), 1)]
    assert facets(seg) == {((-1, 0), 0), ((1, 0), 1)}
    cube = hrep(list(itertools.product((0, 1), repeat=4)))
    assert len(cube.facets) == 8
    with pytest.raises(CapExceeded):
        hrep(list(itertools.product((0, 1), repeat=4)), cap=3)


def random_points(rng, d, n, den=4):
    return [tuple(F(rng.randint(-den, den), den) for _ in range(d)) for _ in range(n)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_hrep_against_brute_force(seed, d):
    rng = random.Random(seed)
    pts = random_points(rng, d, rng.randint(d + 1, d + 5))
    h = hrep(pts)
    for f in h.facets:
        assert any(f.normal)
        assert all(f.slack(p) <= 0 for p in pts)
        assert any(f.slack(p) == 0 for p in pts)
    assert all(e.slack(p) == 0 for e in h.equalities for p in pts)
    if not h.equalities:
        def scaled(n, c):
            g = max(abs(x) for x in n)
            return tuple(x / g for x in n), c / g
        assert {scaled(*f) for f in facets(h)} == {scaled(*f) for f in brute_facets(pts)}
    for q in random_points(rng, d, 10, den=2):
        assert h.contains_point(q) == hull_member(q, pts).member


def test_contains_examples():
    tri = ((0, 0), (1, 0), (0, 1))
    Q = hrep(tri)
    assert contains(Polytope(tri), Q).contained
    res = contains(Polytope(((0, 0), (2, 0))), Q)
    assert not res.contained and res.point == (2, 0) and res.facet.normal == (1, 1)
    # extra constraints cut the offending part away
    cut = HRep(2, (), (Facet((1, 0), F(1, 2)),))
    assert contains(Polytope(((0, 0), (2, 0)), cut), Q).contained
    # and an empty intersection is trivially contained
    empty = HRep(2, (), (Facet((1, 0), -1),))
    assert contains(Polytope(((0, 0), (2, 0)), empty), Q).contained
    with pytest.raises(DimensionError):
        contains(Polytope(((0,),)), Q)


def test_witness_is_first_violated_constraint():
    Q = hrep([(0, 0), (1, 0), (0, 1)])
    res = contains(Polytope(((2, 2),)), Q)
    assert res.facet == Q.ordered()[[f.slack((2, 2)) > 0 for f in Q.ordered()].index(True)]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_contains_against_mixture_oracle(seed, d):
    rng = random.Random(seed)
    qs = random_points(rng, d, d + 3)
    ps = random_points(rng, d, rng.randint(1, 4), den=2)
    extra = HRep(d, (), (Facet(tuple(rng.randint(-2, 2) for _ in range(d)) or (1,), rng.randint(0, 2)),))
    extra = extra if any(extra.facets[0].normal) else None
    res = contains(Polytope(tuple(ps), extra), hrep(qs))
    # sound direction: a random mixture of P inside the extra constraints must lie in Q
    # whenever containment is claimed; a witness must be a point of P outside Q
    if res.contained:
        for _ in range(30):
            w = [F(rng.randint(0, 5)) for _ in ps]
            if not any(w):
                continue
            x = tuple(sum(wi * p[j] for wi, p in zip(w, ps)) / sum(w) for j in range(d))
            if extra is None or extra.contains_point(x):
                assert hull_member(x, qs).member
    else:
        assert hull_member(res.point, ps).member
        assert extra is None or extra.contains_point(res.point)
        assert not hull_member(res.point, qs).member
