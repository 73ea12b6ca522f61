"""Tests for groups, elements and enumerations."""

from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kacbench.errors import ArgumentError, IndexRangeError
from kacbench.group import (
    Enumeration,
    Group,
    compose,
    enumeration_element,
    index_of,
    invert,
)


def test_parse_and_ids():
    assert Group.parse("Z").id == "Z"
    assert Group.parse("Z^2") == Group.lattice(2)
    assert Group.parse("ZxZ").id == "Z^2"
    assert Group.parse("C5 x C3") == Group.cyclic(5, 3)
    assert Group.parse("ZxC4").id == "ZxC4"
    assert Group.parse("1").rank == 0
    assert Group.parse("C6").order == 6
    assert Group.parse("Z^3").order is None
    assert Group.parse("Z^2").is_lattice
    assert not Group.parse("ZxC2").is_lattice

    for bad in ["Q", "Z^", "C0", "ZxY"]:
        with pytest.raises(ArgumentError):
            Group.parse(bad)


def test_elements_reduce():
    c5 = Group.cyclic(5)
    assert c5.element(7) == c5.element(2)
    assert c5.element(3).coords == (-2,)
    assert c5.element(4).norm2 == 1
    with pytest.raises(ArgumentError):
        Group.lattice(2).element(1)
    with pytest.raises(ArgumentError):
        compose(c5.element(1), Group.lattice(1).element(1))


def test_norm_lex_on_z():
    e = Group.lattice(1).enumeration()
    assert [g.coords[0] for g in e.prefix(5)] == [0, -1, 1, -2, 2]
    assert index_of(e, Group.lattice(1).element(-3)) == 5
    assert enumeration_element(e, 6).coords == (3,)


def test_norm_lex_on_z2():
    e = Group.lattice(2).enumeration()
    first = [g.coords for g in e.prefix(9)]
    assert first == [
        (0, 0),
        (-1, 0),
        (0, -1),
        (0, 1),
        (1, 0),
        (-1, -1),
        (-1, 1),
        (1, -1),
        (1, 1),
    ]


def test_finite_enumeration_and_range():
    c2c3 = Group.cyclic(2, 3)
    e = c2c3.enumeration()
    assert len(list(e)) == 6
    assert e.prefix(100) == list(e)
    with pytest.raises(IndexRangeError):
        e.element(6)
    with pytest.raises(IndexRangeError):
        e.element(-1)


def test_explicit_enumeration():
    c3 = Group.cyclic(3)
    order = [c3.element(0), c3.element(2), c3.element(1)]
    e = Enumeration(c3, order)
    assert e.order_rule == "explicit"
    assert e.index_of(c3.element(2)) == 1

    with pytest.raises(ArgumentError):  # missing element
        Enumeration(c3, order[:2])
    with pytest.raises(ArgumentError):  # duplicate
        Enumeration(c3, [c3.element(0), c3.element(1), c3.element(1)])
    with pytest.raises(ArgumentError):  # identity not first
        Enumeration(c3, order[::-1])
    with pytest.raises(ArgumentError):  # infinite group
        Enumeration(Group.lattice(1), [Group.lattice(1).element(0)])


coords = st.lists(st.integers(-50, 50), min_size=2, max_size=2)
groups = st.sampled_from(["Z^2", "ZxC4", "C3xC5"])


@given(groups, coords, coords, coords)
def test_group_laws(gid, a, b, c):
    g = Group.parse(gid)
    x, y, z = g.element(a), g.element(b), g.element(c)
    assert compose(compose(x, y), z) == compose(x, compose(y, z))
    assert compose(x, y) == compose(y, x)
    assert compose(x, invert(x)) == g.identity()
    assert x - y == compose(x, invert(y))


@given(st.integers(0, 400))
def test_enumeration_roundtrip_and_order(n):
    e = Group.lattice(2).enumeration()
    g = e.element(n)
    assert e.index_of(g) == n
    if n > 0:
        assert e.element(n - 1) < g


def test_enumeration_grows_consistently_from_threads():
    shared = Enumeration(Group.lattice(2))
    wanted = [3000 - 7 * i for i in range(400)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        got = list(pool.map(shared.element, wanted))
        reps = list(pool.map(lambda n: shared.coords_array(n)[-1].tolist(), wanted))

    reference = Enumeration(Group.lattice(2)).prefix(3001)
    assert got == [reference[n] for n in wanted]
    assert reps == [list(reference[n - 1].coords) for n in wanted]
    assert all(shared.index_of(g) == n for g, n in zip(got, wanted))
    assert len(set(shared.prefix(3001))) == 3001
