"""Tests for the lattice geometry of greedy cells."""

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from kacbench.allocation import cell, greedy_allocation
from kacbench.errors import InconclusiveError, PreconditionError, UnsupportedError
from kacbench.system import FiniteSystem
from kacbench.voronoi import (
    HittingSet,
    LatticeCell,
    ball,
    cell_certified,
    cells_svg,
    convex_hull_2d,
    greedy_cell,
    hitting_set,
    in_recession_cone,
    is_almost_convex,
    recession_directions,
    sandwich_check,
    voronoi_cells,
)

from .conftest import N_RANDOM
from .testutil import brute_force_cells, random_hitting_set, random_sweep_out


def test_hitting_set_model():
    hs = HittingSet.of([(3, 0), (0, -2)])
    assert (0, 0) in hs.vectors
    assert hs.nonzero() == [(0, -2), (3, 0)]
    assert hs.max_norm2 == 9
    with pytest.raises(ValidationError, match="contain 0"):
        HittingSet(dim=2, vectors=[(1, 0)])
    with pytest.raises(ValidationError, match="dimension"):
        HittingSet(dim=2, vectors=[(0, 0), (1,)])


def test_ball_is_norm_lex_ordered():
    pts = [tuple(v) for v in ball(2, 1)]
    assert pts == [(0, 0), (-1, 0), (0, -1), (0, 1), (1, 0)]
    assert len(ball(2, 2)) == 13
    assert [v[0] for v in ball(1, 2)] == [0, -1, 1, -2, 2]


def test_cells_on_z():
    hs = HittingSet.of([(3,), (-2,)])
    cells = voronoi_cells(hs)
    assert cells.bounded
    assert sorted(cells.closed.points) == [(-1,), (0,), (1,)]
    assert sorted(cells.strict.points) == [(-1,), (0,)]
    # the greedy cell between hits at -2 and +3
    assert sorted(greedy_cell(hs).points) == [(-1,), (0,)]


def test_unbounded_cell_reports_recession_cone():
    vs = [(2, 0), (0, 2)]
    assert recession_directions(vs) == [(0, 1), (1, 0)]
    assert in_recession_cone(vs, (3, 5))
    assert not in_recession_cone(vs, (-1, 5))

    hs = HittingSet.of(vs)
    cells = voronoi_cells(hs)
    assert not cells.bounded
    assert cells.closed is None
    with pytest.raises(InconclusiveError) as err:
        greedy_cell(hs)
    assert err.value.directions == [(0, 1), (1, 0)]

    assert recession_directions([(1, 0), (-1, 0), (0, 1), (0, -1)]) == []
    assert voronoi_cells(HittingSet.of([(0, 0)])).recession == [
        (-1, 0),
        (0, -1),
        (0, 1),
        (1, 0),
    ]


def test_recession_in_three_dimensions():
    axes = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert recession_directions(axes) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    both = axes + [tuple(-c for c in v) for v in axes]
    assert recession_directions(both) == []
    assert recession_directions([(1, 1, 0), (-1, -1, 0)]) != []
    with pytest.raises(UnsupportedError):
        voronoi_cells(HittingSet.of(both))


@pytest.mark.parametrize("seed", range(N_RANDOM))
def test_cells_match_brute_force(testutils, seed):
    hs = random_hitting_set(testutils.rng(seed))
    cells = voronoi_cells(hs)
    strict, closed = brute_force_cells(hs, 10)
    assert cells.strict == strict
    assert cells.closed == closed
    assert cell_certified(cells, None)

    b = greedy_cell(hs)
    rep = sandwich_check(hs, b)
    assert rep.passed, rep
    assert rep.strict_size <= rep.cell_size <= rep.closed_size
    assert (0, 0) in b


vectors_10 = st.tuples(st.integers(-10, 10), st.integers(-10, 10)).filter(
    lambda v: v[0] ** 2 + v[1] ** 2 <= 100
)


@given(st.integers(1, 5), st.lists(vectors_10, max_size=12))
def test_cells_match_brute_force_property(k, extra):
    hs = HittingSet.of({(k, 0), (-k, 0), (0, k), (0, -k), *extra})
    cells = voronoi_cells(hs)
    assert (cells.strict, cells.closed) == brute_force_cells(hs, 10)
    assert sandwich_check(hs, greedy_cell(hs)).passed


def test_sandwich_flags_bad_cells():
    hs = HittingSet.of([(4, 0), (-4, 0), (0, 4), (0, -4)])
    closed = voronoi_cells(hs).closed
    rep = sandwich_check(hs, LatticeCell.of(list(closed.points) + [(5, 5)], 2))
    assert not rep.passed
    assert rep.outside_closed == [(5, 5)]
    rep = sandwich_check(hs, LatticeCell.of([(0, 0)], 2))
    assert not rep.strict_in_cell and not rep.passed


def test_radius_must_certify_the_cell():
    hs = HittingSet.of([(4, 0), (-4, 0), (0, 4), (0, -4)], radius=4)
    assert not cell_certified(voronoi_cells(hs), 4)
    with pytest.raises(InconclusiveError):
        sandwich_check(hs, LatticeCell.of([(0, 0)], 2))
    assert cell_certified(voronoi_cells(hs), 6)


@pytest.mark.parametrize("seed", range(20))
def test_greedy_cells_of_finite_grids(testutils, seed):
    rng = testutils.rng(seed)
    fs = FiniteSystem.grid(5, 5, rng.randint(0, 4))
    a = random_sweep_out(rng, fs)
    alloc = greedy_allocation(fs, a)
    for x in sorted(a):
        hs = hitting_set(fs, a, x, 12)
        assert cell(fs, alloc, x).lattice_cell().points == greedy_cell(hs).points
        assert sandwich_check(hs, greedy_cell(hs)).passed
    outside = sorted(set(range(fs.n_points)) - a)
    if outside:
        with pytest.raises(PreconditionError):
            hitting_set(fs, a, outside[0], 3)


def test_almost_convexity():
    square = [(i, j) for i in range(3) for j in range(3)]
    assert is_almost_convex(LatticeCell.of(square))
    holed = [p for p in square if p != (1, 1)]
    assert not is_almost_convex(LatticeCell.of(holed))
    corner = [p for p in square if p != (2, 2)]
    assert is_almost_convex(LatticeCell.of(corner))
    assert is_almost_convex(LatticeCell.of([(0,), (1,), (2,)]))
    assert not is_almost_convex(LatticeCell.of([(0,), (2,)]))

    cube = [(i, j, k) for i in range(3) for j in range(3) for k in range(3)]
    assert is_almost_convex(LatticeCell.of(cube))
    assert not is_almost_convex(LatticeCell.of([p for p in cube if p != (1, 1, 1)]))

    hull = convex_hull_2d([(0, 0), (2, 0), (2, 2), (0, 2), (1, 1)])
    assert hull == [(0, 0), (2, 0), (2, 2), (0, 2)]


def test_svg():
    hs = HittingSet.of([(3, 0), (0, 3), (-3, 0), (0, -3), (2, 2), (-2, -2)])
    cells = voronoi_cells(hs)
    svg = cells_svg(hs, cells, greedy_cell(hs))
    assert svg.startswith("<svg")
    assert svg.rstrip().endswith("</svg>")
    assert "<polygon" in svg
    assert svg.count('fill="red"') == len(hs.vectors)
    with pytest.raises(UnsupportedError):
        cells_svg(HittingSet.of([(1,), (-1,)]), voronoi_cells(HittingSet.of([(1,), (-1,)])))
