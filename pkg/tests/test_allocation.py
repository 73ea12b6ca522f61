"""Tests for return times, allocations, cells and Kac functions."""

import math
from fractions import Fraction

import numpy as np
import pytest

from kacbench.allocation import (
    AllocationStrategy,
    cell,
    cell_sizes,
    check_kac_partition,
    check_return_time_cells,
    forward_hitting_allocation,
    greedy_allocation,
    induced_map,
    induced_map_is_measure_preserving,
    kac_function,
    kac_function_transport,
    return_time,
    return_times,
    shape_code,
    table_allocation,
    tail_bound_check,
    transport,
    transport_inequality,
    verify_allocation_identity,
    verify_return_time_identity,
)
from kacbench.errors import (
    ArgumentError,
    InvalidAllocationError,
    NoReturnError,
    PreconditionError,
)
from kacbench.system import BoxSet, FiniteSystem, IntervalSet, SampledSystem, sqrt_alpha

from .conftest import N_RANDOM
from .testutil import (
    brute_force_greedy,
    random_allocation,
    random_function,
    random_lattice_system,
    random_null_z_system,
    random_sweep_out,
    random_z_system,
)


def coords(gs):
    return sorted(g.coords[0] for g in gs)


################################################################
# the 5-cycle with A = {0, 1}


def test_return_times_on_cycle(cyclic5):
    assert [return_time(cyclic5, [0, 1], x) for x in range(5)] == [1, 4, 3, 2, 1]
    assert induced_map(cyclic5, [0, 1], 1) == 0
    rep = verify_return_time_identity(cyclic5, [0, 1])
    assert rep.exact and rep.passed
    assert rep.lhs == 1
    assert rep.target_mass == Fraction(2, 5)
    assert rep.mean_return_time == Fraction(5, 2) == rep.expected_mean


def test_greedy_on_cycle(cyclic5):
    alloc = greedy_allocation(cyclic5, [0, 1])
    assert [alloc(x).coords[0] for x in range(5)] == [0, 0, -1, -2, 1]
    assert coords(cell(cyclic5, alloc, 0).elements) == [0, 1]
    assert coords(cell(cyclic5, alloc, 1).elements) == [-2, -1, 0]
    assert len(cell(cyclic5, alloc, 3)) == 0  # not in A

    f = [0, 0, 0, 1, 0]  # indicator of {3}
    assert transport(cyclic5, alloc, f) == {0: 0, 1: 1}
    rep = verify_allocation_identity(cyclic5, [0, 1], alloc, f)
    assert rep.passed and rep.lhs == rep.rhs == Fraction(1, 5)


def test_forward_hitting_on_cycle(cyclic5):
    alloc = forward_hitting_allocation(cyclic5, [0, 1])
    assert [alloc(x).coords[0] for x in range(5)] == [0, 0, 3, 2, 1]
    # the cell of x is [0, q(x)) with q(x) the backward return time of x
    assert coords(cell(cyclic5, alloc, 0).elements) == [0, 1, 2, 3]
    assert coords(cell(cyclic5, alloc, 1).elements) == [0]
    assert check_return_time_cells(cyclic5, [0, 1], alloc).passed


def test_kac_function_on_cycle(cyclic5):
    alloc = greedy_allocation(cyclic5, [0, 1])
    kf = kac_function(cyclic5, [0, 1], alloc, universal=True)
    assert [coords(s) for s in kf.shapes] == [[0, 1], [-2, -1, 0]]
    assert kf.phi == {0: 1, 1: 2}
    e = cyclic5.group.enumeration()
    assert kf.codes == {0: 1 + 4, 1: 1 + 2 + 8}
    assert shape_code(e, kf.shapes[0]) == 5

    part = check_kac_partition(cyclic5, kf)
    assert part.passed and part.identity_in_shapes
    assert part.integral == 1

    tail = tail_bound_check(cyclic5, [0, 1], kf)
    assert tail.passed
    assert [(r.n, r.measure) for r in tail.rows] == [
        (1, Fraction(2, 5)),
        (2, Fraction(2, 5)),
        (3, Fraction(1, 5)),
    ]

    f = [0, 0, 0, 1, 0]
    assert kac_function_transport(cyclic5, kf, f) == transport(cyclic5, alloc, f)
    full = transport_inequality(cyclic5, kf, f, alloc=alloc)
    assert full.complete and full.passed and full.matches_allocation
    part_tr = transport_inequality(cyclic5, kf, f, shapes={1})
    assert not part_tr.complete and part_tr.passed
    assert part_tr.lhs == 0 < part_tr.rhs


################################################################
# errors


def test_allocation_errors(cyclic5):
    fs = FiniteSystem.from_cycles([[0, 1], [2, 3]])
    with pytest.raises(PreconditionError):
        greedy_allocation(fs, [0])
    with pytest.raises(PreconditionError):
        verify_return_time_identity(fs, [0])
    with pytest.raises(NoReturnError):
        return_time(fs, [0], 2)
    with pytest.raises(PreconditionError):
        return_time(cyclic5, [], 0)
    with pytest.raises(ArgumentError):
        return_time(FiniteSystem.grid(2, 2), [0], 0)

    with pytest.raises(ArgumentError):  # missing entries
        table_allocation(cyclic5, [0], {0: 0})
    with pytest.raises(InvalidAllocationError):
        table_allocation(cyclic5, [0], {0: 0, 1: 1, 2: 3, 3: 2, 4: 1})
    with pytest.raises(ArgumentError):  # target outside of the system
        greedy_allocation(cyclic5, [7])

    alloc = greedy_allocation(cyclic5, [0, 1])
    other = FiniteSystem.cyclic(5)
    with pytest.raises(ArgumentError):
        cell(other, alloc, 0)
    with pytest.raises(ArgumentError):
        verify_allocation_identity(cyclic5, [0], alloc, 1)


def test_table_allocation_with_null_points():
    fs = FiniteSystem.from_cycles([[0, 1], [2, 3]], ["1/2", "1/2", 0, 0])
    alloc = table_allocation(fs, [0], {0: 0, 1: 1})
    assert alloc.domain == {0, 1}
    assert verify_allocation_identity(fs, [0], alloc, [1, 2, 5, 7]).passed


################################################################
# exact identities on random systems


@pytest.mark.parametrize("seed", range(N_RANDOM))
def test_return_time_identity_ergodic(testutils, seed):
    rng = testutils.rng(seed)
    if seed % 2:
        fs = random_null_z_system(rng)
    else:
        fs = random_z_system(rng, ergodic=True)
    assert fs.is_ergodic()
    a = random_sweep_out(rng, fs)
    rep = verify_return_time_identity(fs, a)
    assert rep.passed and rep.lhs == 1
    assert induced_map_is_measure_preserving(fs, a).passed
    assert check_return_time_cells(fs, a).passed


@pytest.mark.parametrize("seed", range(N_RANDOM // 2))
def test_return_time_identity_several_orbits(testutils, seed):
    rng = testutils.rng(1000 + seed)
    fs = random_z_system(rng, ergodic=False)
    a = random_sweep_out(rng, fs)
    rep = verify_return_time_identity(fs, a)
    assert rep.passed and rep.lhs == 1
    assert induced_map_is_measure_preserving(fs, a).passed
    assert check_return_time_cells(fs, a).passed


def random_system(rng, seed: int) -> FiniteSystem:
    if seed % 3 == 0:
        return random_z_system(rng, max_points=40, ergodic=False)
    return random_lattice_system(rng)


@pytest.mark.parametrize("seed", range(N_RANDOM))
def test_allocation_identity_random(testutils, seed):
    rng = testutils.rng(1000 + seed)
    fs = random_system(rng, seed)
    a = random_sweep_out(rng, fs)
    allocs = [greedy_allocation(fs, a), random_allocation(rng, fs, a)]
    for alloc in allocs:
        for _ in range(5):
            f = random_function(rng, fs.n_points, inf=True)
            rep = verify_allocation_identity(fs, a, alloc, f)
            assert rep.passed, (fs, sorted(a), f)
        # f = 1: the cells have mean size 1 on A
        assert verify_allocation_identity(fs, a, alloc, 1).lhs == 1


@pytest.mark.parametrize("seed", range(N_RANDOM))
def test_kac_function_random(testutils, seed):
    rng = testutils.rng(2000 + seed)
    fs = random_system(rng, seed)
    a = random_sweep_out(rng, fs)
    alloc = greedy_allocation(fs, a)
    assert alloc.table() == {
        x: g for x, g in brute_force_greedy(fs, a).items() if x in alloc.domain
    }
    kf = kac_function(fs, a, alloc)
    part = check_kac_partition(fs, kf)
    assert part.passed
    assert part.integral == 1
    assert tail_bound_check(fs, a, kf).passed

    f = random_function(rng, fs.n_points)
    assert transport_inequality(fs, kf, f, alloc=alloc).passed
    some = {i for i in range(1, len(kf.shapes) + 1) if rng.random() < 0.5}
    sub = transport_inequality(fs, kf, f, shapes=some)
    assert sub.passed and sub.lhs <= sub.rhs


################################################################
# sampled systems


def test_return_times_on_rotation(test_config, rotation):
    a = IntervalSet(intervals=[("0", "1/3")])
    pts = rotation.sample(0, 200)
    r = return_times(rotation, a, pts, budget=100)
    for x, k in zip(pts[:20], r[:20]):
        assert not math.isnan(k)
        k = int(k)
        assert a.contains(rotation.iterate(np.array([x]), k))[0]
        assert not any(a.contains(rotation.iterate(np.array([x]), j))[0] for j in range(1, k))
    # the golden rotation returns to an interval of length 1/3 within 5 steps
    assert np.nanmax(r) <= 5


def test_greedy_cells_on_rotation(test_config, rotation):
    a = IntervalSet(intervals=[("0", "1/3")])
    alloc = greedy_allocation(rotation, a)
    z = rotation.group
    for x in [0.05, 0.2, 0.3]:
        b = cell(rotation, alloc, x)
        assert z.identity() in b
        for g in b.elements:
            y = rotation.apply(-g, np.array([x]))[0]
            assert alloc(y) == g
    assert len(cell(rotation, alloc, 0.5)) == 0

    pts = rotation.sample(0, 1000)
    sizes = cell_sizes(rotation, alloc, pts)
    inside = a.contains(pts)
    assert (sizes[~inside] == 0).all()
    assert set(sizes[inside].astype(int)) <= {1, 2, 3, 4, 5}


def test_forward_cells_on_rotation(test_config, rotation):
    a = IntervalSet(intervals=[("0", "1/3")])
    rep = check_return_time_cells(rotation, a, n=2000, seed=1)
    assert rep.passed and rep.checked > 0


def test_return_time_identity_on_rotation(test_config, rotation):
    a = IntervalSet(intervals=[("0", "1/3")])
    rep = verify_return_time_identity(rotation, a, n=100_000, seed=0)
    assert not rep.exact and rep.passed
    assert rep.lhs_estimate.accepts(1)
    assert rep.expected_mean == 3


@pytest.mark.slow
def test_return_time_identity_on_rotation_1e6(test_config, rotation):
    a = IntervalSet(intervals=[("0", "1/3")])
    rep = verify_return_time_identity(rotation, a, n=1_000_000, seed=0)
    est = rep.lhs_estimate
    assert rep.passed
    assert est.stderr < 0.01


def test_allocation_identity_on_rotation(test_config, rotation):
    a = IntervalSet(intervals=[("0", "1/3")])
    alloc = greedy_allocation(rotation, a)

    def one(points):
        return np.ones(len(points))

    rep = verify_allocation_identity(rotation, a, alloc, one, n=50_000, seed=0)
    assert rep.passed
    assert rep.lhs_estimate.accepts(1)

    def half(points):
        return (np.asarray(points) < 0.5).astype(float)

    rep = verify_allocation_identity(rotation, a, alloc, half, n=50_000, seed=0)
    assert rep.passed


def test_greedy_cell_on_torus(test_config):
    torus = SampledSystem.torus([sqrt_alpha(2), sqrt_alpha(3)])
    a = BoxSet(boxes=[[("0", "1/4"), ("0", "1/4")]])
    alloc = greedy_allocation(torus, a)
    assert alloc.strategy == AllocationStrategy.GREEDY
    x = np.array([0.1, 0.1])
    b = cell(torus, alloc, x)
    assert torus.group.identity() in b
    for g in b.elements:
        y = torus.apply(-g, x)
        assert alloc(y) == g
    assert (0, 0) in b.lattice_cell()
