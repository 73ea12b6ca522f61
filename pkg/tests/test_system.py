"""Tests for finite and sampled systems."""

import math
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from kacbench.errors import ArgumentError
from kacbench.group import Group
from kacbench.system import (
    BoxSet,
    CylinderSet,
    FiniteSystem,
    IntervalSet,
    ResidueSet,
    SampledSystem,
    golden_alpha,
    integral,
    point_values,
    sqrt_alpha,
)

from .testutil import random_z_system


def test_cyclic_action(cyclic5):
    z = cyclic5.group
    assert cyclic5.apply(z.element(1), 4) == 0
    assert cyclic5.apply(z.element(-2), 1) == 4
    assert cyclic5.apply_inverse(z.element(3), 0) == 2
    assert cyclic5.orbit(2) == frozenset(range(5))
    assert cyclic5.is_ergodic()
    assert cyclic5.is_sweep_out([3])
    assert cyclic5.translate(z.element(1), [0, 1]) == {1, 2}
    assert cyclic5.preimage(z.element(1), [0, 1]) == {4, 0}


def test_non_ergodic_with_null_orbit():
    fs = FiniteSystem.from_cycles([[0, 1], [2, 3, 4]], ["1/2", "1/2", 0, 0, 0])
    assert fs.orbits() == [{0, 1}, {2, 3, 4}]
    assert fs.is_ergodic()  # a single orbit carries all the mass
    assert fs.is_sweep_out([1])
    assert not fs.is_sweep_out([2])
    assert fs.support() == {0, 1}
    assert fs.saturation([3]) == {2, 3, 4}


def test_grid_action():
    fs = FiniteSystem.grid(3, 2, shift=1)
    g = fs.group
    assert g == Group.lattice(2)
    assert fs.apply(g.element(1, 0), 2) == 0  # (2,0) -> (0,0)
    assert fs.apply(g.element(0, 1), 0) == 3  # (0,0) -> (0,1)
    assert fs.apply(g.element(0, 1), 3) == 2  # (0,1) -> (-1 mod 3, 0)
    assert fs.is_ergodic()

    torus = FiniteSystem.grid(2, 3, 0, "C2xC3")
    assert torus.group.order == 6
    assert torus.apply(torus.group.element(1, 3), 0) == 1


def test_invalid_systems():
    with pytest.raises(ValidationError, match="masses must sum to 1"):
        FiniteSystem.cyclic(3, ["1/3", "1/3", "1/2"])
    with pytest.raises(ValidationError, match="non-negative"):
        FiniteSystem.cyclic(2, ["3/2", "-1/2"])
    with pytest.raises(ValidationError, match="not a permutation"):
        FiniteSystem.from_permutations([[0, 0, 1]])
    with pytest.raises(ValidationError, match="mass"):
        FiniteSystem.cyclic(2, ["1/4", "3/4"])
    with pytest.raises(ValidationError, match="divide"):
        FiniteSystem.cyclic(3, group="C4")
    with pytest.raises(ValidationError, match="commute"):
        FiniteSystem.from_permutations([[1, 0, 2], [0, 2, 1]], group="Z^2")
    with pytest.raises(ValidationError, match="exact rational"):
        FiniteSystem.cyclic(2, ["a", "b"])
    with pytest.raises(ArgumentError):
        FiniteSystem.cyclic(5).apply(Group.lattice(2).element(0, 1), 0)
    with pytest.raises(ArgumentError):
        FiniteSystem.cyclic(5).point_set([5])


def test_orbits_partition_random(testutils):
    for seed in range(20):
        fs = random_z_system(testutils.rng(seed), ergodic=False)
        orbits = fs.orbits()
        assert sum(len(o) for o in orbits) == fs.n_points
        for o in orbits:
            x = min(o)
            assert fs.orbit(x) == o
            assert all(fs.masses[y] == fs.masses[x] for y in o)


def test_point_values_and_integral(cyclic5):
    assert point_values(cyclic5, 2) == [Fraction(2)] * 5
    assert point_values(cyclic5, lambda x: x)[4] == 4
    assert point_values(cyclic5, {x: "1/2" for x in range(5)})[0] == Fraction(1, 2)
    assert point_values(cyclic5, ["inf", 0, 0, 0, 0])[0] == math.inf
    assert integral(cyclic5, {0: Fraction(5), 1: Fraction(0)}) == 1
    assert integral(cyclic5, {0: math.inf}) == math.inf

    fs = FiniteSystem.from_cycles([[0], [1]], [1, 0])
    assert integral(fs, {1: math.inf}) == 0  # 0 * inf = 0

    with pytest.raises(ArgumentError):
        point_values(cyclic5, [1, 2])
    with pytest.raises(ArgumentError):
        point_values(cyclic5, {0: 1})
    with pytest.raises(ArgumentError):
        point_values(cyclic5, -1)
    with pytest.raises(ArgumentError):
        point_values(cyclic5, 0.5)


def test_sampled_sets():
    iv = IntervalSet(intervals=[("0", "1/3"), ("1/2", "3/4")])
    assert iv.measure() == Fraction(7, 12)
    assert iv.contains(np.array([0.0, 0.4, 0.6, 0.75])).tolist() == [
        True,
        False,
        True,
        False,
    ]
    with pytest.raises(ValidationError):
        IntervalSet(intervals=[("0", "1/2"), ("1/3", "1")])
    with pytest.raises(ValidationError):
        IntervalSet(intervals=[("1/2", "1/2")])

    box = BoxSet(boxes=[[("0", "1/2"), ("0", "1/2")]])
    assert box.measure() == Fraction(1, 4)
    assert box.contains(np.array([[0.1, 0.2], [0.6, 0.1]])).tolist() == [True, False]

    cyl = CylinderSet(prefixes=["01"])
    assert cyl.measure() == Fraction(1, 4)
    # digit 0 is bit 0: 2 = binary ...10 starts with digits 0, 1
    assert cyl.contains(np.array([2, 1, 6], dtype=np.uint64)).tolist() == [True, False, True]
    with pytest.raises(ValidationError):
        CylinderSet(prefixes=["0", "01"])

    res = ResidueSet(modulus=5, residues=[0, 1])
    assert res.measure() == Fraction(2, 5)
    with pytest.raises(ValidationError):
        ResidueSet(modulus=5, residues=[5])


def test_alpha_surrogates():
    assert golden_alpha().startswith("0.6180339887498948482045868343656381177203")
    assert sqrt_alpha(2).startswith("0.41421356237309504880")
    with pytest.raises(ValidationError):
        SampledSystem(kind="rotation", alpha=["1.5"])
    with pytest.raises(ValidationError):
        SampledSystem(kind="rotation", alpha=[])
    with pytest.raises(ValidationError):
        SampledSystem(kind="cyclic")


def test_rotation_is_exact_along_orbits(rotation):
    z = rotation.group
    x = np.array([0.25])

    def dist(a, b):
        d = abs(a - b) % 1.0
        return min(d, 1.0 - d)

    far = rotation.apply(z.element(10**9), x)
    stepwise = rotation.apply(z.element(10**9 - 1), rotation.apply(z.element(1), x))
    assert dist(far[0], stepwise[0]) < 1e-12
    back = rotation.apply(z.element(-(10**9)), far)
    assert dist(back[0], 0.25) < 1e-12


def test_translates_match_apply():
    torus = SampledSystem.torus([golden_alpha(), sqrt_alpha(2)])
    x = np.array([0.1, 0.7])
    ws = np.array([[0, 0], [1, 0], [-3, 2]])
    ys = torus.translates(x, ws)
    for w, y in zip(ws, ys):
        assert np.allclose(torus.apply(torus.group.element(w.tolist()), x), y)
    with pytest.raises(ArgumentError):
        torus.translates(x, np.array([[1]]))

    odo = SampledSystem.odometer(depth=8)
    assert odo.translates(255, np.array([[1]]))[0] == 0
    assert odo.iterate(np.array([3], dtype=np.uint64), 5)[0] == 8


def test_sampling_is_reproducible():
    ss = SampledSystem.rotation(seed=7)
    a = ss.sample(0, 100, chunk=3)
    assert np.array_equal(a, ss.sample(0, 100, chunk=3))
    assert not np.array_equal(a, ss.sample(1, 100, chunk=3))
    assert not np.array_equal(a, ss.with_seed(8).sample(0, 100, chunk=3))
    assert ss.sample_point(0, 105, 100) == ss.sample(0, 100, chunk=1)[5]

    cyc = SampledSystem.cyclic(7)
    pts = cyc.sample(0, 1000)
    assert pts.min() >= 0 and pts.max() < 7
    assert SampledSystem.odometer(depth=4).sample(0, 100).max() < 16
