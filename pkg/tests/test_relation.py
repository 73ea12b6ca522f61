"""Tests for finite equivalence relations and the bridge to allocations."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from kacbench.errors import ArgumentError, PreconditionError
from kacbench.relation import (
    EquivRelation,
    TauMap,
    check_bridge,
    first_return_tau,
    orbit_relation,
    pushforward_preserved,
    tau_to_allocation,
    transport_tau,
    validate_relation,
    verify_relation_kac,
)
from kacbench.system import FiniteSystem

from .conftest import N_RANDOM
from .testutil import (
    random_function,
    random_lattice_system,
    random_relation,
    random_sweep_out,
    random_tau,
    random_z_system,
)


@pytest.fixture
def small_rel():
    return EquivRelation.from_classes([[0, 1], [2]], ["1/4", "1/4", "1/2"])


def test_relation_kac_example(small_rel):
    tau = TauMap(table=[0, 0, 2])
    f = ["1", "2", "3"]
    assert transport_tau(small_rel, tau, f) == {0: 3, 1: 0, 2: 3}
    rep = verify_relation_kac(small_rel, tau, f)
    assert rep.passed
    assert rep.lhs == rep.rhs == Fraction(9, 4)
    assert rep.preimage_integral == 1

    push = pushforward_preserved(small_rel, tau)
    assert not push.injective and not push.preserved
    assert push.passed  # only injective maps must preserve the measure


def test_relation_model(small_rel):
    assert small_rel.classes() == [frozenset({0, 1}), frozenset({2})]
    assert small_rel.related(0, 1) and not small_rel.related(1, 2)
    assert EquivRelation.from_classes([[1], [0, 2]]).masses == [Fraction(1, 3)] * 3

    with pytest.raises(ValidationError, match="sum to 1"):
        EquivRelation(masses=["1/2", "1/4"], class_of=[0, 0])
    with pytest.raises(ValidationError, match="class labels"):
        EquivRelation(masses=["1/2", "1/2"], class_of=[0])
    with pytest.raises(ArgumentError):
        EquivRelation.from_classes([[0, 1], [1]])


def test_invalid_relation_and_tau(small_rel):
    bad = EquivRelation.from_classes([[0, 1]], ["1/3", "2/3"])
    verdict = validate_relation(bad)
    assert not verdict.valid
    assert verdict.offending_class == [0, 1]
    assert verdict.offending_masses == [Fraction(1, 3), Fraction(2, 3)]
    with pytest.raises(PreconditionError, match="preserve"):
        verify_relation_kac(bad, TauMap(table=[0, 1]))

    with pytest.raises(PreconditionError, match="leaves the class"):
        verify_relation_kac(small_rel, TauMap(table=[2, 0, 2]))
    with pytest.raises(PreconditionError, match="entries"):
        verify_relation_kac(small_rel, TauMap(table=[0, 0]))
    with pytest.raises(PreconditionError, match="not a point"):
        verify_relation_kac(small_rel, TauMap(table=[0, 3, 2]))


@pytest.mark.parametrize("seed", range(N_RANDOM))
def test_relation_kac_random(testutils, seed):
    rng = testutils.rng(seed)
    rel = random_relation(rng)
    assert validate_relation(rel).valid
    tau = random_tau(rng, rel)
    for _ in range(3):
        f = random_function(rng, rel.n_points, inf=True)
        assert verify_relation_kac(rel, tau, f).passed
    assert verify_relation_kac(rel, tau).preimage_integral == 1
    assert pushforward_preserved(rel, tau).passed

    # a permutation of each class
    perm = list(range(rel.n_points))
    for c in rel.classes():
        pts = sorted(c)
        shuffled = pts[:]
        rng.shuffle(shuffled)
        for x, y in zip(pts, shuffled):
            perm[x] = y
    push = pushforward_preserved(rel, TauMap(table=perm))
    assert push.injective and push.preserved


def test_first_return_tau(cyclic5):
    tau = first_return_tau(cyclic5, [0, 1])
    assert tau.table == [1, 0, 1, 1, 1]
    target, alloc = tau_to_allocation(cyclic5, tau)
    assert target == {0, 1}
    assert all(alloc.image(x) == tau(x) for x in range(5))

    rep = check_bridge(cyclic5, tau)
    assert rep.passed and rep.matches
    assert rep.target == [0, 1]

    with pytest.raises(ArgumentError):
        first_return_tau(FiniteSystem.grid(2, 2), [0])
    with pytest.raises(PreconditionError):
        first_return_tau(FiniteSystem.from_cycles([[0, 1], [2, 3]]), [0])
    null = FiniteSystem.from_cycles([[0, 1], [2, 3]], ["1/2", "1/2", 0, 0])
    assert first_return_tau(null, [0]).table == [0, 0, 2, 3]


@pytest.mark.parametrize("seed", range(N_RANDOM))
def test_bridge_random(testutils, seed):
    rng = testutils.rng(500 + seed)
    if seed % 2:
        fs = random_z_system(rng, max_points=40, ergodic=seed % 4 == 1)
        tau = first_return_tau(fs, random_sweep_out(rng, fs))
    else:
        fs = random_lattice_system(rng)
        tau = random_tau(rng, orbit_relation(fs))
    f = random_function(rng, fs.n_points, inf=True)
    rep = check_bridge(fs, tau, f)
    assert rep.passed, rep
    assert rep.relation.lhs == rep.allocation.lhs


@given(st.lists(st.integers(0, 3), min_size=1, max_size=12), st.data())
def test_relation_kac_property(labels, data):
    classes = {c: [x for x, l in enumerate(labels) if l == c] for c in set(labels)}
    weights = {c: data.draw(st.integers(0, 5)) for c in classes}
    if not any(weights.values()):
        weights[labels[0]] = 1
    total = sum(weights[c] * len(xs) for c, xs in classes.items())
    masses = [Fraction(weights[c], total) for c in labels]
    rel = EquivRelation(masses=masses, class_of=labels)

    tau = TauMap(table=[data.draw(st.sampled_from(classes[c])) for c in labels])
    f = data.draw(
        st.lists(st.fractions(min_value=0, max_value=10), min_size=len(labels), max_size=len(labels))
    )
    rep = verify_relation_kac(rel, tau, f)
    assert rep.passed
    assert rep.preimage_integral == 1
