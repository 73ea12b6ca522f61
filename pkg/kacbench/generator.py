"""
Sweep-out partitions, fingerprints and generating partitions.

Given pairwise disjoint sweep-out sets A_1, A_2, ... with allocations kappa_n and
arbitrary sets E_1, E_2, ..., the fingerprint of a point x is

    C_x = {(n, g) : g in B_n(x) and T_g^{-1}(x) in E_n},

where B_n is the cell of kappa_n. Grouping points by their fingerprint gives a
partition P, and every E_n is recovered from it as the union of T_g^{-1}(P_D) over
all blocks D containing (n, g). In particular P generates the sigma-algebra
spanned by the E_n.

Note the inverse: (n, g) in C_x says that T_g^{-1}(x) lies in E_n, so E_n is built
from preimages of blocks, not from their images T_g(P_D).
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from .allocation import Allocation, cell
from .errors import ArgumentError, PreconditionError, UnsupportedError
from .group import GroupElement
from .log import child
from .system import (
    AnySystem,
    BoxSet,
    FiniteSystem,
    IntervalSet,
    PointSet,
    ResidueSet,
    SampledKind,
    SampledSet,
    SampledSystem,
)
from .util import Rational, Record

log = child(__name__)


################################################################
# sweep-out partitions


class Piece(Record):
    """One set of a sweep-out partition."""

    points: Optional[PointSet] = None
    """For finite systems."""

    region: Optional[Union[IntervalSet, BoxSet, ResidueSet]] = None
    """For sampled systems."""

    measure: Rational
    origin: str
    """How the piece was made: 'packing', 'quantile', 'complement' or 'whole'."""


class SweepOutPartition(Record):
    """Disjoint sweep-out sets of measure at most epsilon, up to a residual set."""

    epsilon: Rational
    pieces: List[Piece]
    residual_mass: Rational
    """1 minus the total measure of the pieces."""


def _sampled_piece(ss: SampledSystem, lo: Fraction, hi: Fraction, origin: str) -> Piece:
    if ss.kind == SampledKind.ROTATION:
        s: Union[IntervalSet, BoxSet] = IntervalSet(intervals=[(lo, hi)])
    else:
        rest = [(Fraction(0), Fraction(1))] * (len(ss.alpha) - 1)
        s = BoxSet(boxes=[[(lo, hi)] + rest])
    return Piece(region=s, measure=hi - lo, origin=origin)


def sweep_out_partition(
    system: AnySystem, epsilon, n_max: int = 16
) -> SweepOutPartition:
    """
    Split an ergodic system into sweep-out sets of measure at most epsilon.

    Finite systems (and the sampled cyclic system) pack the positive-mass points in
    order into consecutive pieces. On the rotation and the torus, the pieces
    [f_{n-1}, f_n) with f_n - f_{n-1} = epsilon / 2^n for n <= n_max exhaust
    [0, epsilon) up to a tail of measure epsilon / 2^n_max, and [epsilon, 1) is cut
    into equal intervals of length at most epsilon (in the first coordinate).
    """
    eps = Fraction(epsilon)
    if eps <= 0:
        raise ArgumentError("epsilon must be positive")
    if n_max < 1:
        raise ArgumentError("n_max must be at least 1")

    if isinstance(system, FiniteSystem):
        if not system.is_ergodic():
            raise UnsupportedError(
                "sweep-out partitions of non-ergodic systems need conditional measures"
            )
        if eps >= 1:
            log.warning(f"epsilon = {eps} >= 1, the partition is a single piece")
            whole = system.support()
            return SweepOutPartition(
                epsilon=eps,
                pieces=[Piece(points=whole, measure=Fraction(1), origin="whole")],
                residual_mass=Fraction(0),
            )
        return _packing(system, eps)

    if eps >= 1:
        log.warning(f"epsilon = {eps} >= 1, the partition is a single piece")
        if system.kind == SampledKind.CYCLIC:
            s: SampledSet = ResidueSet(modulus=system.n, residues=list(range(system.n)))
            piece = Piece(region=s, measure=Fraction(1), origin="whole")
        elif system.kind in (SampledKind.ROTATION, SampledKind.TORUS):
            piece = _sampled_piece(system, Fraction(0), Fraction(1), "whole")
        else:
            raise UnsupportedError(f"no interval sets on the {system.kind.value}")
        return SweepOutPartition(epsilon=eps, pieces=[piece], residual_mass=Fraction(0))

    if system.kind == SampledKind.CYCLIC:
        return _residue_packing(system, eps)
    if system.kind not in (SampledKind.ROTATION, SampledKind.TORUS):
        raise UnsupportedError(
            f"sweep-out partitions need interval sets, not the {system.kind.value}"
        )

    pieces = []
    lo = Fraction(0)
    for n in range(1, n_max + 1):
        hi = lo + eps / 2**n
        pieces.append(_sampled_piece(system, lo, hi, "quantile"))
        lo = hi
    k = math.ceil((1 - eps) / eps)
    width = (1 - eps) / k
    for i in range(k):
        pieces.append(
            _sampled_piece(system, eps + i * width, eps + (i + 1) * width, "complement")
        )
    residual = 1 - sum((p.measure for p in pieces), Fraction(0))
    log.debug(f"{len(pieces)} pieces, residual {residual}")
    return SweepOutPartition(epsilon=eps, pieces=pieces, residual_mass=residual)


def _pack(masses: Sequence[Tuple[int, Fraction]], eps: Fraction) -> List[List[int]]:
    groups: List[List[int]] = []
    current: List[int] = []
    total = Fraction(0)
    for x, m in masses:
        if m > eps:
            raise PreconditionError(f"point {x} has mass {m} > epsilon = {eps}")
        if current and total + m > eps:
            groups.append(current)
            current, total = [], Fraction(0)
        current.append(x)
        total += m
    if current:
        groups.append(current)
    return groups


def _packing(fs: FiniteSystem, eps: Fraction) -> SweepOutPartition:
    support = sorted(fs.support())
    pieces = [
        Piece(points=frozenset(g), measure=fs.mass(g), origin="packing")
        for g in _pack([(x, fs.masses[x]) for x in support], eps)
    ]
    for p in pieces:
        assert p.points is not None and fs.is_sweep_out(p.points)
    return SweepOutPartition(epsilon=eps, pieces=pieces, residual_mass=Fraction(0))


def _residue_packing(ss: SampledSystem, eps: Fraction) -> SweepOutPartition:
    assert ss.n is not None
    m = Fraction(1, ss.n)
    pieces = [
        Piece(
            region=ResidueSet(modulus=ss.n, residues=g),
            measure=m * len(g),
            origin="packing",
        )
        for g in _pack([(x, m) for x in range(ss.n)], eps)
    ]
    return SweepOutPartition(epsilon=eps, pieces=pieces, residual_mass=Fraction(0))


################################################################
# fingerprints


Pair = Tuple[int, GroupElement]


class Fingerprint(Record):
    """The finite set C_x of pairs (n, g), n counted from 1."""

    pairs: FrozenSet[Pair]

    def key(self) -> List[Pair]:
        """Canonical sorted form."""
        return sorted(self.pairs)

    def __hash__(self) -> int:
        return hash(self.pairs)


def _check_family(
    fs: FiniteSystem, allocations: Sequence[Allocation], sets: Sequence[Iterable[int]]
) -> List[PointSet]:
    if len(allocations) != len(sets):
        raise ArgumentError(f"{len(allocations)} allocations but {len(sets)} sets")
    for i, alloc in enumerate(allocations):
        if alloc.system is not fs:
            raise ArgumentError(f"allocation {i + 1} belongs to another system")
        for j in range(i):
            if alloc.target & allocations[j].target:
                raise PreconditionError(f"targets {j + 1} and {i + 1} intersect")
    return [fs.point_set(e) for e in sets]


def _fingerprint(
    fs: FiniteSystem, allocations: Sequence[Allocation], sets: List[PointSet], x: int
) -> Fingerprint:
    pairs = set()
    for n, (alloc, e) in enumerate(zip(allocations, sets), start=1):
        for g in cell(fs, alloc, x).elements:
            if fs.apply_inverse(g, x) in e:
                pairs.add((n, g))
    return Fingerprint(pairs=frozenset(pairs))


def fingerprint(
    fs: FiniteSystem,
    allocations: Sequence[Allocation],
    sets: Sequence[Iterable[int]],
    x: int,
) -> Fingerprint:
    """C_x for the targets and allocations `allocations` and the sets `sets`."""
    es = _check_family(fs, allocations, sets)
    fs.point_set([x])
    return _fingerprint(fs, allocations, es, x)


class GeneratorBlock(Record):
    key: List[Pair]
    points: PointSet


class GeneratorPartition(Record):
    """The blocks P_D = {x : C_x = D}, in canonical key order."""

    blocks: List[GeneratorBlock]

    def block(self, key: Iterable[Pair]) -> PointSet:
        wanted = sorted(key)
        for b in self.blocks:
            if b.key == wanted:
                return b.points
        return frozenset()


def generator_partition(
    fs: FiniteSystem, allocations: Sequence[Allocation], sets: Sequence[Iterable[int]]
) -> GeneratorPartition:
    """Group the positive-mass points by their fingerprint."""
    es = _check_family(fs, allocations, sets)
    by_key: Dict[FrozenSet[Pair], List[int]] = {}
    for x in sorted(fs.support()):
        by_key.setdefault(_fingerprint(fs, allocations, es, x).pairs, []).append(x)
    blocks = sorted(
        (GeneratorBlock(key=sorted(k), points=frozenset(v)) for k, v in by_key.items()),
        key=lambda b: b.key,
    )
    log.debug(f"generator partition with {len(blocks)} blocks")
    return GeneratorPartition(blocks=blocks)


class ReconstructionReport(Record):
    n: int
    expected: PointSet
    """E_n."""

    reconstructed: PointSet
    """The union of T_g^{-1}(P_D) over all blocks D containing (n, g)."""

    symmetric_difference_mass: Rational
    passed: bool


def reconstruct_and_verify(
    fs: FiniteSystem,
    gp: GeneratorPartition,
    allocations: Sequence[Allocation],
    sets: Sequence[Iterable[int]],
    n: int,
) -> ReconstructionReport:
    """Recover E_n from the generator partition and compare up to null sets."""
    es = _check_family(fs, allocations, sets)
    if not 1 <= n <= len(es):
        raise ArgumentError(f"set index {n} is not in 1..{len(es)}")
    rebuilt = set()
    for b in gp.blocks:
        for m, g in b.key:
            if m == n:
                rebuilt |= fs.preimage(g, b.points)
    expected = es[n - 1]
    diff = fs.mass(expected ^ rebuilt)
    return ReconstructionReport(
        n=n,
        expected=expected,
        reconstructed=frozenset(rebuilt),
        symmetric_difference_mass=diff,
        passed=diff == 0,
    )


################################################################
# orbit census


class OrbitRow(Record):
    points: List[int]
    size: int
    mass: Rational


class CensusReport(Record):
    """Orbits of a system, and whether all positive-mass orbits are finite."""

    system: str
    orbits: List[OrbitRow]
    all_finite: bool
    """Whether every orbit of positive mass is finite."""

    trivial_generator: bool
    """Whether the partition into points is already generating (all orbits finite)."""

    note: str = ""


def finite_orbit_census(system: AnySystem) -> CensusReport:
    """List the orbits of a finite system, or describe the orbits of a sampled one."""
    if isinstance(system, FiniteSystem):
        rows = [
            OrbitRow(points=sorted(o), size=len(o), mass=system.mass(o))
            for o in system.orbits()
        ]
        return CensusReport(
            system=f"finite {system.group_id}-system with {system.n_points} points",
            orbits=rows,
            all_finite=True,
            trivial_generator=True,
            note="all orbits are finite, the partition into points generates",
        )
    if system.orbits_infinite:
        return CensusReport(
            system=f"{system.kind.value} ({system.group_id})",
            orbits=[],
            all_finite=False,
            trivial_generator=False,
            note="infinite orbits by construction",
        )
    assert system.n is not None
    return CensusReport(
        system=f"{system.kind.value} ({system.group_id})",
        orbits=[
            OrbitRow(points=list(range(system.n)), size=system.n, mass=Fraction(1))
        ],
        all_finite=True,
        trivial_generator=True,
        note="a single finite orbit",
    )
