"""
Finite measure-preserving equivalence relations and class-respecting maps.

A relation on finitely many points is given by a class label per point. It
preserves the measure iff all points of a class carry the same mass: the
transposition of two points of one class is a partial isomorphism of the relation,
and it preserves the measure exactly when their masses agree.

For a map tau with (x, tau(x)) in the relation, transporting f along tau gives
f_tau(x), the sum of f(y) over the preimages y of x, and the integrals of f and
f_tau coincide. For f = 1 the expected number of preimages is 1.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Extra, validator

from .allocation import (
    Allocation,
    IdentityReport,
    table_allocation,
    transport,
    verify_allocation_identity,
)
from .config import conf
from .errors import ArgumentError, InternalConsistencyError, PreconditionError
from .group import GroupElement
from .log import child
from .system import FiniteSystem, PointFunction, PointSet, integral, point_values
from .util import ExtendedRational, Rational, Record, ext_sum

log = child(__name__)


class EquivRelation(BaseModel):
    """Equivalence relation on points 0..n-1, given by a class label per point."""

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    masses: List[Rational]
    class_of: List[int]
    """Class label of each point (labels are arbitrary integers)."""

    @validator("masses")
    def check_masses(cls, masses):
        if not masses:
            raise ValueError("a relation needs at least one point")
        if any(m < 0 for m in masses):
            raise ValueError("masses must be non-negative")
        total = sum(masses, Fraction(0))
        if total != 1:
            raise ValueError(f"masses must sum to 1, but sum to {total}")
        return masses

    @validator("class_of")
    def check_labels(cls, labels, values):
        if "masses" in values and len(labels) != len(values["masses"]):
            raise ValueError(
                f"{len(labels)} class labels for {len(values['masses'])} points"
            )
        return labels

    @classmethod
    def from_classes(
        cls,
        classes: Sequence[Sequence[int]],
        masses: Optional[Sequence[Union[Fraction, int, str]]] = None,
    ) -> EquivRelation:
        """Build a relation from its classes (uniform masses by default)."""
        n = sum(len(c) for c in classes)
        labels = [-1] * n
        for i, c in enumerate(classes):
            for x in c:
                if not 0 <= x < n or labels[x] >= 0:
                    raise ArgumentError(f"classes do not partition 0..{n - 1}")
                labels[x] = i
        if masses is None:
            masses = [Fraction(1, n)] * n
        return cls(masses=list(masses), class_of=labels)

    @property
    def n_points(self) -> int:
        return len(self.masses)

    @property
    def points(self) -> range:
        return range(self.n_points)

    def classes(self) -> List[PointSet]:
        """The classes, ordered by smallest point."""
        by_label: Dict[int, List[int]] = {}
        for x, c in enumerate(self.class_of):
            by_label.setdefault(c, []).append(x)
        return sorted((frozenset(c) for c in by_label.values()), key=min)

    def related(self, x: int, y: int) -> bool:
        return self.class_of[x] == self.class_of[y]


class TauMap(BaseModel):
    """A map of the points into themselves, given by its table."""

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    table: List[int]

    def __call__(self, x: int) -> int:
        return self.table[x]

    def preimages(self) -> Dict[int, List[int]]:
        """For each point, the points mapped to it."""
        ret: Dict[int, List[int]] = {x: [] for x in range(len(self.table))}
        for y, x in enumerate(self.table):
            ret[x].append(y)
        return ret

    def is_injective(self) -> bool:
        return len(set(self.table)) == len(self.table)

    def image(self) -> PointSet:
        return frozenset(self.table)


################################################################
# validity


class RelationVerdict(Record):
    valid: bool
    offending_class: Optional[List[int]] = None
    offending_masses: Optional[List[Rational]] = None
    message: str = ""


def validate_relation(rel: EquivRelation) -> RelationVerdict:
    """A relation preserves the measure iff all points of each class have equal mass."""
    for c in rel.classes():
        masses = {rel.masses[x] for x in c}
        if len(masses) > 1:
            points = sorted(c)
            return RelationVerdict(
                valid=False,
                offending_class=points,
                offending_masses=[rel.masses[x] for x in points],
                message=f"class {points} has points of different mass",
            )
    return RelationVerdict(valid=True)


def _check_tau(rel: EquivRelation, tau: TauMap) -> None:
    verdict = validate_relation(rel)
    if not verdict.valid:
        raise PreconditionError(f"relation does not preserve the measure: {verdict.message}")
    if len(tau.table) != rel.n_points:
        raise PreconditionError(
            f"tau has {len(tau.table)} entries for {rel.n_points} points"
        )
    for x, y in enumerate(tau.table):
        if not 0 <= y < rel.n_points:
            raise PreconditionError(f"tau({x}) = {y} is not a point")
        if not rel.related(x, y):
            raise PreconditionError(f"tau({x}) = {y} leaves the class of {x}")


################################################################
# transport along tau


class RelationKacReport(Record):
    """Integral of f and of its transport f_tau, and the mean number of preimages."""

    lhs: ExtendedRational
    """Integral of f_tau."""

    rhs: ExtendedRational
    """Integral of f."""

    preimage_integral: Rational
    """Integral of the number of preimages (should be 1)."""

    passed: bool


def transport_tau(
    rel: EquivRelation, tau: TauMap, f: PointFunction = 1
) -> Dict[int, ExtendedRational]:
    """f_tau(x) = sum of f(y) over all y with tau(y) = x."""
    _check_tau(rel, tau)
    values = point_values(rel, f)
    return {x: ext_sum(values[y] for y in ys) for x, ys in tau.preimages().items()}


def verify_relation_kac(
    rel: EquivRelation, tau: TauMap, f: PointFunction = 1
) -> RelationKacReport:
    """Check exactly that f and f_tau have the same integral and tau has 1 preimage on average."""
    f_tau = transport_tau(rel, tau, f)
    lhs = integral(rel, f_tau)
    rhs = integral(rel, dict(enumerate(point_values(rel, f))))
    counts = sum(
        (rel.masses[x] * len(ys) for x, ys in tau.preimages().items()), Fraction(0)
    )
    log.debug(f"relation transport: {lhs} vs {rhs}, preimages {counts}")
    return RelationKacReport(
        lhs=lhs, rhs=rhs, preimage_integral=counts, passed=lhs == rhs and counts == 1
    )


class PushforwardReport(Record):
    injective: bool
    preserved: bool
    """Whether mu(tau^{-1}({x})) = mu({x}) for every point x."""

    passed: bool


def pushforward_preserved(rel: EquivRelation, tau: TauMap) -> PushforwardReport:
    """Injective class-respecting maps are elements of the full group and preserve mu."""
    _check_tau(rel, tau)
    preserved = all(
        sum((rel.masses[y] for y in ys), Fraction(0)) == rel.masses[x]
        for x, ys in tau.preimages().items()
    )
    injective = tau.is_injective()
    return PushforwardReport(
        injective=injective, preserved=preserved, passed=preserved or not injective
    )


################################################################
# orbit relations of finite systems


def orbit_relation(fs: FiniteSystem) -> EquivRelation:
    """The relation whose classes are the orbits of the action."""
    labels = [0] * fs.n_points
    for i, orbit in enumerate(fs.orbits()):
        for x in orbit:
            labels[x] = i
    rel = EquivRelation(masses=list(fs.masses), class_of=labels)
    verdict = validate_relation(rel)
    if not verdict.valid:
        raise InternalConsistencyError(
            f"orbit relation does not preserve the measure: {verdict.message}"
        )
    return rel


def tau_to_allocation(fs: FiniteSystem, tau: TauMap) -> Tuple[PointSet, Allocation]:
    """
    Realize a class-respecting tau of the orbit relation as an allocation.

    A = tau(X) and kappa(x) is the first element g of the norm-lex enumeration with
    T_g(x) = tau(x), so that T_kappa = tau.
    """
    _check_tau(orbit_relation(fs), tau)
    target = tau.image()
    e = fs.group.enumeration()
    budget = conf().kacbench.budget
    table: Dict[int, GroupElement] = {}
    for x in fs.points:
        for i, g in enumerate(e):
            if fs.apply(g, x) == tau(x):
                table[x] = g
                break
            if i + 1 >= budget:
                raise InternalConsistencyError(f"tau({x}) is not reachable from {x}")
        else:
            raise InternalConsistencyError(f"tau({x}) is not reachable from {x}")
    return target, table_allocation(fs, target, table)


def first_return_tau(fs: FiniteSystem, a) -> TauMap:
    """
    tau(x) = T^{-n}(x) with n >= 1 least such that T^{-n}(x) is in A.

    Points on null orbits that miss A are fixed.
    """
    if not fs.is_z_action:
        raise ArgumentError(f"first return maps need a Z-action, not {fs.group_id}")
    target = fs.point_set(a)
    back = fs.group.element(-1)
    table = []
    for x in fs.points:
        y = x
        for _ in range(fs.n_points):
            y = fs.apply(back, y)
            if y in target:
                table.append(y)
                break
        else:
            if fs.mass(fs.orbit(x)) > 0:
                raise PreconditionError(f"the orbit of {x} has positive mass and misses A")
            table.append(x)
    return TauMap(table=table)


class BridgeReport(Record):
    """Transport along tau compared with transport along the allocation it induces."""

    target: List[int]
    relation: RelationKacReport
    allocation: IdentityReport
    matches: bool
    """Whether f_tau and f_kappa agree on every point of A."""

    passed: bool


def check_bridge(fs: FiniteSystem, tau: TauMap, f: PointFunction = 1) -> BridgeReport:
    """Run both Kac identities for tau and compare the transported functions."""
    rel = orbit_relation(fs)
    target, alloc = tau_to_allocation(fs, tau)
    f_tau = transport_tau(rel, tau, f)
    f_kappa = transport(fs, alloc, f)
    matches = all(f_tau[x] == f_kappa[x] for x in target) and all(
        f_tau[x] == 0 for x in fs.points if x not in target
    )
    rel_report = verify_relation_kac(rel, tau, f)
    alloc_report = verify_allocation_identity(fs, target, alloc, f)
    return BridgeReport(
        target=sorted(target),
        relation=rel_report,
        allocation=alloc_report,
        matches=matches,
        passed=matches and rel_report.passed and alloc_report.passed,
    )
