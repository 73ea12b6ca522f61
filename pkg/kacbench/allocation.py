"""
Return times, allocations, allocation cells and Kac functions.

An A-allocation assigns to every point x a group element kappa(x) such that
T_kappa(x)(x) lies in A. Its cell at a point x of A is

    B(x) = {g : kappa(T_g^{-1}(x)) = g},

and transporting a function f along kappa gives f_kappa(x), the sum of f(y) over all
y with T_kappa(y)(y) = x. For every allocation of a sweep-out set A the integral of
f_kappa over A equals the integral of f over X, and for f = 1 the cells have mean
size 1 on A.

On finite systems all of this is computed exactly (tables of kappa and of its
inverse, `Fraction` arithmetic). On sampled systems allocations are evaluated
lazily per point within an evaluation budget, and the identities are checked by
Monte Carlo. Running out of budget raises an `AbstentionError`, never a guess.
"""
from __future__ import annotations

import math
from enum import Enum
from fractions import Fraction
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Union,
)

import numpy as np

from .config import conf
from .errors import (
    AbstentionError,
    ArgumentError,
    InfiniteCellError,
    InconclusiveError,
    InvalidAllocationError,
    NoReturnError,
    PreconditionError,
    UnsupportedError,
)
from .estimate import DEFAULT_SAMPLES, Estimate, Integrand, mc_estimate
from .group import Enumeration, Group, GroupElement
from .log import child
from .system import (
    AnySystem,
    FiniteSystem,
    PointFunction,
    PointSet,
    SampledSet,
    SampledSystem,
    integral,
    point_values,
)
from .util import ExtendedRational, ExtRational, Rational, Record, ext_sum
from .voronoi import LatticeCell, greedy_cell, hitting_set

log = child(__name__)

Target = Union[Iterable[int], SampledSet]
"""A set of points of a finite system, or a sampled set."""


################################################################
# helpers


def _budget(budget: Optional[int]) -> int:
    return conf().kacbench.budget if budget is None else budget


def _target(system: AnySystem, a: Target):
    """Validate a target set against the system."""
    if isinstance(system, FiniteSystem):
        if isinstance(a, SampledSet):
            raise ArgumentError("finite systems take sets of point indices")
        return system.point_set(a)
    if not isinstance(a, SampledSet):
        raise ArgumentError("sampled systems take interval, box, cylinder or residue sets")
    system.check_set(a)
    return a


def _measure(system: AnySystem, target) -> Fraction:
    if isinstance(system, FiniteSystem):
        return system.mass(target)
    return target.measure()


def _check_positive(system: AnySystem, target) -> None:
    if _measure(system, target) == 0:
        raise PreconditionError("the target set has measure zero")


def _check_z(system: AnySystem) -> None:
    if system.group != Group.lattice(1):
        raise ArgumentError(f"return times need a Z-action, not a {system.group_id}-action")


def _contains(target: SampledSet, x) -> bool:
    return bool(target.contains(np.asarray([x]))[0])


################################################################
# return times


def return_times(
    ss: SampledSystem,
    a: SampledSet,
    points: np.ndarray,
    budget: Optional[int] = None,
    backward: bool = False,
) -> np.ndarray:
    """
    First return times to A of a batch of points of a sampled Z-system.

    Entry i is the least n >= 1 with T^n(x_i) in A (T^-n if `backward`), or NaN if
    there is none within `budget` steps. Every iterate is computed from x_i directly.
    """
    _check_z(ss)
    budget = _budget(budget)
    pts = np.asarray(points)
    ret = np.full(len(pts), np.nan)
    todo = np.arange(len(pts))
    sign = -1 if backward else 1
    for n in range(1, budget + 1):
        if not len(todo):
            break
        hit = a.contains(ss.iterate(pts[todo], sign * n))
        ret[todo[hit]] = n
        todo = todo[~hit]
    if len(todo):
        log.debug(f"{len(todo)} of {len(pts)} points did not return within {budget} steps")
    return ret


def return_time(
    system: AnySystem, a: Target, x, budget: Optional[int] = None
) -> int:
    """Least n >= 1 with T^n(x) in A."""
    _check_z(system)
    target = _target(system, a)
    _check_positive(system, target)
    if isinstance(system, FiniteSystem):
        one = system.group.element(1)
        y = x
        for n in range(1, system.n_points + 1):
            y = system.apply(one, y)
            if y in target:
                return n
        raise NoReturnError(x)

    budget = _budget(budget)
    r = return_times(system, target, np.asarray([x]), budget)[0]
    if math.isnan(r):
        raise AbstentionError(f"point {x} did not return within {budget} steps", budget)
    return int(r)


def induced_map(system: AnySystem, a: Target, x, budget: Optional[int] = None):
    """The first return map T_A(x) = T^{r_A(x)}(x)."""
    r = return_time(system, a, x, budget)
    return system.apply(system.group.element(r), x)


class InducedMapReport(Record):
    """Outcome of checking that the first return map is measure preserving on A."""

    target_mass: Rational
    images: Dict[int, int]
    """T_A as a table on A."""

    bijective: bool
    mass_preserving: bool
    """Whether every point of A is mapped to a point of the same mass."""

    passed: bool


def induced_map_is_measure_preserving(fs: FiniteSystem, a: Target) -> InducedMapReport:
    """Check exactly that T_A permutes A and preserves the conditional masses."""
    target = _target(fs, a)
    images = {x: induced_map(fs, target, x) for x in sorted(target)}
    bijective = set(images.values()) == set(target)
    preserving = all(fs.masses[y] == fs.masses[x] for x, y in images.items())
    return InducedMapReport(
        target_mass=fs.mass(target),
        images=images,
        bijective=bijective,
        mass_preserving=preserving,
        passed=bijective and preserving,
    )


class IdentityReport(Record):
    """
    Both sides of an integral identity.

    Finite systems give exact values, sampled systems give estimates.
    """

    exact: bool
    lhs: Optional[ExtendedRational] = None
    rhs: Optional[ExtendedRational] = None
    lhs_estimate: Optional[Estimate] = None
    rhs_estimate: Optional[Estimate] = None
    passed: bool


class ReturnTimeReport(IdentityReport):
    """The classical identity: the integral of r_A over A is 1."""

    target_mass: Rational
    mean_return_time: Optional[ExtendedRational] = None
    """Exact mean of r_A with respect to the conditional measure on A."""

    mean_return_time_estimate: Optional[float] = None
    expected_mean: Rational
    """1 / mu(A)."""


def verify_return_time_identity(
    system: AnySystem,
    a: Target,
    n: Optional[int] = None,
    seed: Optional[int] = None,
    budget: Optional[int] = None,
) -> ReturnTimeReport:
    """
    Check that the integral of the return time over A equals 1.

    Exact on finite Z-systems (A must be sweep-out), a Monte Carlo estimate that
    must accept 1 on sampled Z-systems.
    """
    _check_z(system)
    target = _target(system, a)
    _check_positive(system, target)
    mass = _measure(system, target)

    if isinstance(system, FiniteSystem):
        if not system.is_sweep_out(target):
            raise PreconditionError("the target set is not sweep-out")
        times = {x: return_time(system, target, x) for x in target}
        lhs = integral(system, times)
        return ReturnTimeReport(
            exact=True,
            lhs=lhs,
            rhs=Fraction(1),
            passed=lhs == 1,
            target_mass=mass,
            mean_return_time=lhs / mass,
            expected_mean=1 / mass,
        )

    budget = _budget(budget)

    def integrand(points: np.ndarray) -> np.ndarray:
        inside = target.contains(points)
        ret = np.zeros(len(points))
        ret[inside] = return_times(system, target, points[inside], budget)
        return ret

    est = mc_estimate(system, integrand, n or DEFAULT_SAMPLES, seed)
    log.info(f"integral of the return time: {est.mean} +- {est.stderr}")
    return ReturnTimeReport(
        exact=False,
        rhs=Fraction(1),
        lhs_estimate=est,
        passed=est.accepts(1),
        target_mass=mass,
        mean_return_time_estimate=est.mean / float(mass),
        expected_mean=1 / mass,
    )


################################################################
# allocations


class AllocationStrategy(str, Enum):
    """How an allocation chooses kappa(x)."""

    GREEDY = "greedy"
    """First element of an enumeration that moves x into A."""

    TABLE = "table"
    """Explicitly given values (finite systems)."""

    FORWARD_HITTING = "forward-hitting"
    """Least n >= 0 with T^n(x) in A (Z-actions)."""


class Allocation:
    """
    An A-allocation kappa, evaluated lazily per point.

    Every evaluation checks that T_kappa(x)(x) lies in A. On finite systems the
    values are memoized, and kappa is defined on the saturation of A (the points
    whose orbit meets A).
    """

    def __init__(
        self,
        system: AnySystem,
        target,
        strategy: AllocationStrategy,
        *,
        enumeration: Optional[Enumeration] = None,
        table: Optional[Mapping[int, GroupElement]] = None,
        budget: Optional[int] = None,
    ):
        self.system = system
        self.target = target
        self.strategy = strategy
        self.enumeration = enumeration
        self.budget = _budget(budget)
        self._memo: Dict[int, GroupElement] = dict(table or {})
        self._inverse: Optional[Dict[int, List[int]]] = None
        self._domain: Optional[PointSet] = None
        if isinstance(system, FiniteSystem):
            self._domain = system.saturation(target)

    def __repr__(self) -> str:
        return f"Allocation({self.strategy.value}, {self.system.group_id})"

    @property
    def group(self) -> Group:
        return self.system.group

    @property
    def domain(self) -> PointSet:
        """Points of a finite system on which kappa is defined."""
        if self._domain is None:
            raise ArgumentError("only allocations on finite systems have a point domain")
        if self.strategy == AllocationStrategy.TABLE:
            return frozenset(self._memo)
        return self._domain

    def __call__(self, x) -> GroupElement:
        """Return kappa(x)."""
        if isinstance(self.system, FiniteSystem):
            if x not in self._memo:
                self._memo[x] = self._evaluate_finite(x)
            g = self._memo[x]
            if self.system.apply(g, x) not in self.target:
                raise InvalidAllocationError(f"kappa({x}) = {g} does not move {x} into A")
            return g

        g = self._evaluate_sampled(x)
        if not _contains(self.target, self.system.apply(g, np.asarray([x]))[0]):
            raise InvalidAllocationError(f"kappa({x}) = {g} does not move {x} into A")
        return g

    def image(self, x):
        """T_kappa(x)(x), a point of A."""
        return self.system.apply(self(x), x)

    # ---- finite systems ----

    def _evaluate_finite(self, x: int) -> GroupElement:
        fs = self.system
        assert isinstance(fs, FiniteSystem) and self._domain is not None
        fs.point_set([x])
        if self.strategy == AllocationStrategy.TABLE:
            raise ArgumentError(f"allocation table has no entry for point {x}")
        if x not in self._domain:
            raise NoReturnError(x)

        if self.strategy == AllocationStrategy.FORWARD_HITTING:
            one = fs.group.element(1)
            y = x
            for n in range(fs.n_points):
                if y in self.target:
                    return fs.group.element(n)
                y = fs.apply(one, y)
            raise NoReturnError(x)

        assert self.enumeration is not None
        for i, g in enumerate(self.enumeration):
            if fs.apply(g, x) in self.target:
                return g
            if i + 1 >= self.budget:
                raise AbstentionError(
                    f"no element of the first {self.budget} hits A from {x}", self.budget
                )
        raise NoReturnError(x)

    def table(self) -> Dict[int, GroupElement]:
        """kappa on all points of its domain (finite systems)."""
        return {x: self(x) for x in sorted(self.domain)}

    def inverse_table(self) -> Dict[int, List[int]]:
        """For each point x of A, the points y with T_kappa(y)(y) = x."""
        if self._inverse is None:
            inv: Dict[int, List[int]] = {x: [] for x in sorted(self.target)}
            for y, g in self.table().items():
                inv[self.system.apply(g, y)].append(y)
            self._inverse = inv
        return self._inverse

    # ---- sampled systems ----

    def _evaluate_sampled(self, x) -> GroupElement:
        ss = self.system
        assert isinstance(ss, SampledSystem)
        if ss.group.rank == 1:
            k = self.values(np.asarray([x]))[0]
            if math.isnan(k):
                raise AbstentionError(f"kappa({x}) not found within budget", self.budget)
            return ss.group.element(int(k))

        # scan the enumeration in blocks of growing size
        assert self.enumeration is not None
        start, size = 0, 64
        while start < self.budget:
            stop = min(self.budget, start + size)
            ws = self.enumeration.coords_array(stop)[start:]
            hit = self.target.contains(ss.translates(x, ws))
            if hit.any():
                return ss.group.element(ws[int(np.argmax(hit))].tolist())
            start, size = stop, 2 * size
        raise AbstentionError(f"kappa({x}) not found within budget", self.budget)

    def values(self, points: np.ndarray) -> np.ndarray:
        """kappa on a batch of points of a sampled Z-system (NaN: over budget)."""
        ss = self.system
        if not isinstance(ss, SampledSystem) or ss.group.rank != 1:
            raise ArgumentError("batch evaluation needs a sampled Z-system")
        pts = np.asarray(points)
        ret = np.zeros(len(pts))
        out = ~self.target.contains(pts)
        if self.strategy == AllocationStrategy.GREEDY:
            # norm-lex order on Z is 0, -1, 1, -2, 2, ...
            steps = self.budget // 2
            p = return_times(ss, self.target, pts[out], steps)
            q = return_times(ss, self.target, pts[out], steps, backward=True)
            p[np.isnan(p)] = np.inf
            q[np.isnan(q)] = np.inf
            ret[out] = np.where(q <= p, -q, p)
        else:
            ret[out] = return_times(ss, self.target, pts[out], self.budget)
        ret[~np.isfinite(ret)] = np.nan
        return ret

    def cell_bounds(self, points: np.ndarray, budget: Optional[int] = None):
        """
        Cells on a sampled Z-system are integer intervals [lo, hi).

        Returns the float arrays lo and hi for a batch of points of A (NaN where a
        return time exceeds the budget).
        """
        ss = self.system
        if not isinstance(ss, SampledSystem) or ss.group.rank != 1:
            raise ArgumentError("interval cells need a sampled Z-system")
        budget = budget or self.budget
        pts = np.asarray(points)
        q = return_times(ss, self.target, pts, budget, backward=True)
        if self.strategy == AllocationStrategy.GREEDY:
            # y = T^g(x) goes back to x iff it is strictly closer to x than to the
            # next hit ahead, or weakly closer to x than to the previous hit
            p = return_times(ss, self.target, pts, budget)
            return -np.floor_divide(p, 2), np.floor_divide(q + 1, 2)
        return np.zeros(len(pts)), q


def greedy_allocation(
    system: AnySystem,
    a: Target,
    e: Optional[Enumeration] = None,
    budget: Optional[int] = None,
) -> Allocation:
    """kappa(x) = g(l(x)) with l(x) the least n such that T_g(n)(x) is in A."""
    target = _target(system, a)
    e = e or system.group.enumeration()
    if e.group != system.group:
        raise ArgumentError(f"enumeration of {e.group.id} for a {system.group_id}-system")
    if isinstance(system, FiniteSystem):
        if not system.is_sweep_out(target):
            raise PreconditionError("greedy allocations need a sweep-out target set")
    else:
        _check_positive(system, target)
        if e.order_rule != "norm-lex":
            raise UnsupportedError("sampled systems use the norm-lex enumeration")
    return Allocation(system, target, AllocationStrategy.GREEDY, enumeration=e, budget=budget)


def forward_hitting_allocation(
    system: AnySystem, a: Target, budget: Optional[int] = None
) -> Allocation:
    """kappa(x) = least n >= 0 with T^n(x) in A, on a Z-action."""
    _check_z(system)
    target = _target(system, a)
    if isinstance(system, FiniteSystem):
        if not system.is_sweep_out(target):
            raise PreconditionError("forward hitting needs a sweep-out target set")
    else:
        _check_positive(system, target)
    return Allocation(system, target, AllocationStrategy.FORWARD_HITTING, budget=budget)


def table_allocation(
    fs: FiniteSystem,
    a: Target,
    table: Mapping[int, Union[GroupElement, int, Sequence[int]]],
) -> Allocation:
    """
    An explicitly given allocation of a finite system.

    The table must cover every point of positive mass; all entries are checked.
    """
    if not isinstance(fs, FiniteSystem):
        raise ArgumentError("table allocations are only available on finite systems")
    target = _target(fs, a)
    values = {}
    for x, g in table.items():
        fs.point_set([x])
        values[int(x)] = g if isinstance(g, GroupElement) else fs.group.element(g)
        if values[int(x)].group != fs.group:
            raise ArgumentError(f"{g!r} is not an element of {fs.group_id}")
    missing = sorted(fs.support() - set(values))
    if missing:
        raise ArgumentError(f"allocation table has no entry for points {missing}")
    ret = Allocation(fs, target, AllocationStrategy.TABLE, table=values)
    ret.table()  # validates every entry
    return ret


################################################################
# cells


class Cell(Record):
    """A finite set of group elements: the cell B(x) of an allocation."""

    group_id: str
    elements: FrozenSet[GroupElement]

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, g: GroupElement) -> bool:
        return g in self.elements

    def sorted(self) -> List[GroupElement]:
        """Elements in norm-lex order."""
        return sorted(self.elements)

    def lattice_cell(self) -> LatticeCell:
        """The cell as a set of integer vectors (for lattice groups)."""
        rank = Group.parse(self.group_id).rank
        return LatticeCell.of((g.coords for g in self.elements), rank)


def _cell_of(group: Group, elements: Iterable[GroupElement]) -> Cell:
    return Cell(group_id=group.id, elements=frozenset(elements))


def cell(system: AnySystem, alloc: Allocation, x, budget: Optional[int] = None) -> Cell:
    """
    The cell B(x) = {g : kappa(T_g^{-1}(x)) = g}, empty if x is not in A.

    On finite systems it is read off the inverse table of T_kappa. On sampled
    Z-systems it is an integer interval given by the return times of x, on Z^d it is
    read off a hitting window whose radius is doubled until it certifies the cell.
    """
    if alloc.system is not system:
        raise ArgumentError("the allocation belongs to another system")
    group = system.group
    if isinstance(system, FiniteSystem):
        system.point_set([x])
        if x not in alloc.target:
            return _cell_of(group, ())
        return _cell_of(group, (alloc(y) for y in alloc.inverse_table()[x]))

    if not _contains(alloc.target, x):
        return _cell_of(group, ())
    budget = budget or alloc.budget
    if group.rank == 1:
        lo, hi = alloc.cell_bounds(np.asarray([x]), budget)
        if math.isnan(lo[0]) or math.isnan(hi[0]):
            raise InfiniteCellError(f"cell of {x} exceeds the budget of {budget}", budget)
        return _cell_of(group, (group.element(g) for g in range(int(lo[0]), int(hi[0]))))
    return _cell_of(group, (group.element(v) for v in _lattice_cell(alloc, x, budget)))


def _lattice_cell(alloc: Allocation, x, budget: int) -> List[tuple]:
    ss = alloc.system
    d = ss.group.rank
    if alloc.strategy != AllocationStrategy.GREEDY:
        raise UnsupportedError("cells on Z^d are computed for greedy allocations")
    radius = conf().kacbench.hit_radius
    while (2 * radius + 1) ** d <= budget:
        hs = hitting_set(ss, alloc.target, x, radius)
        try:
            return sorted(greedy_cell(hs).points)
        except InconclusiveError:
            log.debug(f"hitting radius {radius} does not certify the cell, doubling")
            radius *= 2
    raise InfiniteCellError(
        f"cell of {x} could not be certified finite within the budget of {budget}", budget
    )


def cell_sizes(ss: SampledSystem, alloc: Allocation, points: np.ndarray) -> np.ndarray:
    """|B(x)| for a batch of points of a sampled Z-system (0 off A, NaN over budget)."""
    pts = np.asarray(points)
    inside = alloc.target.contains(pts)
    ret = np.zeros(len(pts))
    lo, hi = alloc.cell_bounds(pts[inside])
    ret[inside] = hi - lo
    return ret


################################################################
# transport


def transport(system: AnySystem, alloc: Allocation, f):
    """
    The transported function f_kappa on A.

    On finite systems f is a `PointFunction` and the result maps each point of A to
    its exact value. On sampled systems f is a vectorized integrand and the result is
    a vectorized integrand (0 off A, NaN where a cell exceeds the budget).
    """
    if alloc.system is not system:
        raise ArgumentError("the allocation belongs to another system")
    if isinstance(system, FiniteSystem):
        values = point_values(system, f)
        return {
            x: ext_sum(values[y] for y in ys) for x, ys in alloc.inverse_table().items()
        }
    if system.group.rank == 1:
        return _transport_z(system, alloc, f)
    return _transport_lattice(system, alloc, f)


def _transport_z(ss: SampledSystem, alloc: Allocation, f: Integrand) -> Integrand:
    def integrand(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points)
        inside = alloc.target.contains(pts)
        xs = pts[inside]
        lo, hi = alloc.cell_bounds(xs)
        ok = ~np.isnan(lo) & ~np.isnan(hi)
        acc = np.zeros(len(xs))
        if ok.any():
            for g in range(int(lo[ok].min()), int(hi[ok].max())):
                sel = ok & (lo <= g) & (g < hi)
                if sel.any():
                    acc[sel] += f(ss.iterate(xs[sel], -g))
        acc[~ok] = np.nan
        ret = np.zeros(len(pts))
        ret[inside] = acc
        return ret

    return integrand


def _transport_lattice(ss: SampledSystem, alloc: Allocation, f: Integrand) -> Integrand:
    def integrand(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points)
        inside = alloc.target.contains(pts)
        ret = np.zeros(len(pts))
        for i in np.flatnonzero(inside):
            try:
                vs = _lattice_cell(alloc, pts[i], alloc.budget)
            except AbstentionError:
                ret[i] = np.nan
                continue
            ret[i] = f(ss.translates(pts[i], -np.array(vs, dtype=np.int64))).sum()
        return ret

    return integrand


def verify_allocation_identity(
    system: AnySystem,
    a: Target,
    alloc: Allocation,
    f,
    n: Optional[int] = None,
    seed: Optional[int] = None,
) -> IdentityReport:
    """Compare the integral of f_kappa over A with the integral of f over X."""
    target = _target(system, a)
    if target != alloc.target:
        raise ArgumentError("the allocation was built for another target set")
    if isinstance(system, FiniteSystem):
        lhs = integral(system, transport(system, alloc, f))
        rhs = integral(system, dict(enumerate(point_values(system, f))))
        log.debug(f"allocation identity: {lhs} vs {rhs}")
        return IdentityReport(exact=True, lhs=lhs, rhs=rhs, passed=lhs == rhs)

    n = n or DEFAULT_SAMPLES
    lhs_est = mc_estimate(system, transport(system, alloc, f), n, seed, stream=1)
    rhs_est = mc_estimate(system, f, n, seed, stream=2)
    log.info(
        f"allocation identity: {lhs_est.mean} +- {lhs_est.stderr} "
        f"vs {rhs_est.mean} +- {rhs_est.stderr}"
    )
    return IdentityReport(
        exact=False,
        lhs_estimate=lhs_est,
        rhs_estimate=rhs_est,
        passed=lhs_est.overlaps(rhs_est),
    )


################################################################
# Kac functions


class KacFunction(Record):
    """
    A list of shapes B_1, B_2, ... and the index phi(x) of the shape of each point.

    Only points of A with positive mass carry an index. The translates
    T_g^{-1}({x : phi(x) = n}) over all n and all g in B_n partition X up to null sets.
    """

    group_id: str
    shapes: List[FrozenSet[GroupElement]]
    """Distinct cells in order of first occurrence."""

    phi: Dict[int, int]
    """1-based shape index of each positive-mass point of A."""

    codes: Optional[Dict[int, int]] = None
    """Universal indices: the sum of 2^index_of(g) over the shape of each point."""

    def shape(self, x: int) -> FrozenSet[GroupElement]:
        return self.shapes[self.phi[x] - 1]

    def size(self, x: int) -> int:
        return len(self.shape(x))


def shape_code(e: Enumeration, shape: Iterable[GroupElement]) -> int:
    """Index of a finite subset of the group in the fixed enumeration of all of them."""
    return sum(1 << e.index_of(g) for g in set(shape))


def kac_function(
    fs: FiniteSystem, a: Target, alloc: Allocation, universal: bool = False
) -> KacFunction:
    """Collect the cells of an allocation into a Kac function."""
    target = _target(fs, a)
    if target != alloc.target:
        raise ArgumentError("the allocation was built for another target set")
    shapes: List[FrozenSet[GroupElement]] = []
    index: Dict[FrozenSet[GroupElement], int] = {}
    phi: Dict[int, int] = {}
    for x in sorted(target):
        if fs.masses[x] == 0:
            continue
        b = cell(fs, alloc, x).elements
        if b not in index:
            shapes.append(b)
            index[b] = len(shapes)
        phi[x] = index[b]
    codes = None
    if universal:
        e = fs.group.enumeration()
        codes = {x: shape_code(e, shapes[i - 1]) for x, i in phi.items()}
    log.debug(f"Kac function with {len(shapes)} shapes on {len(phi)} points")
    return KacFunction(group_id=fs.group_id, shapes=shapes, phi=phi, codes=codes)


class PartitionReport(Record):
    """Outcome of checking that the translates of a Kac function partition X."""

    overlaps: List[int]
    """Points covered more than once."""

    uncovered: List[int]
    """Positive-mass points covered by no translate."""

    integral: Rational
    """Integral of |B_phi| over A."""

    identity_in_shapes: bool
    passed: bool


def check_kac_partition(fs: FiniteSystem, kf: KacFunction) -> PartitionReport:
    """Check that the sets T_g^{-1}(x), x in A, g in B_phi(x), are disjoint and exhaustive."""
    seen: Dict[int, int] = {}
    for x in kf.phi:
        for g in kf.shape(x):
            y = fs.apply_inverse(g, x)
            seen[y] = seen.get(y, 0) + 1
    overlaps = sorted(y for y, k in seen.items() if k > 1)
    uncovered = sorted(fs.support() - set(seen))
    integral = sum((fs.masses[x] * kf.size(x) for x in kf.phi), Fraction(0))
    identity = fs.group.identity()
    return PartitionReport(
        overlaps=overlaps,
        uncovered=uncovered,
        integral=integral,
        identity_in_shapes=all(identity in s for s in kf.shapes),
        passed=not overlaps and not uncovered,
    )


class TailBoundRow(Record):
    n: int
    measure: Rational
    """mu(x in A : |B_phi(x)| >= n)."""

    bound: Rational
    ok: bool


class TailBoundReport(Record):
    rows: List[TailBoundRow]
    passed: bool


def tail_bound_check(fs: FiniteSystem, a: Target, kf: KacFunction) -> TailBoundReport:
    """Check mu(|B_phi| >= n) <= 1/n exactly, for n up to the largest cell size."""
    target = _target(fs, a)
    if not set(kf.phi) <= target:
        raise ArgumentError("the Kac function is defined outside of the target set")
    largest = max((kf.size(x) for x in kf.phi), default=0)
    rows = []
    for n in range(1, largest + 1):
        measure = sum((fs.masses[x] for x in kf.phi if kf.size(x) >= n), Fraction(0))
        bound = Fraction(1, n)
        rows.append(TailBoundRow(n=n, measure=measure, bound=bound, ok=measure <= bound))
    return TailBoundReport(rows=rows, passed=all(r.ok for r in rows))


def kac_function_transport(
    fs: FiniteSystem, kf: KacFunction, f: PointFunction, shapes: Optional[Set[int]] = None
) -> Dict[int, ExtRational]:
    """
    f_phi(x), the sum of f(T_g^{-1}(x)) over g in B_phi(x), on positive-mass points of A.

    With `shapes` (1-based indices) only points whose shape is selected contribute.
    """
    values = point_values(fs, f)
    ret: Dict[int, ExtRational] = {}
    for x, i in kf.phi.items():
        if shapes is not None and i not in shapes:
            ret[x] = Fraction(0)
            continue
        ret[x] = ext_sum(values[fs.apply_inverse(g, x)] for g in kf.shape(x))
    return ret


class TransportReport(Record):
    """Integral of f_phi over A compared with the integral of f."""

    lhs: ExtendedRational
    rhs: ExtendedRational
    complete: bool
    """Whether all shapes were used (then equality is expected)."""

    holds: bool
    matches_allocation: Optional[bool] = None
    """Whether f_phi agrees with f_kappa on positive-mass points of A."""

    passed: bool


def transport_inequality(
    fs: FiniteSystem,
    kf: KacFunction,
    f: PointFunction,
    shapes: Optional[Set[int]] = None,
    alloc: Optional[Allocation] = None,
) -> TransportReport:
    """
    Check that the integral of f_phi over A is at most the integral of f.

    For a sub-family of shapes the translates are disjoint but not exhaustive, which
    gives the inequality. With all shapes it is an equality, and f_phi must agree with
    the transport along the allocation the Kac function came from.
    """
    fphi = kac_function_transport(fs, kf, f, shapes)
    lhs = integral(fs, fphi)
    rhs = integral(fs, dict(enumerate(point_values(fs, f))))
    complete = shapes is None or set(kf.phi.values()) <= set(shapes)
    holds = lhs == rhs if complete else lhs <= rhs
    matches = None
    if alloc is not None:
        fk = transport(fs, alloc, f)
        matches = all(fphi[x] == fk[x] for x in kf.phi)
    return TransportReport(
        lhs=lhs,
        rhs=rhs,
        complete=complete,
        holds=holds,
        matches_allocation=matches,
        passed=holds and matches is not False,
    )


class ReturnCellsReport(Record):
    """|B(T_A(x))| = r_A(x) for the forward hitting allocation."""

    checked: int
    abstained: int = 0
    mismatches: List[int]
    """Points (finite systems) or sample indices (sampled systems) that disagree."""

    passed: bool


def check_return_time_cells(
    system: AnySystem,
    a: Target,
    alloc: Optional[Allocation] = None,
    n: int = 1000,
    seed: Optional[int] = None,
) -> ReturnCellsReport:
    """
    Check that the forward hitting cell at T_A(x) has r_A(x) elements.

    Exact for every positive-mass point of A on finite systems, on `n` sampled
    points (those falling into A are checked) on sampled systems.
    """
    target = _target(system, a)
    alloc = alloc or forward_hitting_allocation(system, target)
    if alloc.strategy != AllocationStrategy.FORWARD_HITTING:
        raise ArgumentError("return time cells belong to the forward hitting allocation")

    if isinstance(system, FiniteSystem):
        points = [x for x in sorted(target) if system.masses[x] > 0]
        bad = [
            x
            for x in points
            if len(cell(system, alloc, induced_map(system, target, x)))
            != return_time(system, target, x)
        ]
        return ReturnCellsReport(checked=len(points), mismatches=bad, passed=not bad)

    ss = system if seed is None else system.with_seed(seed)
    pts = ss.sample(3, n)
    idx = np.flatnonzero(target.contains(pts))
    xs = pts[idx]
    r = return_times(ss, target, xs, alloc.budget)
    ok = ~np.isnan(r)
    ys = np.array([ss.iterate(x, int(k)) for x, k in zip(xs[ok], r[ok])]).reshape(
        xs[ok].shape
    )
    sizes = np.full(len(xs), np.nan)
    sizes[ok] = cell_sizes(ss, alloc, ys)
    ok &= ~np.isnan(sizes)
    bad = [int(i) for i, s, k, good in zip(idx, sizes, r, ok) if good and s != k]
    return ReturnCellsReport(
        checked=int(ok.sum()),
        abstained=int((~ok).sum()),
        mismatches=bad,
        passed=not bad,
    )
