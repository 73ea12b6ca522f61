"""
Concrete probability-preserving group actions.

Two families are provided:

* `FiniteSystem`: finitely many points with exact rational masses, the group acting
  through one permutation per factor. Everything about these is decided exactly.
* `SampledSystem`: generative ergodic systems (irrational rotation, torus translation,
  binary odometer, cyclic shift) that can be sampled reproducibly and acted upon in
  vectorized form. Their sets (`IntervalSet`, `BoxSet`, `CylinderSet`, `ResidueSet`)
  know their measure in closed form.

Points of a finite system are the integers `0..n_points-1`, and its measurable
sets are frozensets of such points. Points of mass zero are ignored by the
predicates (statements hold "mod mu").
"""
from __future__ import annotations

import collections
from decimal import Decimal, localcontext
from enum import Enum
from fractions import Fraction
from typing import (
    Any,
    Callable,
    Deque,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from pydantic import BaseModel, Extra, Field, PrivateAttr, conint, root_validator, validator
from typing_extensions import Annotated, Literal, Protocol

from .errors import ArgumentError
from .group import Z, Group, GroupElement
from .log import child
from .util import ExtRational, Rational, ext_mul, ext_sum, parse_ext_rational

log = child(__name__)

PointSet = FrozenSet[int]
"""A measurable set of a finite system (points by index)."""


class UnionFind:
    """Disjoint set forest over the points of a finite system."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:  # path compression
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        x, y = self.find(x), self.find(y)
        if x == y:
            return
        if self.rank[x] < self.rank[y]:
            x, y = y, x
        elif self.rank[x] == self.rank[y]:
            self.rank[x] += 1
        self.parent[y] = x

    def classes(self) -> List[PointSet]:
        """Return the classes, ordered by their smallest element."""
        members: Dict[int, List[int]] = {}
        for x in range(len(self.parent)):
            members.setdefault(self.find(x), []).append(x)
        return sorted((frozenset(c) for c in members.values()), key=min)


def _cycles(perm: Sequence[int]) -> List[List[int]]:
    seen = [False] * len(perm)
    ret = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cycle = []
        x = start
        while not seen[x]:
            seen[x] = True
            cycle.append(x)
            x = perm[x]
        ret.append(cycle)
    return ret


class FiniteSystem(BaseModel):
    """
    A probability-preserving action of a group on finitely many points.

    The action is given by one permutation per factor of the group (the images of
    the points under the factor's unit generator). The permutations must preserve
    the masses pointwise, commute pairwise, and have order dividing the order of
    their factor when that factor is finite.
    """

    class Config:
        """Validated once, immutable afterwards."""

        extra = Extra.forbid
        allow_mutation = False

    group: Group
    """Acting group, e.g. 'Z', 'Z^2' or 'C5xC3'."""

    masses: List[Rational]
    """Exact probability masses of the points (non-negative, summing to 1)."""

    generators: List[List[int]]
    """For each factor of the group, the permutation realizing its unit generator."""

    _cycle: List[List[List[int]]] = PrivateAttr()
    """Per generator and point: the cycle containing the point."""

    _pos: List[List[int]] = PrivateAttr()
    """Per generator and point: the position of the point in its cycle."""

    @validator("masses")
    def check_masses(cls, masses):
        if not masses:
            raise ValueError("a system needs at least one point")
        if any(m < 0 for m in masses):
            raise ValueError("masses must be non-negative")
        total = sum(masses, Fraction(0))
        if total != 1:
            raise ValueError(f"masses must sum to 1, but sum to {total}")
        return masses

    @validator("generators")
    def check_generators(cls, gens, values):
        if "group" not in values or "masses" not in values:
            return gens  # reported already
        group: Group = values["group"]
        masses: List[Fraction] = values["masses"]
        n = len(masses)
        if len(gens) != group.rank:
            raise ValueError(
                f"{group.id} needs {group.rank} generator permutations, got {len(gens)}"
            )
        for k, perm in enumerate(gens):
            if sorted(perm) != list(range(n)):
                raise ValueError(f"generator {k} is not a permutation of 0..{n-1}")
            for x in range(n):
                if masses[perm[x]] != masses[x]:
                    raise ValueError(
                        f"generator {k} maps point {x} (mass {masses[x]}) "
                        f"to point {perm[x]} (mass {masses[perm[x]]})"
                    )
            order = group.factors[k]
            if order != Z:
                bad = [c for c in _cycles(perm) if order % len(c) != 0]
                if bad:
                    raise ValueError(
                        f"generator {k} has a cycle of length {len(bad[0])}, "
                        f"which does not divide the factor order {order}"
                    )
        for k in range(len(gens)):
            for j in range(k):
                a, b = gens[k], gens[j]
                x = next((x for x in range(n) if a[b[x]] != b[a[x]]), None)
                if x is not None:
                    raise ValueError(f"generators {j} and {k} do not commute at {x}")
        return gens

    def __init__(self, **data):
        super().__init__(**data)
        cycle: List[List[List[int]]] = []
        pos: List[List[int]] = []
        for perm in self.generators:
            c_of: List[List[int]] = [[] for _ in perm]
            p_of = [0] * len(perm)
            for c in _cycles(perm):
                for i, x in enumerate(c):
                    c_of[x], p_of[x] = c, i
            cycle.append(c_of)
            pos.append(p_of)
        self._cycle = cycle
        self._pos = pos

    # ---- constructors ----

    @classmethod
    def uniform_masses(cls, n: int) -> List[Fraction]:
        return [Fraction(1, n)] * n

    @classmethod
    def from_permutations(
        cls,
        perms: Sequence[Sequence[int]],
        masses: Optional[Sequence[Union[Fraction, int, str]]] = None,
        group: Union[str, Group] = "Z",
    ) -> FiniteSystem:
        """Build a system from generator permutations (uniform masses by default)."""
        n = len(perms[0]) if perms else len(masses or [])
        return cls(
            group=group,
            masses=list(masses) if masses is not None else cls.uniform_masses(n),
            generators=[list(p) for p in perms],
        )

    @classmethod
    def cyclic(
        cls,
        n: int,
        masses: Optional[Sequence[Union[Fraction, int, str]]] = None,
        group: Union[str, Group] = "Z",
    ) -> FiniteSystem:
        """The shift x -> x+1 mod n, as a Z-action (or as a C_m-action for n | m)."""
        return cls.from_permutations([[(x + 1) % n for x in range(n)]], masses, group)

    @classmethod
    def from_cycles(
        cls,
        cycles: Sequence[Sequence[int]],
        masses: Optional[Sequence[Union[Fraction, int, str]]] = None,
    ) -> FiniteSystem:
        """A Z-action given by the cycles of its generating permutation."""
        n = sum(len(c) for c in cycles)
        perm = [0] * n
        for c in cycles:
            for i, x in enumerate(c):
                perm[x] = c[(i + 1) % len(c)]
        return cls.from_permutations([perm], masses)

    @classmethod
    def grid(
        cls, a: int, b: int, shift: int = 0, group: Union[str, Group] = "Z^2"
    ) -> FiniteSystem:
        """
        Z^2 acting by translation on Z^2 / L with L spanned by (a, 0) and (shift, b).

        Point (i, j) with 0 <= i < a, 0 <= j < b has index i + a*j. With shift = 0 this
        is also the regular action of C_a x C_b (pass group='C{a}xC{b}').
        """
        e1 = [((i + 1) % a) + a * j for j in range(b) for i in range(a)]
        e2 = [
            i + a * (j + 1) if j + 1 < b else (i - shift) % a
            for j in range(b)
            for i in range(a)
        ]
        return cls.from_permutations([e1, e2], None, group)

    @classmethod
    def trivial(
        cls,
        n: int,
        group: Union[str, Group] = "Z",
        masses: Optional[Sequence[Union[Fraction, int, str]]] = None,
    ) -> FiniteSystem:
        """Every group element fixes every point."""
        g = Group.parse(group)
        if masses is None:
            masses = cls.uniform_masses(n)
        return cls.from_permutations([list(range(n))] * g.rank, masses, g)

    # ---- basic queries ----

    @property
    def n_points(self) -> int:
        return len(self.masses)

    @property
    def points(self) -> range:
        return range(self.n_points)

    @property
    def group_id(self) -> str:
        return self.group.id

    @property
    def is_z_action(self) -> bool:
        return self.group == Group.lattice(1)

    def support(self) -> PointSet:
        """Points of positive mass."""
        return frozenset(x for x in self.points if self.masses[x] > 0)

    def mass(self, points: Iterable[int]) -> Fraction:
        return sum((self.masses[x] for x in points), Fraction(0))

    def point_set(self, points: Iterable[int]) -> PointSet:
        """Validate points and return them as a measurable set of this system."""
        ret = frozenset(int(x) for x in points)
        bad = [x for x in ret if not 0 <= x < self.n_points]
        if bad:
            raise ArgumentError(f"points {sorted(bad)} are not in 0..{self.n_points - 1}")
        return ret

    def _check_point(self, x: int) -> None:
        if not 0 <= x < self.n_points:
            raise ArgumentError(f"point {x} is not in 0..{self.n_points - 1}")

    # ---- action ----

    def apply(self, g: GroupElement, x: int) -> int:
        """Return T_g(x)."""
        if g.group != self.group:
            raise ArgumentError(f"{g!r} does not act on a {self.group.id}-system")
        self._check_point(x)
        for k, c in enumerate(g.payload):
            if c:
                cycle = self._cycle[k][x]
                x = cycle[(self._pos[k][x] + c) % len(cycle)]
        return x

    def apply_inverse(self, g: GroupElement, x: int) -> int:
        """Return T_g^{-1}(x)."""
        return self.apply(-g, x)

    def translate(self, g: GroupElement, points: Iterable[int]) -> PointSet:
        """Image T_g(S) of a set."""
        return frozenset(self.apply(g, x) for x in points)

    def preimage(self, g: GroupElement, points: Iterable[int]) -> PointSet:
        """Preimage T_g^{-1}(S) of a set."""
        return frozenset(self.apply_inverse(g, x) for x in points)

    def neighbours(self, x: int) -> List[int]:
        """Images of x under all generators and their inverses."""
        ret = []
        for k in range(len(self.generators)):
            cycle, p = self._cycle[k][x], self._pos[k][x]
            ret += [cycle[(p + 1) % len(cycle)], cycle[(p - 1) % len(cycle)]]
        return ret

    # ---- orbits ----

    def orbit(self, x: int) -> PointSet:
        """Breadth-first closure of {x} under the generators and their inverses."""
        self._check_point(x)
        vis = {x}
        q: Deque[int] = collections.deque([x])
        while q:
            for y in self.neighbours(q.popleft()):
                if y not in vis:
                    vis.add(y)
                    q.append(y)
        return frozenset(vis)

    def orbits(self) -> List[PointSet]:
        """The orbit partition, ordered by smallest point."""
        uf = UnionFind(self.n_points)
        for perm in self.generators:
            for x, y in enumerate(perm):
                uf.union(x, y)
        return uf.classes()

    def saturation(self, points: Iterable[int]) -> PointSet:
        """The union of all translates T_g(S), i.e. all orbits meeting S."""
        s = set(points)
        return frozenset().union(*(o for o in self.orbits() if o & s))

    def is_sweep_out(self, points: Iterable[int]) -> bool:
        """True iff almost every orbit meets the set."""
        return self.mass(self.saturation(points)) == 1

    def is_ergodic(self) -> bool:
        """True iff all positive-mass points lie in a single orbit."""
        return sum(1 for o in self.orbits() if self.mass(o) > 0) == 1


################################################################
# functions on finite spaces


class PointSpace(Protocol):
    """Finitely many points with exact masses (systems and equivalence relations)."""

    masses: List[Fraction]

    @property
    def n_points(self) -> int:
        ...

    @property
    def points(self) -> range:
        ...


PointFunction = Union[Mapping[int, Any], Sequence[Any], Callable[[int], Any], int, str]
"""Non-negative function on the points of a finite space (or a constant)."""


def point_values(space: PointSpace, f: PointFunction) -> List[ExtRational]:
    """Evaluate f on all points of a finite space as exact values in [0, inf]."""
    if callable(f):
        raw = [f(x) for x in space.points]
    elif isinstance(f, Mapping):
        missing = [x for x in space.points if x not in f]
        if missing:
            raise ArgumentError(f"function has no value for points {missing}")
        raw = [f[x] for x in space.points]
    elif isinstance(f, (int, str, Fraction, float)):
        raw = [f] * space.n_points
    else:
        raw = list(f)
        if len(raw) != space.n_points:
            raise ArgumentError(
                f"expected {space.n_points} function values, got {len(raw)}"
            )

    ret: List[ExtRational] = []
    for x, v in zip(space.points, raw):
        try:
            value = parse_ext_rational(v)
        except (TypeError, ValueError) as e:
            raise ArgumentError(f"invalid function value at point {x}: {e}")
        if value < 0:
            raise ArgumentError(f"function value {v} at point {x} is negative")
        ret.append(value)
    return ret


def integral(space: PointSpace, values: Mapping[int, ExtRational]) -> ExtRational:
    """Exact integral of a function given on some points (0 elsewhere)."""
    return ext_sum(ext_mul(space.masses[x], v) for x, v in values.items())


################################################################
# sets of sampled systems


class SampledSet(BaseModel):
    """Base class of measurable sets of sampled systems."""

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    def measure(self) -> Fraction:  # pragma: no cover
        raise NotImplementedError

    def contains(self, points: np.ndarray) -> np.ndarray:  # pragma: no cover
        """Vectorized membership test (boolean array, one entry per point)."""
        raise NotImplementedError


def _check_disjoint_intervals(ivs: List[Tuple[Fraction, Fraction]]) -> None:
    for lo, hi in ivs:
        if not 0 <= lo < hi <= 1:
            raise ValueError(f"[{lo}, {hi}) is not a non-empty subinterval of [0, 1)")
    ordered = sorted(ivs)
    for (_, hi), (lo, _) in zip(ordered, ordered[1:]):
        if lo < hi:
            raise ValueError("intervals must be pairwise disjoint")


class IntervalSet(SampledSet):
    """Finite disjoint union of half-open intervals [a, b) in [0, 1)."""

    kind: Literal["interval"] = "interval"
    intervals: List[Tuple[Rational, Rational]]

    @validator("intervals")
    def check_intervals(cls, ivs):
        _check_disjoint_intervals(ivs)
        return ivs

    def measure(self) -> Fraction:
        return sum((hi - lo for lo, hi in self.intervals), Fraction(0))

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=np.float64)
        ret = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals:
            ret |= (x >= float(lo)) & (x < float(hi))
        return ret


class BoxSet(SampledSet):
    """Finite disjoint union of boxes (products of half-open intervals) in [0, 1)^d."""

    kind: Literal["box"] = "box"
    boxes: List[List[Tuple[Rational, Rational]]]

    @validator("boxes")
    def check_boxes(cls, boxes):
        if boxes and len({len(b) for b in boxes}) != 1:
            raise ValueError("all boxes must have the same dimension")
        for b in boxes:
            for iv in b:
                _check_disjoint_intervals([iv])
        for i in range(len(boxes)):
            for j in range(i):
                overlap = all(
                    max(p[0], q[0]) < min(p[1], q[1]) for p, q in zip(boxes[i], boxes[j])
                )
                if overlap:
                    raise ValueError(f"boxes {j} and {i} overlap")
        return boxes

    @property
    def dim(self) -> Optional[int]:
        return len(self.boxes[0]) if self.boxes else None

    def measure(self) -> Fraction:
        total = Fraction(0)
        for b in self.boxes:
            vol = Fraction(1)
            for lo, hi in b:
                vol *= hi - lo
            total += vol
        return total

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=np.float64)
        ret = np.zeros(x.shape[:-1], dtype=bool)
        for b in self.boxes:
            inside = np.ones(x.shape[:-1], dtype=bool)
            for k, (lo, hi) in enumerate(b):
                inside &= (x[..., k] >= float(lo)) & (x[..., k] < float(hi))
            ret |= inside
        return ret


class CylinderSet(SampledSet):
    """
    Finite disjoint union of odometer cylinders, each given by a binary digit prefix.

    The prefix '01' is the set of sequences starting with digit 0, then digit 1;
    its measure is 1/4.
    """

    kind: Literal["cylinder"] = "cylinder"
    prefixes: List[str]

    @validator("prefixes")
    def check_prefixes(cls, prefixes):
        for p in prefixes:
            if not p or set(p) - {"0", "1"}:
                raise ValueError(f"'{p}' is not a non-empty binary digit prefix")
        for p in prefixes:
            for q in prefixes:
                if p is not q and q.startswith(p):
                    raise ValueError(f"cylinders '{p}' and '{q}' overlap")
        return prefixes

    @property
    def max_length(self) -> int:
        return max((len(p) for p in self.prefixes), default=0)

    def measure(self) -> Fraction:
        return sum((Fraction(1, 2 ** len(p)) for p in self.prefixes), Fraction(0))

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=np.uint64)
        ret = np.zeros(x.shape, dtype=bool)
        for p in self.prefixes:
            # digit i of the sequence is bit i of the point
            value = sum(int(d) << i for i, d in enumerate(p))
            mask = np.uint64((1 << len(p)) - 1)
            ret |= (x & mask) == np.uint64(value)
        return ret


class ResidueSet(SampledSet):
    """A set of residues of the sampled cyclic system Z/nZ."""

    kind: Literal["residues"] = "residues"
    modulus: conint(ge=1)  # type: ignore
    residues: List[int]

    @validator("residues")
    def check_residues(cls, res, values):
        m = values.get("modulus")
        if m is not None and any(not 0 <= r < m for r in res):
            raise ValueError(f"residues must lie in 0..{m - 1}")
        if len(set(res)) != len(res):
            raise ValueError("residues must be distinct")
        return res

    def measure(self) -> Fraction:
        return Fraction(len(self.residues), self.modulus)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.isin(np.asarray(points, dtype=np.int64), self.residues)


AnySampledSet = Annotated[
    Union[IntervalSet, BoxSet, CylinderSet, ResidueSet], Field(discriminator="kind")
]
"""Parse target for sampled sets in experiment files (keyed by `kind`)."""


################################################################
# sampled systems


class SampledKind(str, Enum):
    """Catalog of sampled ergodic systems (all are Z-actions, except torus: Z^d)."""

    ROTATION = "rotation"
    TORUS = "torus"
    ODOMETER = "odometer"
    CYCLIC = "cyclic"


ALPHA_DIGITS = 60
"""Decimal digits of generated irrational surrogates."""


def golden_alpha(digits: int = ALPHA_DIGITS) -> str:
    """Decimal surrogate of the golden mean (sqrt(5)-1)/2."""
    with localcontext() as ctx:
        ctx.prec = digits + 5
        value = (Decimal(5).sqrt() - 1) / 2
    return str(value.quantize(Decimal(1).scaleb(-digits)))


def sqrt_alpha(n: int, digits: int = ALPHA_DIGITS) -> str:
    """Decimal surrogate of frac(sqrt(n)) (irrational for non-square n)."""
    with localcontext() as ctx:
        ctx.prec = digits + 5
        root = Decimal(n).sqrt()
        value = root - int(root)
    return str(value.quantize(Decimal(1).scaleb(-digits)))


class SampledSystem(BaseModel):
    """
    A generative ergodic system that can be sampled from its invariant measure.

    * rotation: x -> x + alpha mod 1 on [0, 1), Lebesgue measure,
    * torus: Z^d on [0, 1)^d, the k-th generator shifts coordinate k by alpha_k,
    * odometer: adding 1 with carry to binary sequences. A point is the integer
      whose bit i is digit i, truncated to `depth` digits. Carries only move to
      higher digits, so cylinder queries of length <= depth are answered exactly.
    * cyclic: x -> x + 1 mod n with the uniform measure.

    Rotation numbers are given as decimal strings and used exactly: frac(n*alpha)
    is computed in rational arithmetic and only then rounded to a float, so no
    rounding error accumulates along orbits.
    """

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    kind: SampledKind
    alpha: List[str] = []
    """Rotation numbers as decimal strings (one for rotation, d for the torus)."""

    depth: conint(ge=1, le=63) = 63  # type: ignore
    """Number of represented odometer digits."""

    n: Optional[conint(ge=1)] = None  # type: ignore
    """Modulus of the cyclic system."""

    seed: conint(ge=0, lt=2**64) = 0  # type: ignore
    """Root seed of all sample streams."""

    _alpha: List[Fraction] = PrivateAttr()
    _shifts: Dict[Tuple[int, int], float] = PrivateAttr()

    @validator("alpha", each_item=True)
    def check_alpha(cls, a):
        try:
            value = Fraction(Decimal(a))
        except Exception:
            raise ValueError(f"'{a}' is not a decimal number")
        if not 0 < value < 1:
            raise ValueError(f"rotation number {a} must lie strictly between 0 and 1")
        return a

    @root_validator(skip_on_failure=True)
    def check_kind(cls, values):
        kind, alpha = values["kind"], values["alpha"]
        if kind == SampledKind.ROTATION and len(alpha) != 1:
            raise ValueError("a rotation needs exactly one rotation number")
        if kind == SampledKind.TORUS and len(alpha) < 1:
            raise ValueError("a torus translation needs one rotation number per axis")
        if kind in (SampledKind.ODOMETER, SampledKind.CYCLIC) and alpha:
            raise ValueError(f"{kind.value} systems take no rotation numbers")
        if kind == SampledKind.CYCLIC and values.get("n") is None:
            raise ValueError("a cyclic system needs its modulus n")
        return values

    def __init__(self, **data):
        super().__init__(**data)
        self._alpha = [Fraction(Decimal(a)) for a in self.alpha]
        self._shifts = {}

    @classmethod
    def rotation(cls, alpha: Optional[str] = None, seed: int = 0) -> SampledSystem:
        return cls(kind=SampledKind.ROTATION, alpha=[alpha or golden_alpha()], seed=seed)

    @classmethod
    def torus(cls, alpha: Sequence[str], seed: int = 0) -> SampledSystem:
        return cls(kind=SampledKind.TORUS, alpha=list(alpha), seed=seed)

    @classmethod
    def odometer(cls, depth: int = 63, seed: int = 0) -> SampledSystem:
        return cls(kind=SampledKind.ODOMETER, depth=depth, seed=seed)

    @classmethod
    def cyclic(cls, n: int, seed: int = 0) -> SampledSystem:
        return cls(kind=SampledKind.CYCLIC, n=n, seed=seed)

    def with_seed(self, seed: int) -> SampledSystem:
        """The same system with another root seed."""
        return SampledSystem(**{**self.dict(), "seed": seed})

    @property
    def group(self) -> Group:
        if self.kind == SampledKind.TORUS:
            return Group.lattice(len(self.alpha))
        return Group.lattice(1)

    @property
    def group_id(self) -> str:
        return self.group.id

    @property
    def orbits_infinite(self) -> bool:
        """Whether almost every orbit is infinite (by construction of the system)."""
        return self.kind != SampledKind.CYCLIC

    def is_ergodic(self) -> bool:
        """Always true: the catalog only contains ergodic systems."""
        return True

    def check_set(self, s: SampledSet) -> None:
        """Make sure that a set description fits this system."""
        ok = {
            SampledKind.ROTATION: isinstance(s, IntervalSet),
            SampledKind.TORUS: isinstance(s, BoxSet)
            and s.dim in (None, len(self.alpha)),
            SampledKind.ODOMETER: isinstance(s, CylinderSet)
            and s.max_length <= self.depth,
            SampledKind.CYCLIC: isinstance(s, ResidueSet) and s.modulus == self.n,
        }[self.kind]
        if not ok:
            raise ArgumentError(f"{type(s).__name__} does not fit a {self.kind.value} system")

    # ---- action ----

    def shift(self, c: int, axis: int = 0) -> float:
        """frac(c * alpha_axis) rounded to double precision."""
        key = (c, axis)
        if key not in self._shifts:
            a = self._alpha[axis]
            num = (c * a.numerator) % a.denominator
            if len(self._shifts) > 1 << 16:
                self._shifts.clear()
            self._shifts[key] = num / a.denominator
        return self._shifts[key]

    def apply(self, g: GroupElement, points: np.ndarray) -> np.ndarray:
        """Return T_g applied to a batch of points (or a single point)."""
        if g.group != self.group:
            raise ArgumentError(f"{g!r} does not act on a {self.group.id}-system")
        x = np.asarray(points)
        if self.kind == SampledKind.ROTATION:
            return np.mod(x + self.shift(g.payload[0]), 1.0)
        if self.kind == SampledKind.TORUS:
            s = np.array([self.shift(c, k) for k, c in enumerate(g.payload)])
            return np.mod(x + s, 1.0)
        if self.kind == SampledKind.ODOMETER:
            mask = (1 << self.depth) - 1
            c = np.uint64(g.payload[0] & mask)
            return (x.astype(np.uint64) + c) & np.uint64(mask)
        return np.mod(x.astype(np.int64) + g.payload[0], self.n)

    def translates(self, x, ws: np.ndarray) -> np.ndarray:
        """T_w(x) of a single point x for every row w of an integer array."""
        ws = np.asarray(ws, dtype=np.int64).reshape(len(ws), -1)
        if ws.shape[1] != self.group.rank:
            raise ArgumentError(
                f"translations of a {self.group.id}-system need rank {self.group.rank}"
            )
        if self.kind == SampledKind.TORUS:
            shifts = np.array(
                [[self.shift(int(c), k) for k, c in enumerate(w)] for w in ws]
            ).reshape(len(ws), -1)
            return np.mod(np.asarray(x, dtype=np.float64) + shifts, 1.0)
        if self.kind == SampledKind.ROTATION:
            shifts = np.array([self.shift(int(c)) for c in ws[:, 0]])
            return np.mod(float(x) + shifts, 1.0)
        if self.kind == SampledKind.ODOMETER:
            mask = (1 << self.depth) - 1
            steps = np.array([int(c) & mask for c in ws[:, 0]], dtype=np.uint64)
            return (np.uint64(int(x)) + steps) & np.uint64(mask)
        return np.mod(int(x) + ws[:, 0], self.n)

    def iterate(self, points: np.ndarray, n: int) -> np.ndarray:
        """T^n for the Z-actions of the catalog."""
        return self.apply(self.group.element(n), points)

    # ---- sampling ----

    def rng(self, stream: int, chunk: int = 0) -> np.random.Generator:
        """Random generator of one chunk of one stream (independent of all others)."""
        seq = np.random.SeedSequence(self.seed, spawn_key=(stream, chunk))
        return np.random.Generator(np.random.PCG64(seq))

    def sample(self, stream: int, size: int, chunk: int = 0) -> np.ndarray:
        """Draw `size` i.i.d. points from the invariant measure."""
        rng = self.rng(stream, chunk)
        if self.kind == SampledKind.ROTATION:
            return rng.random(size)
        if self.kind == SampledKind.TORUS:
            return rng.random((size, len(self.alpha)))
        if self.kind == SampledKind.ODOMETER:
            return rng.integers(0, 1 << self.depth, size=size, dtype=np.uint64)
        return rng.integers(0, self.n, size=size, dtype=np.int64)

    def sample_point(self, stream: int, index: int, chunk_size: int):
        """The draw with the given index of a stream sampled in chunks of `chunk_size`."""
        chunk, i = divmod(index, chunk_size)
        return self.sample(stream, chunk_size, chunk)[i]


AnySystem = Union[FiniteSystem, SampledSystem]


################################################################
# operation-style access


def apply(system: AnySystem, g: GroupElement, x):
    """T_g(x) on a finite system (a point) or a sampled system (a batch of points)."""
    return system.apply(g, x)


def orbit(fs: FiniteSystem, x: int) -> PointSet:
    return fs.orbit(x)


def is_sweep_out(fs: FiniteSystem, a: Iterable[int]) -> bool:
    return fs.is_sweep_out(a)


def is_ergodic(system: AnySystem) -> bool:
    return system.is_ergodic()


def sample(ss: SampledSystem, stream: int, size: int = 1, chunk: int = 0) -> np.ndarray:
    return ss.sample(stream, size, chunk)
