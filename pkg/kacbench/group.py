"""
Abelian groups of the workbench and their canonical enumerations.

A group is a finite direct product of factors, each either Z or a finite cyclic
group C_n, e.g. `Z^2`, `C5`, `C5xC3` or `ZxC4`. Elements carry one integer coordinate
per factor; coordinates of cyclic factors are stored reduced into `[0, n)`.

For geometry and enumeration, a cyclic coordinate is read through its symmetric
representative in `[-(n-1)//2, n//2]`. The default enumeration orders elements by
squared Euclidean norm of those representatives, ties broken lexicographically,
so on Z it reads 0, -1, 1, -2, 2, ... and on C5 it reads 0, 4, 1, 3, 2.

Groups and elements are immutable values (hashable, comparable).
"""
from __future__ import annotations

import re
import threading
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ArgumentError, IndexRangeError
from .log import child
from .util import JsonValue, UnsafeJSON

log = child(__name__)

Z = 0
"""Factor code of the infinite cyclic group (positive codes n denote C_n)."""

_TOKEN = re.compile(r"^(?:Z(?:\^(\d+))?|C_?(\d+))$")


class Group:
    """A finite direct product of copies of Z and finite cyclic groups."""

    __slots__ = ("factors",)

    factors: Tuple[int, ...]
    """Factor codes: 0 for Z, n >= 1 for C_n."""

    def __init__(self, factors: Iterable[int]):
        fs = tuple(int(f) for f in factors)
        if any(f < 0 for f in fs):
            raise ArgumentError(f"invalid factor codes {fs}")
        object.__setattr__(self, "factors", fs)

    def __setattr__(self, name, value):
        raise AttributeError("groups are immutable")

    def __eq__(self, other) -> bool:
        return isinstance(other, Group) and self.factors == other.factors

    def __hash__(self) -> int:
        return hash(("Group", self.factors))

    def __repr__(self) -> str:
        return f"Group({self.id})"

    def __str__(self) -> str:
        return self.id

    @classmethod
    def __get_validators__(cls):
        yield cls.parse

    @classmethod
    def parse(cls, group_id: Union[str, Group]) -> Group:
        """Parse a group identifier like 'Z', 'Z^2', 'C5', 'C5xC3' or 'ZxC4'."""
        if isinstance(group_id, Group):
            return group_id
        if not isinstance(group_id, str):
            raise ArgumentError(f"group identifier must be a string, got {group_id!r}")
        gid = group_id.replace(" ", "").replace("×", "x")
        if gid in ("1", ""):
            return cls(())
        factors: List[int] = []
        for token in gid.split("x"):
            m = _TOKEN.match(token)
            if m is None:
                raise ArgumentError(f"cannot parse group identifier '{group_id}'")
            if token.startswith("Z"):
                factors += [Z] * int(m.group(1) or 1)
            else:
                n = int(m.group(2))
                if n < 1:
                    raise ArgumentError(f"cyclic factor of order {n} in '{group_id}'")
                factors.append(n)
        return cls(factors)

    @classmethod
    def lattice(cls, d: int) -> Group:
        """Return Z^d."""
        return cls((Z,) * d)

    @classmethod
    def cyclic(cls, *orders: int) -> Group:
        """Return C_n (or the product of several finite cyclic groups)."""
        return cls(orders)

    @property
    def id(self) -> str:
        """Canonical identifier (consecutive Z factors are collapsed into Z^k)."""
        if not self.factors:
            return "1"
        tokens: List[str] = []
        i = 0
        while i < len(self.factors):
            if self.factors[i] == Z:
                j = i
                while j < len(self.factors) and self.factors[j] == Z:
                    j += 1
                tokens.append("Z" if j - i == 1 else f"Z^{j - i}")
                i = j
            else:
                tokens.append(f"C{self.factors[i]}")
                i += 1
        return "x".join(tokens)

    @property
    def rank(self) -> int:
        """Number of factors (= payload length of elements)."""
        return len(self.factors)

    @property
    def is_finite(self) -> bool:
        return Z not in self.factors

    @property
    def is_lattice(self) -> bool:
        """True iff the group is Z^d for some d >= 1."""
        return self.rank > 0 and all(f == Z for f in self.factors)

    @property
    def order(self) -> Optional[int]:
        """Number of elements, None for infinite groups."""
        if not self.is_finite:
            return None
        ret = 1
        for f in self.factors:
            ret *= f
        return ret

    def element(self, *coords: Union[int, Sequence[int]]) -> GroupElement:
        """Create an element, reducing cyclic coordinates (accepts varargs or one sequence)."""
        if len(coords) == 1 and not isinstance(coords[0], (int, np.integer)):
            coords = tuple(coords[0])  # type: ignore
        if len(coords) != self.rank:
            raise ArgumentError(
                f"{self.id} needs {self.rank} coordinates, got {len(coords)}"
            )
        payload = tuple(
            int(c) if f == Z else int(c) % f  # type: ignore
            for c, f in zip(coords, self.factors)
        )
        return GroupElement(self, payload)

    def identity(self) -> GroupElement:
        return GroupElement(self, (0,) * self.rank)

    def generators(self) -> List[GroupElement]:
        """Standard generators: the unit vector of each factor."""
        return [
            self.element([1 if j == k else 0 for j in range(self.rank)])
            for k in range(self.rank)
        ]

    def symmetric_ranges(self) -> List[Tuple[Optional[int], Optional[int]]]:
        """Per factor, the range of symmetric representatives (None = unbounded)."""
        return [
            (None, None) if f == Z else (-((f - 1) // 2), f // 2) for f in self.factors
        ]

    def enumeration(self) -> Enumeration:
        """The default norm-lex enumeration (shared, cached per group)."""
        return _norm_lex(self)


class GroupElement(JsonValue):
    """An element of a `Group`, with coordinates reduced modulo cyclic factor orders."""

    __slots__ = ("group", "payload")

    group: Group
    payload: Tuple[int, ...]

    def __init__(self, group: Group, payload: Tuple[int, ...]):
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "payload", payload)

    def __setattr__(self, name, value):
        raise AttributeError("group elements are immutable")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GroupElement)
            and self.group == other.group
            and self.payload == other.payload
        )

    def __hash__(self) -> int:
        return hash((self.group.factors, self.payload))

    @property
    def group_id(self) -> str:
        return self.group.id

    @property
    def coords(self) -> Tuple[int, ...]:
        """Symmetric representatives of the payload (equals payload on Z^d)."""
        return tuple(
            p if f == Z or p <= f // 2 else p - f
            for p, f in zip(self.payload, self.group.factors)
        )

    @property
    def norm2(self) -> int:
        """Squared Euclidean norm of the symmetric representative."""
        return sum(c * c for c in self.coords)

    @property
    def is_identity(self) -> bool:
        return not any(self.payload)

    def __mul__(self, other: GroupElement) -> GroupElement:
        return compose(self, other)

    __add__ = __mul__

    def __neg__(self) -> GroupElement:
        return invert(self)

    def __sub__(self, other: GroupElement) -> GroupElement:
        return compose(self, invert(other))

    def __lt__(self, other: GroupElement) -> bool:
        """Norm-lex order (the order of the default enumeration)."""
        _check_same(self, other)
        return (self.norm2, self.coords) < (other.norm2, other.coords)

    def __str__(self) -> str:
        if self.group.rank == 1:
            return str(self.coords[0])
        return "(" + ", ".join(map(str, self.coords)) + ")"

    def __repr__(self) -> str:
        return f"{self.group.id}{list(self.payload)}"

    def __json__(self) -> UnsafeJSON:
        return list(self.coords)


def _check_same(a: GroupElement, b: GroupElement) -> None:
    if a.group != b.group:
        raise ArgumentError(
            f"elements of different groups: {a.group_id} and {b.group_id}"
        )


def compose(a: GroupElement, b: GroupElement) -> GroupElement:
    """Group law (componentwise addition, reduced on cyclic factors)."""
    _check_same(a, b)
    return a.group.element([x + y for x, y in zip(a.payload, b.payload)])


def invert(a: GroupElement) -> GroupElement:
    """Inverse element."""
    return a.group.element([-x for x in a.payload])


################################################################
# enumerations


class Enumeration:
    """
    Bijection between natural indices and the elements of a group.

    Without an explicit order this is the norm-lex enumeration, generated in blocks
    of growing radius. An explicit order is only accepted for finite groups and must
    list every element exactly once, starting with the identity.
    """

    group: Group
    order: Optional[List[GroupElement]]

    _reps: np.ndarray
    """Symmetric representatives of the known prefix, one row per element."""

    _elements: List[GroupElement]
    _index: Dict[Tuple[int, ...], int]
    _radius: int
    _lock: threading.Lock
    """Serializes growth; norm-lex enumerations are shared between threads."""

    def __init__(self, group: Group, order: Optional[Sequence[GroupElement]] = None):
        self.group = group
        self._lock = threading.Lock()
        self.order = list(order) if order is not None else None
        self._index = {}
        self._radius = 0

        if self.order is None:
            self._elements = []
            self._reps = np.zeros((0, group.rank), dtype=np.int64)
            self._grow(1)
            return

        if not group.is_finite:
            raise ArgumentError("explicit enumerations require a finite group")
        for i, g in enumerate(self.order):
            if g.group != group:
                raise ArgumentError(f"element {g!r} is not in {group.id}")
            if g.payload in self._index:
                raise ArgumentError(f"element {g!r} listed twice in enumeration")
            self._index[g.payload] = i
        if len(self._index) != group.order:
            raise ArgumentError(
                f"enumeration lists {len(self._index)} of {group.order} elements"
            )
        if not self.order[0].is_identity:
            raise ArgumentError("enumerations must start with the identity")
        self._elements = self.order
        self._reps = np.array(
            [g.coords for g in self.order], dtype=np.int64
        ).reshape(-1, group.rank)

    def __repr__(self) -> str:
        return f"Enumeration({self.group.id}, {self.order_rule})"

    @property
    def order_rule(self) -> str:
        return "norm-lex" if self.order is None else "explicit"

    @property
    def size(self) -> Optional[int]:
        return self.group.order

    def _block(self, radius: int) -> np.ndarray:
        """All symmetric representatives of norm <= radius, sorted norm-lex."""
        rank = self.group.rank
        if rank == 0:
            return np.zeros((1, 0), dtype=np.int64)
        axes = []
        for lo, hi in self.group.symmetric_ranges():
            lo = -radius if lo is None else max(lo, -radius)
            hi = radius if hi is None else min(hi, radius)
            axes.append(np.arange(lo, hi + 1, dtype=np.int64))
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, rank)
        norm2 = (grid * grid).sum(axis=1)
        keep = norm2 <= radius * radius
        grid, norm2 = grid[keep], norm2[keep]
        # lexsort: last key is the primary one
        keys = tuple(grid[:, k] for k in reversed(range(rank))) + (norm2,)
        return grid[np.lexsort(keys)]

    def _complete(self) -> bool:
        return self.size is not None and len(self._reps) >= self.size

    def _grow(self, n: int) -> None:
        """Make sure that at least the first n elements (or all of them) are known."""
        if len(self._reps) >= n or self._complete():
            return
        with self._lock:
            self._grow_locked(n)

    def _grow_locked(self, n: int) -> None:
        while len(self._reps) < n and not self._complete():
            self._radius = max(1, 2 * self._radius)
            # the ball is complete, so the known prefix stays a prefix
            block = self._block(self._radius)
            log.debug(f"norm-lex enumeration of {self.group.id}: radius {self._radius}")
            for i in range(len(self._reps), len(block)):
                g = self.group.element(block[i].tolist())
                self._index[g.payload] = i
                self._elements.append(g)
            self._reps = block

    def element(self, n: int) -> GroupElement:
        """Return g(n)."""
        if n < 0 or (self.size is not None and n >= self.size):
            raise IndexRangeError(f"index {n} out of range for {self.group.id}")
        self._grow(n + 1)
        return self._elements[n]

    def index_of(self, g: GroupElement) -> int:
        """Return the n with g(n) = g."""
        if g.group != self.group:
            raise ArgumentError(f"element {g!r} is not in {self.group.id}")
        while g.payload not in self._index:
            # every element of norm <= radius is known after a growth step
            self._grow(len(self._reps) + 1)
        return self._index[g.payload]

    def prefix(self, n: int) -> List[GroupElement]:
        """The first n elements (or all, for a smaller finite group)."""
        if self.size is not None:
            n = min(n, self.size)
        self._grow(n)
        return self._elements[:n]

    def coords_array(self, n: int) -> np.ndarray:
        """Symmetric representatives of the first n elements as an (n, rank) array."""
        if self.size is not None:
            n = min(n, self.size)
        self._grow(n)
        return self._reps[:n]

    def __iter__(self) -> Iterator[GroupElement]:
        i = 0
        while self.size is None or i < self.size:
            yield self.element(i)
            i += 1


@lru_cache(maxsize=None)
def _norm_lex(group: Group) -> Enumeration:
    return Enumeration(group)


def enumeration_element(e: Enumeration, n: int) -> GroupElement:
    """Return the n-th element of the enumeration (0 is the identity)."""
    return e.element(n)


def index_of(e: Enumeration, g: GroupElement) -> int:
    """Return the index of g in the enumeration."""
    return e.index_of(g)
