"""
Exact integer-lattice geometry of allocation cells on Z^d.

For a point x of the target set A of a Z^d-action, the hitting set
W_x = {w : T_w(x) in A} contains 0. The lattice points of the closed and strict
Voronoi cells of the origin with respect to W_x are

    closed = {v : |v| <= |v + w| for all w in W},
    strict = {v : |v| <  |v + w| for all w in W \\ {0}},

and |v| <= |v + w| is equivalent to the integer inequality 2<v,w> + |w|^2 >= 0.
Greedy allocations along the norm-ordered enumeration have cells squeezed between
the two (`sandwich_check`), and their cells are almost convex (`is_almost_convex`).

All predicates are evaluated in integer or rational arithmetic. Boundedness is
decided from the recession cone {u : <u,w> >= 0 for all w} before enumerating.
Cells are computed for d in {1, 2}; recession directions and almost-convexity
are also available for d = 3.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import validator

from .errors import ArgumentError, InconclusiveError, PreconditionError, UnsupportedError
from .log import child
from .system import AnySystem, FiniteSystem
from .util import Record

log = child(__name__)

Vec = Tuple[int, ...]
"""An integer vector."""


class HittingSet(Record):
    """Finite set of lattice vectors that translate a point back into the target set."""

    dim: int
    vectors: FrozenSet[Vec]
    radius: Optional[int] = None
    """Radius of the scanned ball (None: the set is taken as complete)."""

    @validator("vectors")
    def check_vectors(cls, vs, values):
        d = values.get("dim")
        if any(len(v) != d for v in vs):
            raise ValueError(f"all vectors must have dimension {d}")
        if (0,) * (d or 0) not in vs:
            raise ValueError("a hitting set must contain 0")
        return frozenset(tuple(int(c) for c in v) for v in vs)

    @classmethod
    def of(cls, vectors: Iterable[Sequence[int]], radius: Optional[int] = None):
        """Build from vectors (0 is added)."""
        vs = {tuple(int(c) for c in v) for v in vectors}
        if not vs:
            raise ArgumentError("cannot infer the dimension of an empty hitting set")
        d = len(next(iter(vs)))
        vs.add((0,) * d)
        return cls(dim=d, vectors=frozenset(vs), radius=radius)

    @property
    def contains_zero(self) -> bool:
        return (0,) * self.dim in self.vectors

    def nonzero(self) -> List[Vec]:
        return sorted(w for w in self.vectors if any(w))

    @property
    def max_norm2(self) -> int:
        return max((_norm2(w) for w in self.vectors), default=0)


class LatticeCell(Record):
    """Finite set of lattice points."""

    dim: int
    points: FrozenSet[Vec]

    @classmethod
    def of(cls, points: Iterable[Sequence[int]], dim: Optional[int] = None):
        ps = frozenset(tuple(int(c) for c in p) for p in points)
        if dim is None:
            if not ps:
                raise ArgumentError("cannot infer the dimension of an empty cell")
            dim = len(next(iter(ps)))
        return cls(dim=dim, points=ps)

    def __contains__(self, v) -> bool:
        return tuple(v) in self.points

    def __len__(self) -> int:
        return len(self.points)

    @property
    def max_norm2(self) -> int:
        return max((_norm2(p) for p in self.points), default=0)


class VoronoiCells(Record):
    """Strict and closed cells of the origin, or the recession directions if unbounded."""

    dim: int
    strict: Optional[LatticeCell]
    closed: Optional[LatticeCell]
    recession: List[Vec] = []
    """Integer generators of (the extreme rays of) the recession cone, if nontrivial."""

    closed_max_norm2: Optional[Fraction] = None
    """Largest squared norm over the real closed cell (its vertices)."""

    @property
    def bounded(self) -> bool:
        return not self.recession


class SandwichReport(Record):
    """Outcome of checking strict <= B <= closed for one cell."""

    cell_size: int
    strict_size: int
    closed_size: int
    strict_in_cell: bool
    cell_in_closed: bool
    missing_strict: List[Vec]
    """Points of the strict cell missing from B."""

    outside_closed: List[Vec]
    """Points of B outside the closed cell."""

    almost_convex: bool
    passed: bool


################################################################
# exact vector helpers


def _dot(u: Sequence, v: Sequence):
    return sum(a * b for a, b in zip(u, v))


def _norm2(v: Sequence[int]) -> int:
    return sum(c * c for c in v)


def _primitive(v: Sequence[int]) -> Vec:
    g = 0
    for c in v:
        g = math.gcd(g, abs(int(c)))
    return tuple(int(c) // g for c in v) if g else tuple(int(c) for c in v)


def _cross(u: Sequence[int], v: Sequence[int]) -> Vec:
    return (
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )


def _rank(vectors: List[Vec]) -> int:
    """Rank of a set of integer vectors of dimension <= 3 (exact)."""
    vs = [v for v in vectors if any(v)]
    if not vs:
        return 0
    v0 = vs[0]
    d = len(v0)
    if d == 1:
        return 1
    if d == 2:
        return 2 if any(v0[0] * v[1] - v0[1] * v[0] for v in vs) else 1
    crosses = [_cross(v0, v) for v in vs if any(_cross(v0, v))]
    if not crosses:
        return 1
    c = crosses[0]
    return 3 if any(_dot(c, v) for v in vs) else 2


def in_recession_cone(vectors: Iterable[Sequence[int]], u: Sequence[int]) -> bool:
    """Whether <u, w> >= 0 for every w (u is a direction in which the cell is unbounded)."""
    return all(_dot(u, w) >= 0 for w in vectors)


def recession_directions(vectors: Iterable[Sequence[int]]) -> List[Vec]:
    """
    Primitive integer directions generating the cone {u : <u,w> >= 0 for all w}.

    The list is empty iff the cone is {0}, i.e. iff the polyhedron
    {v : 2<v,w> + |w|^2 >= 0} is bounded. Supported for d <= 3.
    """
    ws = [tuple(int(c) for c in w) for w in vectors]
    ws = [w for w in ws if any(w)]
    if not ws:
        raise ArgumentError("need at least one nonzero vector (or an explicit dimension)")
    d = len(ws[0])
    if d > 3:
        raise UnsupportedError(f"recession cones are implemented for d <= 3, not {d}")

    candidates: Set[Vec] = set()
    if d == 1:
        candidates = {(1,), (-1,)}
    elif d == 2:
        for w in ws:
            candidates |= {(-w[1], w[0]), (w[1], -w[0])}
    else:
        r = _rank(ws)
        if r == 1:
            w = ws[0]
            helper = (1, 0, 0) if any(_cross(w, (1, 0, 0))) else (0, 1, 0)
            a = _cross(w, helper)
            b = _cross(w, a)
            candidates = {a, b, tuple(-c for c in a), tuple(-c for c in b)}
        elif r == 2:
            w0 = ws[0]
            n = next(_cross(w0, w) for w in ws if any(_cross(w0, w)))
            candidates = {n, tuple(-c for c in n)}
        # a nontrivial pointed cone in 3D has an extreme ray on two facets
        for i in range(len(ws)):
            for j in range(i):
                c = _cross(ws[i], ws[j])
                if any(c):
                    candidates |= {c, tuple(-x for x in c)}

    ret = {_primitive(u) for u in candidates if any(u) and in_recession_cone(ws, u)}
    return sorted(ret)


################################################################
# cells


def _clip(poly: List[Tuple[Fraction, Fraction]], w: Vec):
    """Sutherland-Hodgman step: intersect a convex polygon with 2<v,w> + |w|^2 >= 0."""
    n2 = _norm2(w)
    out: List[Tuple[Fraction, Fraction]] = []
    for i in range(len(poly)):
        p, q = poly[i], poly[(i + 1) % len(poly)]
        fp = 2 * _dot(p, w) + n2
        fq = 2 * _dot(q, w) + n2
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    dedup: List[Tuple[Fraction, Fraction]] = []
    for p in out:
        if not dedup or dedup[-1] != p:
            dedup.append(p)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return dedup


def closed_polygon(ws: Sequence[Vec]) -> List[Tuple[Fraction, Fraction]]:
    """Vertices (counter-clockwise) of the bounded real closed cell in d = 2."""
    m = max((max(abs(c) for c in w) for w in ws), default=1)
    # vertices solve 2x2 integer systems, so their coordinates are at most 2*m^3
    box = Fraction(2 * m**3 + 1)
    poly = [(-box, -box), (box, -box), (box, box), (-box, box)]
    for w in ws:
        poly = _clip(poly, w)
    return poly


def _members(
    candidates: np.ndarray, ws: Sequence[Vec]
) -> Tuple[np.ndarray, np.ndarray]:
    """Closed and strict membership masks of candidate points (exact int64)."""
    if not ws:
        ones = np.ones(len(candidates), dtype=bool)
        return ones, ones
    W = np.array(ws, dtype=np.int64)
    vals = 2 * candidates @ W.T + (W * W).sum(axis=1)
    return (vals >= 0).all(axis=1), (vals > 0).all(axis=1)


def voronoi_cells(hs: HittingSet) -> VoronoiCells:
    """
    Strict and closed Voronoi cells of the origin with respect to the hitting set.

    Unbounded cells are reported through their recession directions, not raised.
    """
    if not hs.contains_zero:
        raise PreconditionError("hitting set does not contain 0")
    d = hs.dim
    if d not in (1, 2):
        raise UnsupportedError(f"Voronoi cells are implemented for d in {{1, 2}}, not {d}")
    ws = hs.nonzero()
    if not ws:
        return VoronoiCells(dim=d, strict=None, closed=None, recession=_axes(d))
    rec = recession_directions(ws)
    if rec:
        log.debug(f"unbounded cell, recession directions {rec}")
        return VoronoiCells(dim=d, strict=None, closed=None, recession=rec)

    if d == 1:
        p = min(w[0] for w in ws if w[0] > 0)
        q = min(-w[0] for w in ws if w[0] < 0)
        lo, hi = Fraction(-p, 2), Fraction(q, 2)
        grid = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=np.int64).reshape(-1, 1)
        max_norm2 = max(lo * lo, hi * hi)
    else:
        poly = closed_polygon(ws)
        xs = [v[0] for v in poly]
        ys = [v[1] for v in poly]
        ax = np.arange(math.ceil(min(xs)), math.floor(max(xs)) + 1, dtype=np.int64)
        ay = np.arange(math.ceil(min(ys)), math.floor(max(ys)) + 1, dtype=np.int64)
        grid = np.stack(np.meshgrid(ax, ay, indexing="ij"), axis=-1).reshape(-1, 2)
        max_norm2 = max(v[0] * v[0] + v[1] * v[1] for v in poly)

    closed_mask, strict_mask = _members(grid, ws)
    closed = LatticeCell.of((tuple(map(int, v)) for v in grid[closed_mask]), d)
    strict = LatticeCell.of((tuple(map(int, v)) for v in grid[strict_mask]), d)
    return VoronoiCells(
        dim=d, strict=strict, closed=closed, closed_max_norm2=Fraction(max_norm2)
    )


def _axes(d: int) -> List[Vec]:
    ret = []
    for k in range(d):
        for s in (1, -1):
            ret.append(tuple(s if j == k else 0 for j in range(d)))
    return sorted(ret)


def cell_certified(cells: VoronoiCells, radius: Optional[int]) -> bool:
    """
    Whether hits outside of the scanned radius cannot change the cells.

    A vector w can only cut off or tie with a point v if |w| <= 2|v|, so this holds
    once 4 * max |v|^2 <= radius^2 over the (truncated) closed cell.
    """
    if not cells.bounded:
        return False
    if radius is None:
        return True
    assert cells.closed_max_norm2 is not None
    return 4 * cells.closed_max_norm2 <= radius * radius


def _certified(hs: HittingSet) -> VoronoiCells:
    cells = voronoi_cells(hs)
    if not cells.bounded:
        raise InconclusiveError(
            "closed cell is unbounded, increase the radius of the hitting set",
            cells.recession,
        )
    if not cell_certified(cells, hs.radius):
        raise InconclusiveError(
            f"radius {hs.radius} does not certify the closed cell "
            f"(max squared norm {cells.closed_max_norm2})"
        )
    return cells


def _normlex_key(v: Sequence[int]) -> Tuple[int, Vec]:
    return (_norm2(v), tuple(v))


def greedy_cell(hs: HittingSet) -> LatticeCell:
    """
    Cell of the greedy norm-lex allocation at a point with hitting set W.

    For y = T_v^{-1}(x) the elements hitting A from y are v + W, so v is in the cell
    iff it precedes every v + w (w in W, w != 0) in norm-lex order. Such v lie in
    the closed cell, which must be bounded and certified by the radius of W.
    """
    cells = _certified(hs)
    assert cells.closed is not None
    ws = hs.nonzero()
    pts = [
        v
        for v in sorted(cells.closed.points)
        if all(
            _normlex_key([a + b for a, b in zip(v, w)]) > _normlex_key(v) for w in ws
        )
    ]
    return LatticeCell.of(pts, hs.dim)


def ball(d: int, radius: int) -> np.ndarray:
    """All lattice points of Z^d with norm <= radius, one per row, in norm-lex order."""
    axis = np.arange(-radius, radius + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    norm2 = (grid * grid).sum(axis=1)
    grid, norm2 = grid[norm2 <= radius * radius], norm2[norm2 <= radius * radius]
    keys = tuple(grid[:, k] for k in reversed(range(d))) + (norm2,)
    return grid[np.lexsort(keys)]


def hitting_set(system: AnySystem, a, x, radius: int) -> HittingSet:
    """
    All w in Z^d with |w| <= radius and T_w(x) in A (for a point x of A).

    Works for finite systems acted on by Z^d and for sampled systems
    (where A is a sampled set and x a single point).
    """
    if radius < 0:
        raise ArgumentError("radius must be non-negative")
    group = system.group
    if not group.is_lattice:
        raise UnsupportedError(f"hitting sets need a Z^d-action, not {group.id}")
    ws = ball(group.rank, radius)
    if isinstance(system, FiniteSystem):
        if x not in a:
            raise PreconditionError(f"point {x} is not in the target set")
        hits = [
            tuple(map(int, w))
            for w in ws
            if system.apply(group.element(w.tolist()), x) in a
        ]
    else:
        if not a.contains(np.asarray([x]))[0]:
            raise PreconditionError(f"point {x} is not in the target set")
        mask = a.contains(system.translates(x, ws))
        hits = [tuple(map(int, w)) for w in ws[mask]]
    return HittingSet(dim=group.rank, vectors=frozenset(hits), radius=radius)


################################################################
# almost convexity


def convex_hull_2d(points: Iterable[Sequence[int]]) -> List[Vec]:
    """Counter-clockwise hull vertices (monotone chain, integer cross products)."""
    pts = sorted({(int(p[0]), int(p[1])) for p in points})
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: List[Vec] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[Vec] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _strictly_inside(hull: List[Vec], p: Vec) -> bool:
    if len(hull) < 3:
        return False  # degenerate hull, empty interior
    for i in range(len(hull)):
        a, b = hull[i], hull[(i + 1) % len(hull)]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) <= 0:
            return False
    return True


def _bounding_grid(points: Iterable[Vec], d: int) -> np.ndarray:
    arr = np.array(list(points), dtype=np.int64).reshape(-1, d)
    axes = [np.arange(arr[:, k].min(), arr[:, k].max() + 1) for k in range(d)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def is_almost_convex(cell: LatticeCell) -> bool:
    """Whether every lattice point in the interior of the convex hull belongs to the cell."""
    if not cell.points:
        raise ArgumentError("almost convexity is defined for nonempty cells")
    d = cell.dim
    if d > 3:
        raise UnsupportedError(f"almost convexity is implemented for d <= 3, not {d}")
    if d == 1:
        xs = sorted(p[0] for p in cell.points)
        return xs[-1] - xs[0] + 1 == len(xs)

    missing = [
        tuple(map(int, p))
        for p in _bounding_grid(cell.points, d)
        if tuple(map(int, p)) not in cell.points
    ]
    if d == 2:
        hull = convex_hull_2d(cell.points)
        return not any(_strictly_inside(hull, p) for p in missing)

    # d = 3: p is interior iff the vectors b - p positively span R^3
    b0 = min(cell.points)
    if _rank([tuple(b[k] - b0[k] for k in range(3)) for b in cell.points]) < 3:
        return True  # flat, empty interior
    for p in missing:
        diffs = [tuple(p[k] - b[k] for k in range(3)) for b in cell.points]
        if not recession_directions(diffs):
            return False
    return True


################################################################
# the sandwich


def sandwich_check(hs: HittingSet, cell: LatticeCell) -> SandwichReport:
    """
    Check strict <= B <= closed for a cell B computed with the norm-ordered enumeration.

    Raises `InconclusiveError` if the closed cell is unbounded or the radius of the
    hitting set is too small to pin down the closed cell.
    """
    cells = _certified(hs)
    assert cells.strict is not None and cells.closed is not None
    missing = sorted(cells.strict.points - cell.points)
    outside = sorted(cell.points - cells.closed.points)
    convex = is_almost_convex(cell) if cell.points else False
    return SandwichReport(
        cell_size=len(cell.points),
        strict_size=len(cells.strict.points),
        closed_size=len(cells.closed.points),
        strict_in_cell=not missing,
        cell_in_closed=not outside,
        missing_strict=missing,
        outside_closed=outside,
        almost_convex=convex,
        passed=not missing and not outside and convex,
    )


################################################################
# SVG


def cells_svg(
    hs: HittingSet,
    cells: VoronoiCells,
    cell: Optional[LatticeCell] = None,
    scale: int = 24,
) -> str:
    """
    Render a 2D instance: hits (red), bisector lines (grey), closed cell (blue rings),
    strict cell (blue dots) and the hull of B (green outline).
    """
    if hs.dim != 2:
        raise UnsupportedError("SVG output is only available for d = 2")
    pts: List[Vec] = list(hs.vectors)
    if cells.closed is not None:
        pts += list(cells.closed.points)
    if cell is not None:
        pts += list(cell.points)
    half = max(max(abs(c) for c in p) for p in pts) + 1
    size = (2 * half + 1) * scale

    def px(v) -> Tuple[float, float]:
        # lattice y axis points up
        return (float(v[0] + half + 0.5) * scale, float(half - v[1] + 0.5) * scale)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for w in hs.nonzero():
        # bisector of 0 and -w: points -w/2 + t * perp(w)
        mid = (Fraction(-w[0], 2), Fraction(-w[1], 2))
        t = 4 * half
        a = px((mid[0] - t * w[1], mid[1] + t * w[0]))
        b = px((mid[0] + t * w[1], mid[1] - t * w[0]))
        out.append(
            f'<line x1="{a[0]:.1f}" y1="{a[1]:.1f}" x2="{b[0]:.1f}" y2="{b[1]:.1f}" '
            'stroke="#bbb" stroke-width="1"/>'
        )
    if cell is not None and cell.points:
        hull = convex_hull_2d(cell.points)
        coords = " ".join("{:.1f},{:.1f}".format(*px(v)) for v in hull)
        out.append(f'<polygon points="{coords}" fill="none" stroke="green" stroke-width="2"/>')
    if cells.closed is not None:
        for v in sorted(cells.closed.points):
            x, y = px(v)
            out.append(
                f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{scale / 4:.1f}" '
                'fill="none" stroke="blue"/>'
            )
    if cells.strict is not None:
        for v in sorted(cells.strict.points):
            x, y = px(v)
            out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{scale / 8:.1f}" fill="blue"/>')
    for w in sorted(hs.vectors):
        x, y = px(w)
        out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{scale / 6:.1f}" fill="red"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
