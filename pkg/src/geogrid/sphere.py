"""Geodesic geometry on the unit sphere.

Planar lon/lat rings are densified into chains of unit vectors whose
consecutive vertices are joined by great-circle arcs.  Polygons keep every
loop oriented so the interior lies to the left of each edge; shells are
normalised to the smaller of the two regions they bound.

Cell relations are decided by clipping polygon edges against the four
great-circle planes of a cell.  An arc from a to b is parameterised along its
chord, x(t) ~ (1-t)a + tb, so every plane constraint is linear in t.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .cell import (MAX_SIZE, CellId, LatLng, cell_from_point, face_uv_to_xyz, leaf_ids, st_to_uv,
                   xyz_from_latlng)

# orientation results closer to zero than this are treated as exactly zero,
# so points within ~6e-8 m of a plane count as lying on it
SIGN_EPS = 1e-14
BOUNDARY_EPS = 1e-13
# overlaps whose intersection area is below this floor are reported as touches
TOUCH_AREA_FLOOR = 1e-12
DEFAULT_MAX_STEP = 0.05

# fixed generic reference direction for crossing-parity containment
_REF = np.array([0.2672612419124244, -0.5345224838248488, 0.8017837257372732])
_REF = _REF / np.linalg.norm(_REF)

UnitVector = np.ndarray


class GeometryError(ValueError):
    pass


class Relation(enum.Enum):
    DISJOINT = "disjoint"
    TOUCHES = "touches"
    OVERLAPS = "overlaps"
    CROSSES = "crosses"
    CONTAINS_CELL = "contains_cell"
    WITHIN_CELL = "within_cell"


def unit_vector(lat: float, lng: float) -> np.ndarray:
    return np.array(xyz_from_latlng(lat, lng))


def to_latlng(p) -> LatLng:
    return LatLng.from_point(p)


def _cross(a, b) -> np.ndarray:
    """Cross product over the last axis; np.cross is slow on small inputs."""
    if np.ndim(a) == 1 and np.ndim(b) == 1:
        a0, a1, a2 = a.tolist()
        b0, b1, b2 = b.tolist()
        return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _tri_areas(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Signed areas of triangles (q, a_i, b_i); q broadcasts."""
    num = np.einsum("...i,...i->...", a, _cross(b - a, q - a))
    # a.((b-a)x(q-a)) = det(a,b,q) = det(q,a,b)
    den = 1.0 + np.einsum("...i,...i->...", q, a) + np.einsum("...i,...i->...", a, b) \
        + np.einsum("...i,...i->...", b, q)
    return 2.0 * np.arctan2(num, den)


def _fan_sum(q: np.ndarray, loop: np.ndarray) -> float:
    return float(_tri_areas(q, loop, np.roll(loop, -1, axis=0)).sum())


def _loop_anchor(loop: np.ndarray) -> np.ndarray:
    s = loop.sum(axis=0)
    n = np.linalg.norm(s)
    if n > 1e-6 * len(loop):
        return s / n
    c = _cross(loop[0], loop[1])
    return c / np.linalg.norm(c)


def loop_left_area(loop: np.ndarray) -> float:
    """Area of the region to the left of a closed loop, in (0, 4pi)."""
    s = _fan_sum(_loop_anchor(loop), loop)
    return s if s > 0 else s + 4 * math.pi


# --- chains -----------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicChain:
    """Vertices joined by minor great-circle arcs; `closed` joins last to first."""

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = _normalize_rows(np.asarray(self.vertices, dtype=float).reshape(-1, 3))
        keep = np.ones(len(v), dtype=bool)
        keep[1:] = np.any(v[1:] != v[:-1], axis=1)
        v = v[keep]
        if self.closed and len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        need = 3 if self.closed else 2
        if len(v) < need:
            raise GeometryError(f"chain needs at least {need} distinct vertices")
        a, b = self._edges_of(v)
        if np.any(np.einsum("ij,ij->i", a, b) <= -1 + 1e-15):
            raise GeometryError("antipodal consecutive vertices")
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    def _edges_of(self, v):
        if self.closed:
            return v, np.roll(v, -1, axis=0)
        return v[:-1], v[1:]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self._edges_of(self.vertices)

    def __len__(self):
        return len(self.vertices)

    def reversed(self) -> "GeodesicChain":
        return GeodesicChain(self.vertices[::-1].copy(), self.closed)

    def length(self) -> float:
        a, b = self.edges()
        return float(np.arctan2(np.linalg.norm(_cross(a, b), axis=1),
                                np.einsum("ij,ij->i", a, b)).sum())


def densify_ring(ring: Sequence, max_step: float = DEFAULT_MAX_STEP) -> GeodesicChain:
    """Densify a closed lon/lat ring, interpreting each edge as lat/lng-linear.

    `ring` holds LatLng values or (lat, lng) pairs.  Longitudes may be unwrapped
    beyond +-180 so that an antimeridian-crossing ring stays continuous.
    """
    pts = _ring_coords(ring)
    if len(pts) < 2 or pts[0] != pts[-1]:
        raise GeometryError("ring is not closed")
    return GeodesicChain(_densify_coords(pts, max_step, closed=True), closed=True)


def densify_line(line: Sequence, max_step: float = DEFAULT_MAX_STEP) -> GeodesicChain:
    pts = _ring_coords(line)
    return GeodesicChain(_densify_coords(pts, max_step, closed=False), closed=False)


def _ring_coords(ring) -> list[tuple[float, float]]:
    out = []
    for p in ring:
        if isinstance(p, LatLng):
            out.append((p.lat, p.lng))
        else:
            out.append((float(p[0]), float(p[1])))
    return out


def _densify_coords(pts, max_step, closed):
    if not max_step > 0:
        raise GeometryError("max_step must be positive")
    if closed:
        distinct = {p for p in pts[:-1]}
        if len(distinct) < 3:
            raise GeometryError("degenerate ring: fewer than 3 distinct vertices")
        arr = np.array(pts)
        shoelace = np.sum(arr[:-1, 1] * arr[1:, 0] - arr[1:, 1] * arr[:-1, 0])
        if shoelace == 0:
            raise GeometryError("degenerate ring: zero area")
    lat_lng = []
    for (la0, lo0), (la1, lo1) in zip(pts[:-1], pts[1:]):
        if la0 == la1 and abs(la0) == 90.0:
            # an edge along a pole is a single point
            lat_lng.append((la0, lo0))
            continue
        if abs(lo1 - lo0) >= 180 and abs(la0) != 90.0 and abs(la1) != 90.0:
            raise GeometryError(
                "edge spans 180 degrees of longitude or more; normalize the antimeridian first")
        n = max(1, math.ceil(math.hypot(la1 - la0, lo1 - lo0) / max_step - 1e-12))
        for k in range(n):
            f = k / n
            lat_lng.append((la0 + (la1 - la0) * f, lo0 + (lo1 - lo0) * f))
    if not closed:
        lat_lng.append(pts[-1])
    lat = np.radians([p[0] for p in lat_lng])
    lng = np.radians([p[1] for p in lat_lng])
    c = np.cos(lat)
    xyz = np.column_stack([np.cos(lng) * c, np.sin(lng) * c, np.sin(lat)])
    polar = np.abs([p[0] for p in lat_lng]) == 90.0
    if polar.any():
        xyz[polar] = [[0.0, 0.0, 1.0] if p[0] > 0 else [0.0, 0.0, -1.0]
                      for p, flag in zip(lat_lng, polar) if flag]
    return xyz


# --- edge soup shared by polygons and polylines -----------------------------

def _robust_cross(a, b):
    """a x b computed as (a + b) x (b - a) / 2, which keeps its relative
    precision when a and b are nearly equal."""
    return 0.5 * _cross(a + b, b - a)


class _Edges:
    """Flat arrays of arc endpoints with cached normals."""

    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.a = np.ascontiguousarray(a)
        self.b = np.ascontiguousarray(b)
        self.n = _robust_cross(self.a, self.b)
        self.nhat = _normalize_rows(self.n)
        self.span_a = _cross(self.nhat, self.a)
        self.span_b = _cross(self.b, self.nhat)
        self.chord = np.linalg.norm(self.b - self.a, axis=1)

    def __len__(self):
        return len(self.a)

    def take(self, idx) -> "_Edges":
        e = object.__new__(_Edges)
        for k in ("a", "b", "n", "nhat", "span_a", "span_b", "chord"):
            setattr(e, k, getattr(self, k)[idx])
        return e

    def on_edges(self, x: np.ndarray, eps: float = BOUNDARY_EPS) -> np.ndarray:
        """For (k,3) points, whether each lies on some edge (within eps radians)."""
        out = np.zeros(len(x), dtype=bool)
        for lo in range(0, len(x), 2048):
            xs = x[lo:lo + 2048]
            near = np.abs(xs @ self.nhat.T) < eps
            within = (xs @ self.span_a.T >= -eps) & (xs @ self.span_b.T >= -eps)
            out[lo:lo + 2048] = np.any(near & within, axis=1)
        return out

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Angular distance from each point to the nearest edge."""
        out = np.full(len(x), np.inf)
        for lo in range(0, len(x), 256):
            xs = x[lo:lo + 256]
            d_plane = np.arcsin(np.clip(np.abs(xs @ self.nhat.T), 0, 1))
            within = (xs @ self.span_a.T >= 0) & (xs @ self.span_b.T >= 0)
            # chord lengths stay accurate where arccos of a dot product rounds to 0
            da = np.linalg.norm(xs[:, None, :] - self.a[None], axis=2)
            db = np.linalg.norm(xs[:, None, :] - self.b[None], axis=2)
            ends = 2 * np.arcsin(np.clip(np.minimum(da, db) / 2, 0, 1))
            out[lo:lo + 256] = np.where(within, d_plane, ends).min(axis=1)
        return out


def _parity_basis(edges: _Edges, ref: np.ndarray):
    return np.sign(edges.n @ ref), _robust_cross(edges.a, ref), _robust_cross(edges.b, ref)


def _crossing_parity(edges: _Edges, ref: np.ndarray, x: np.ndarray, basis=None) -> np.ndarray:
    """Parity of crossings between arcs ref->x_i and the edge set.

    Vertices lying exactly on an arc are nudged to the negative side, which
    keeps the count consistent when an arc passes through a shared vertex.
    `basis` is a cached _parity_basis(edges, ref).
    """
    sigma, ar, br = basis if basis is not None else _parity_basis(edges, ref)
    out = np.zeros(len(x), dtype=bool)
    for lo in range(0, len(x), 2048):
        xs = x[lo:lo + 2048]
        tau = xs @ edges.n.T
        sa = np.where(xs @ ar.T > 0, 1.0, -1.0)
        sb = np.where(xs @ br.T > 0, 1.0, -1.0)
        hit = (tau * sigma < 0) & (sa == -sigma) & (sb == sigma)
        out[lo:lo + 2048] = (np.count_nonzero(hit, axis=1) & 1).astype(bool)
    return out


# --- polygons -----------------------------------------------------------------

class SphericalPolygon:
    """One or more shells, each with optional holes.

    Loops are stored with the interior on the left: shells counterclockwise
    around the smaller region they bound, holes clockwise.
    """

    def __init__(self, parts: Sequence[Sequence[np.ndarray]], oriented: bool = False):
        norm_parts = []
        for part in parts:
            if not part:
                continue
            loops = [GeodesicChain(l, closed=True).vertices for l in part]
            shell, holes = loops[0], loops[1:]
            if not oriented:
                shell = _small_side(shell)
                holes = [_small_side(h)[::-1].copy() for h in holes]
            norm_parts.append((shell, holes))
        if not norm_parts:
            raise GeometryError("empty polygon")
        self.parts = norm_parts
        loops = [l for s, hs in norm_parts for l in (s, *hs)]
        self.loops = loops
        self._edges = _Edges(np.vstack(loops), np.vstack([np.roll(l, -1, axis=0) for l in loops]))
        self.vertices = self._edges.a
        self._ref_inside = {}
        self._area = None
        self._basis = {}

    @classmethod
    def from_latlng(cls, parts, max_step: float = DEFAULT_MAX_STEP) -> "SphericalPolygon":
        """Build from [[shell_ring, hole_ring, ...], ...] of closed (lat, lng) rings."""
        return cls([[densify_ring(r, max_step).vertices for r in part] for part in parts])

    @property
    def edges(self) -> _Edges:
        return self._edges

    def __repr__(self):
        return f"SphericalPolygon(parts={len(self.parts)}, edges={len(self._edges)})"

    def area(self) -> float:
        if self._area is None:
            total = 0.0
            for shell, holes in self.parts:
                total += loop_left_area(shell)
                for h in holes:
                    total -= 4 * math.pi - loop_left_area(h)
            self._area = total
        return self._area

    def _ref_state(self, ref_sign: int) -> bool:
        if ref_sign not in self._ref_inside:
            r = _REF * ref_sign
            inside = False
            for shell, holes in self.parts:
                if _left_of_loop(shell, r) and all(_left_of_loop(h, r) for h in holes):
                    inside = True
                    break
            self._ref_inside[ref_sign] = inside
        return self._ref_inside[ref_sign]

    def contains_points(self, x: np.ndarray, closed: bool = True) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        use_pos = x @ _REF >= 0
        out = np.empty(len(x), dtype=bool)
        for sign, mask in ((1, use_pos), (-1, ~use_pos)):
            if mask.any():
                basis = self._basis.get(sign)
                if basis is None:
                    basis = self._basis[sign] = _parity_basis(self._edges, _REF * sign)
                out[mask] = _crossing_parity(self._edges, _REF * sign, x[mask], basis) ^ self._ref_state(sign)
        on = self._edges.on_edges(x)
        out[on] = closed
        return out

    def contains_point(self, p) -> bool:
        return bool(self.contains_points(np.asarray(p, dtype=float)[None, :])[0])

    def distance_to_boundary(self, x: np.ndarray) -> np.ndarray:
        return self._edges.distance(np.atleast_2d(x))

    def bounding_cap(self) -> tuple[np.ndarray, float]:
        """(axis, angular radius) of a cap enclosing every vertex."""
        axis = _loop_anchor(self.vertices)
        radius = float(np.arccos(np.clip(self.vertices @ axis, -1, 1)).max())
        return axis, radius


def _left_of_loop(loop: np.ndarray, r: np.ndarray) -> bool:
    """Whether r lies in the region left of `loop`.

    Seeds a point just left of the longest edge, then counts crossings along
    a two-arc path from the seed to r.
    """
    edges = _Edges(loop, np.roll(loop, -1, axis=0))
    k = int(np.argmax(edges.chord))
    m = edges.a[k] + edges.b[k]
    m /= np.linalg.norm(m)
    others = np.delete(np.arange(len(edges)), k)
    gap = float(edges.take(others).distance(m[None])[0]) if len(others) else 1.0
    delta = min(1e-7, 0.25 * gap, 0.25 * float(edges.chord[k]))
    seed = m + delta * edges.nhat[k]
    seed /= np.linalg.norm(seed)
    mid = seed + r
    if np.linalg.norm(mid) < 1e-6:
        mid = _cross(seed, edges.nhat[k]) + 1e-3 * seed
    mid /= np.linalg.norm(mid)
    flips = _crossing_parity(edges, seed, mid[None])[0] ^ _crossing_parity(edges, mid, r[None])[0]
    return not flips


def _small_side(loop: np.ndarray) -> np.ndarray:
    if loop_left_area(loop) > 2 * math.pi + 1e-12:
        return loop[::-1].copy()
    return loop


@dataclass(frozen=True)
class Polyline:
    chains: tuple[GeodesicChain, ...]
    _edges: _Edges = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.chains:
            raise GeometryError("empty polyline")
        object.__setattr__(self, "chains", tuple(self.chains))
        pairs = [c.edges() for c in self.chains]
        object.__setattr__(self, "_edges", _Edges(np.vstack([p[0] for p in pairs]),
                                                   np.vstack([p[1] for p in pairs])))

    @property
    def edges(self) -> _Edges:
        return self._edges

    @property
    def vertices(self) -> np.ndarray:
        return np.vstack([c.vertices for c in self.chains])

    def distance_to_boundary(self, x):
        return self._edges.distance(np.atleast_2d(x))


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        p = _normalize_rows(np.atleast_2d(np.asarray(self.points, dtype=float)))
        if len(p) == 0:
            raise GeometryError("empty point set")
        object.__setattr__(self, "points", p)


Region = Union[SphericalPolygon, Polyline, GeodesicChain, PointSet, np.ndarray]


def as_region(region) -> Union[SphericalPolygon, Polyline, PointSet]:
    if isinstance(region, (SphericalPolygon, Polyline, PointSet)):
        return region
    if isinstance(region, GeodesicChain):
        if region.closed:
            return SphericalPolygon([[region.vertices]])
        return Polyline((region,))
    arr = np.asarray(region, dtype=float)
    if arr.shape == (3,) or (arr.ndim == 2 and arr.shape[1] == 3):
        return PointSet(arr)
    raise TypeError(f"unsupported region type {type(region).__name__}")


def region_area(region) -> float:
    region = as_region(region)
    return region.area() if isinstance(region, SphericalPolygon) else 0.0


# --- cells as clipping frames -----------------------------------------------

def _edge_normals(bounds, v: np.ndarray) -> np.ndarray:
    """Inward unit normals of the four edge planes.

    Built from the face (u, v) bounds, whose cross products are exact; the
    cross product of two nearby corners loses most of its digits at fine levels.
    """
    face, u0, u1, v0, v1 = bounds
    origin = face_uv_to_xyz(face, 0.0, 0.0)
    du = [a - b for a, b in zip(face_uv_to_xyz(face, 1.0, 0.0), origin)]
    dv = [a - b for a, b in zip(face_uv_to_xyz(face, 0.0, 1.0), origin)]

    def plane(t, along, step):
        p = [o + t * d for o, d in zip(origin, along)]
        x, y, z = (p[1] * step[2] - p[2] * step[1], p[2] * step[0] - p[0] * step[2],
                   p[0] * step[1] - p[1] * step[0])
        n = math.sqrt(x * x + y * y + z * z)
        return [x / n, y / n, z / n]

    n = np.array([plane(v0, dv, du), plane(u1, du, dv), plane(v1, dv, du), plane(u0, du, dv)])
    rough = _cross(v, np.roll(v, -1, axis=0))
    return n * np.sign(np.einsum("ij,ij->i", n, rough))[:, None]


class CellFrame:
    """Vertices, inward unit normals and centre of a cell."""

    __slots__ = ("cell", "v", "normals", "center")

    def __init__(self, cell: CellId):
        self.cell = cell
        v = cell.vertices()
        self.v = v
        face, i0, j0, size = cell._bounds_st()
        bounds = (face, st_to_uv(i0 / MAX_SIZE), st_to_uv((i0 + size) / MAX_SIZE),
                  st_to_uv(j0 / MAX_SIZE), st_to_uv((j0 + size) / MAX_SIZE))
        self.normals = _edge_normals(bounds, v)
        mid = face_uv_to_xyz(face, st_to_uv((i0 + size / 2) / MAX_SIZE), st_to_uv((j0 + size / 2) / MAX_SIZE))
        self.center = np.array(mid) / math.sqrt(sum(c * c for c in mid))

    def side(self, x: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(x) @ self.normals.T
        d[np.abs(d) < SIGN_EPS] = 0.0
        return d

    def contains_points(self, x: np.ndarray) -> np.ndarray:
        """Closed containment."""
        return np.all(self.side(x) >= 0, axis=1)

    def polygon(self) -> SphericalPolygon:
        return SphericalPolygon([[self.v]], oriented=True)


@dataclass
class EdgeContact:
    """Clip of candidate edges against one cell."""

    t0: np.ndarray
    t1: np.ndarray
    coincident: np.ndarray  # (m,) plane index the edge lies on, or -1
    nonempty: np.ndarray
    interior: np.ndarray


def clip_edges(frame: CellFrame, edges: _Edges) -> EdgeContact:
    da = frame.side(edges.a)
    db = frame.side(edges.b)
    m = len(edges)
    t0 = np.zeros(m)
    t1 = np.ones(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = da / (da - db)
    lower = (da < 0) & (db >= 0)
    upper = (da >= 0) & (db < 0)
    t0 = np.maximum(t0, np.where(lower, ratio, 0.0).max(axis=1))
    t1 = np.minimum(t1, np.where(upper, ratio, 1.0).min(axis=1))
    dead = np.any((da < 0) & (db < 0), axis=1)
    on_plane = (da == 0) & (db == 0)
    coincident = np.where(on_plane.any(axis=1), on_plane.argmax(axis=1), -1)
    nonempty = ~dead & (t0 <= t1)
    interior = nonempty & (coincident < 0) & ((t1 - t0) * edges.chord > SIGN_EPS)
    return EdgeContact(t0, t1, coincident, nonempty, interior)


def _arc_points(edges: _Edges, t: np.ndarray) -> np.ndarray:
    return _normalize_rows((1 - t)[:, None] * edges.a + t[:, None] * edges.b)


# --- relations ----------------------------------------------------------------

def relate_cell(region, c: CellId) -> Relation:
    """Topological relation of a region to cell `c`.

    CONTAINS_CELL means the region contains the cell; WITHIN_CELL means the
    region lies within it.  A polygon identical to the cell reports
    CONTAINS_CELL.
    """
    region = as_region(region)
    frame = CellFrame(c)
    if isinstance(region, PointSet):
        return _relate_points(region, frame)
    edges = region.edges
    rel, _ = relate_frame(region, frame, edges, np.arange(len(edges)))
    return rel


def relate_frame(region, frame: CellFrame, edges: _Edges, cand: np.ndarray,
                 area_floor: bool = True):
    """Relation for a polygon or polyline given candidate edge indices.

    Returns (relation, indices of candidates still touching the cell).
    """
    sub = edges.take(cand)
    contact = clip_edges(frame, sub)
    child_cand = cand[contact.nonempty]
    if isinstance(region, SphericalPolygon):
        if contact.interior.any():
            if len(cand) == len(edges) and contact.nonempty.all() \
                    and frame.contains_points(region.vertices).all():
                return Relation.WITHIN_CELL, child_cand
            if area_floor and _intersection_area(region, frame, sub, contact) < TOUCH_AREA_FLOOR:
                return Relation.TOUCHES, child_cand
            return Relation.OVERLAPS, child_cand
        if region.contains_point(frame.center):
            return Relation.CONTAINS_CELL, child_cand
        return (Relation.TOUCHES if contact.nonempty.any() else Relation.DISJOINT), child_cand
    if contact.interior.any():
        if len(cand) == len(edges) and frame.contains_points(region.vertices).all():
            return Relation.WITHIN_CELL, child_cand
        return Relation.CROSSES, child_cand
    return (Relation.TOUCHES if contact.nonempty.any() else Relation.DISJOINT), child_cand


def _relate_points(ps: PointSet, frame: CellFrame) -> Relation:
    level = frame.cell.level
    snapped = np.array([cell_from_point(p, level).raw == frame.cell.raw for p in ps.points])
    if snapped.all():
        return Relation.WITHIN_CELL
    if snapped.any():
        return Relation.CROSSES
    if frame.contains_points(ps.points).any():
        return Relation.TOUCHES
    return Relation.DISJOINT


def _intersection_area(poly: SphericalPolygon, frame: CellFrame, sub: _Edges,
                       contact: EdgeContact) -> float:
    center = frame.center
    total = 0.0
    keep = contact.nonempty & ((contact.t1 - contact.t0) * sub.chord > 0)
    idx = np.flatnonzero(keep)
    cell_dirs = np.roll(frame.v, -1, axis=0) - frame.v
    coincident_on = {k: [] for k in range(4)}
    if len(idx):
        p0 = _arc_points(sub.take(idx), contact.t0[idx])
        p1 = _arc_points(sub.take(idx), contact.t1[idx])
        co = contact.coincident[idx]
        use = np.ones(len(idx), dtype=bool)
        for j in np.flatnonzero(co >= 0):
            k = co[j]
            coincident_on[k].append((p0[j], p1[j]))
            use[j] = np.dot(sub.b[idx[j]] - sub.a[idx[j]], cell_dirs[k]) > 0
        if use.any():
            total += float(_tri_areas(center, p0[use], p1[use]).sum())
        ends = np.vstack([p0, p1])
    else:
        ends = np.empty((0, 3))
    # cell-edge pieces lying inside the polygon
    sides = frame.side(ends) if len(ends) else np.empty((0, 4))
    pieces_a, pieces_b, mids, ks = [], [], [], []
    for k in range(4):
        va, vb = frame.v[k], frame.v[(k + 1) % 4]
        span = _angle(va, vb)
        on = ends[np.abs(sides[:, k]) == 0] if len(ends) else ends
        params = [0.0, 1.0]
        for x in on:
            s = _angle(va, x) / span
            if 0.0 < s < 1.0:
                params.append(s)
        params = sorted(set(params))
        pts = [_slerp(va, vb, s) for s in params]
        for s0, s1, x0, x1 in zip(params[:-1], params[1:], pts[:-1], pts[1:]):
            if s1 - s0 <= 1e-15:
                continue
            pieces_a.append(x0)
            pieces_b.append(x1)
            mids.append(_slerp(va, vb, 0.5 * (s0 + s1)))
            ks.append(k)
    if mids:
        mids = np.array(mids)
        inside = poly.contains_points(mids)
        for j, k in enumerate(ks):
            if inside[j] and coincident_on[k]:
                if any(_on_segment(mids[j], a, b) for a, b in coincident_on[k]):
                    inside[j] = False
        if inside.any():
            total += float(_tri_areas(center, np.array(pieces_a)[inside],
                                      np.array(pieces_b)[inside]).sum())
    return max(0.0, total)


def _angle(a, b) -> float:
    """Angle between two unit vectors, accurate at both ends of the range."""
    a0, a1, a2 = a.tolist()
    b0, b1, b2 = b.tolist()
    cx, cy, cz = a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0
    return math.atan2(math.sqrt(cx * cx + cy * cy + cz * cz), a0 * b0 + a1 * b1 + a2 * b2)


def _slerp(a, b, s):
    if s == 0.0:
        return a
    if s == 1.0:
        return b
    omega = _angle(a, b)
    so = math.sin(omega)
    x = math.sin((1 - s) * omega) / so * a + math.sin(s * omega) / so * b
    return x / math.sqrt(float(x @ x))


def _on_segment(x, a, b) -> bool:
    n = _cross(a, b)
    nn = np.linalg.norm(n)
    if nn == 0:
        return False
    n = n / nn
    return (abs(np.dot(x, n)) < BOUNDARY_EPS and np.dot(_cross(n, a), x) >= -BOUNDARY_EPS
            and np.dot(_cross(b, n), x) >= -BOUNDARY_EPS)


def intersection_area(poly: SphericalPolygon, c: CellId) -> float:
    """Area of poly intersected with cell `c`, steradians."""
    frame = CellFrame(c)
    rel, _ = relate_frame(poly, frame, poly.edges, np.arange(len(poly.edges)), area_floor=False)
    return frame_intersection_area(poly, frame, rel, np.arange(len(poly.edges)))


def frame_intersection_area(poly: SphericalPolygon, frame: CellFrame, rel: Relation,
                            cand: np.ndarray) -> float:
    if rel is Relation.DISJOINT or rel is Relation.TOUCHES and cand.size == 0:
        return 0.0
    if rel is Relation.CONTAINS_CELL:
        return frame.cell.exact_area()
    if rel is Relation.WITHIN_CELL:
        return poly.area()
    sub = poly.edges.take(cand)
    return _intersection_area(poly, frame, sub, clip_edges(frame, sub))


def overlap_fraction(poly: SphericalPolygon, c: CellId) -> float:
    """Share of cell `c` covered by `poly`, in [0, 1]."""
    return min(1.0, intersection_area(poly, c) / c.exact_area())


def cell_polygon(c: CellId) -> SphericalPolygon:
    return SphericalPolygon([[c.vertices()]], oriented=True)


def contains_point(poly: SphericalPolygon, p) -> bool:
    return poly.contains_point(p)


def area(poly: SphericalPolygon) -> float:
    return poly.area()


# --- polygon/polygon predicates used by benchmarks -----------------------------

def _arcs_cross(e1: _Edges, e2: _Edges) -> bool:
    for lo in range(0, len(e1), 512):
        a = e1.a[lo:lo + 512]
        b = e1.b[lo:lo + 512]
        n1 = e1.n[lo:lo + 512]
        c_side = e2.a @ n1.T  # (m, k)
        d_side = e2.b @ n1.T
        a_side = a @ e2.n.T   # (k, m)
        b_side = b @ e2.n.T
        opp1 = (c_side * d_side <= 0).T
        opp2 = a_side * b_side <= 0
        # same-hemisphere check: intersection direction on both arcs
        cand = opp1 & opp2
        if not cand.any():
            continue
        i, j = np.nonzero(cand)
        x = _cross(n1[i], e2.n[j])
        nx = np.linalg.norm(x, axis=1)
        ok = nx > 0
        x[ok] /= nx[ok, None]
        for sgn in (1.0, -1.0):
            y = x * sgn
            on1 = (np.einsum("ij,ij->i", _cross(n1[i], a[i]), y) >= -BOUNDARY_EPS) & \
                  (np.einsum("ij,ij->i", _cross(b[i], n1[i]), y) >= -BOUNDARY_EPS)
            on2 = (np.einsum("ij,ij->i", _cross(e2.n[j], e2.a[j]), y) >= -BOUNDARY_EPS) & \
                  (np.einsum("ij,ij->i", _cross(e2.b[j], e2.n[j]), y) >= -BOUNDARY_EPS)
            if np.any(ok & on1 & on2):
                return True
    return False


def polygons_intersect(p: SphericalPolygon, q: SphericalPolygon) -> bool:
    """Closed intersection test."""
    if p.contains_points(q.vertices[:1])[0] or q.contains_points(p.vertices[:1])[0]:
        return True
    if _arcs_cross(p.edges, q.edges):
        return True
    return bool(p.contains_points(q.vertices).any() or q.contains_points(p.vertices).any())


def points_leaf_ids(points: np.ndarray) -> np.ndarray:
    return leaf_ids(points)


def latlng_array(lat: Iterable[float], lng: Iterable[float]) -> np.ndarray:
    lat = np.radians(np.asarray(lat, dtype=float))
    lng = np.radians(np.asarray(lng, dtype=float))
    c = np.cos(lat)
    return np.column_stack([np.cos(lng) * c, np.sin(lng) * c, np.sin(lat)])
