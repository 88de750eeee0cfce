"""WKT reading and writing, with antimeridian handling."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Any

import numpy as np

from .cell import CellId, LatLng
from .sphere import (DEFAULT_MAX_STEP, GeometryError, PointSet, Polyline,
                     SphericalPolygon, densify_line, unit_vector)

KINDS = ("POINT", "LINESTRING", "POLYGON", "MULTIPOINT", "MULTILINESTRING", "MULTIPOLYGON")
_DEPTH = {"POINT": 0, "LINESTRING": 1, "POLYGON": 2,
          "MULTIPOINT": 1, "MULTILINESTRING": 2, "MULTIPOLYGON": 3}


class WktError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} at byte {offset}"
        super().__init__(message)


class AntimeridianError(ValueError):
    pass


class AntimeridianPolicy(enum.Enum):
    SPLIT = "split"
    REJECT = "reject"
    POINT = "point-abstract"

    @classmethod
    def parse(cls, text: "str | AntimeridianPolicy") -> "AntimeridianPolicy":
        if isinstance(text, cls):
            return text
        aliases = {"point": cls.POINT, "point-abstract": cls.POINT,
                   "split": cls.SPLIT, "reject": cls.REJECT}
        try:
            return aliases[text.lower()]
        except (KeyError, AttributeError):
            raise ValueError(f"unknown antimeridian policy {text!r}") from None


@dataclass(frozen=True)
class WktGeometry:
    """Parsed geometry.

    coordinates nest like the WKT text: a Point holds one LatLng, a LineString
    a list, a Polygon a list of rings, and Multi* kinds a list of members.
    """

    kind: str
    coordinates: Any
    crossing: bool = False

    @property
    def dimension(self) -> int:
        return {"POINT": 0, "MULTIPOINT": 0, "LINESTRING": 1, "MULTILINESTRING": 1}.get(self.kind, 2)

    def polygons(self) -> list:
        if self.kind == "POLYGON":
            return [self.coordinates]
        if self.kind == "MULTIPOLYGON":
            return list(self.coordinates)
        raise GeometryError(f"{self.kind} is not areal")

    def to_wkt(self) -> str:
        return self.kind + _format_body(self.kind, self.coordinates)


# --- parsing ------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:(?P<word>[A-Za-z]+)|(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
                    rb"|(?P<punct>[(),]))")


class _Lexer:
    def __init__(self, text: str):
        self.data = text.encode("utf-8")
        self.pos = 0

    def peek(self):
        m = _TOKEN.match(self.data, self.pos)
        if not m:
            rest = self.data[self.pos:]
            if rest.strip() == b"":
                return None, len(self.data)
            off = self.pos + len(rest) - len(rest.lstrip())
            raise WktError(f"unexpected character {rest.lstrip()[:1].decode('utf-8', 'replace')!r}", off)
        kind = m.lastgroup
        return (kind, m.group(kind).decode()), m.start(kind)

    def next(self):
        tok, off = self.peek()
        if tok is not None:
            self.pos = _TOKEN.match(self.data, self.pos).end()
        return tok, off

    def expect(self, value: str):
        tok, off = self.next()
        if tok is None or tok[1] != value:
            got = "end of input" if tok is None else repr(tok[1])
            raise WktError(f"expected {value!r}, got {got}", off)
        return off


def parse_wkt(text: str) -> WktGeometry:
    """Parse WKT in lon/lat order.

    Rings must be explicitly closed; an open ring is an error rather than
    being closed silently.
    """
    if not text or not text.strip():
        raise WktError("empty WKT text", 0)
    lex = _Lexer(text)
    tok, off = lex.next()
    if tok is None or tok[0] != "word":
        raise WktError("expected geometry keyword", off)
    kind = tok[1].upper()
    if kind not in KINDS:
        raise WktError(f"unsupported geometry kind {tok[1]!r}", off)
    tok, off2 = lex.peek()
    if tok is not None and tok[0] == "word":
        if tok[1].upper() == "EMPTY":
            raise WktError("EMPTY geometries are not supported", off2)
        raise WktError(f"unsupported modifier {tok[1]!r}", off2)
    coords = _parse_nested(lex, _DEPTH[kind], kind)
    tok, off = lex.next()
    if tok is not None:
        raise WktError(f"trailing content {tok[1]!r}", off)
    geom = _build(kind, coords)
    return WktGeometry(kind, geom, _geometry_crosses(kind, geom))


def _parse_nested(lex: _Lexer, depth: int, kind: str):
    start = lex.expect("(")
    if depth == 0:
        pt = _parse_position(lex)
        lex.expect(")")
        return (pt, start)
    items = []
    while True:
        tok, off = lex.peek()
        if depth == 1 and kind == "MULTIPOINT" and tok is not None and tok[1] == "(":
            items.append(_parse_nested(lex, 0, kind))
        elif depth == 1:
            items.append((_parse_position(lex), off))
        else:
            items.append(_parse_nested(lex, depth - 1, kind))
        tok, off = lex.next()
        if tok is None:
            raise WktError("unexpected end of input", off)
        if tok[1] == ")":
            return (items, start)
        if tok[1] != ",":
            raise WktError(f"expected ',' or ')', got {tok[1]!r}", off)


def _parse_position(lex: _Lexer):
    vals = []
    off0 = None
    while True:
        tok, off = lex.peek()
        if tok is None or tok[0] != "num":
            break
        lex.next()
        off0 = off if off0 is None else off0
        vals.append(float(tok[1]))
    if len(vals) != 2:
        raise WktError(f"expected 2 coordinates, got {len(vals)}", off0 if off0 is not None else lex.pos)
    lng, lat = vals
    try:
        return LatLng(lat, lng)
    except ValueError as exc:
        raise WktError(f"coordinate out of range: {exc}", off0) from None


def _build(kind: str, parsed):
    items, off = parsed
    if kind == "POINT":
        return items
    if kind in ("LINESTRING", "MULTIPOINT"):
        pts = [p for p, _ in items]
        if kind == "LINESTRING" and len(pts) < 2:
            raise WktError("linestring needs at least 2 positions", off)
        return pts
    if kind == "MULTILINESTRING":
        return [_build("LINESTRING", member) for member in items]
    if kind == "POLYGON":
        rings = []
        for ring_items, ring_off in items:
            ring = [p for p, _ in ring_items]
            if ring[0] != ring[-1]:
                raise WktError("unclosed ring", ring_off)
            if len(ring) < 4:
                raise WktError("polygon ring needs at least 4 positions", ring_off)
            rings.append(ring)
        return rings
    return [_build("POLYGON", member) for member in items]


# --- antimeridian handling ------------------------------------------------------

def _wrap180(d: float) -> float:
    d = math.fmod(d, 360.0)
    if d > 180:
        d -= 360
    elif d <= -180:
        d += 360
    return d


def _pairs(ring) -> list[tuple[float, float]]:
    return [(p.lat, p.lng) if isinstance(p, LatLng) else (float(p[0]), float(p[1])) for p in ring]


def expand_poles(ring) -> list[tuple[float, float]]:
    """Replace each vertex sitting on a pole by two pole vertices carrying the
    longitudes of its neighbours.  A pole has no longitude of its own, so this
    is what a lat/lng ring needs to describe a corner there."""
    pts = _pairs(ring)
    closed = len(pts) > 1 and pts[0] == pts[-1]
    if closed:
        pts = pts[:-1]
    n = len(pts)
    out = []
    for i, (lat, lng) in enumerate(pts):
        if abs(lat) != 90.0 or n < 3:
            out.append((lat, lng))
            continue
        prev, nxt = pts[i - 1], pts[(i + 1) % n]
        if abs(prev[0]) != 90.0:
            out.append((lat, prev[1]))
        if abs(nxt[0]) != 90.0:
            out.append((lat, nxt[1]))
    if closed:
        out.append(out[0])
    return out


def has_longitude_gap(ring) -> bool:
    pts = expand_poles(ring)
    return any(abs(b[1] - a[1]) >= 180 and abs(a[0]) != 90.0 and abs(b[0]) != 90.0
               for a, b in zip(pts[:-1], pts[1:]))


def detect_crossing(ring) -> bool:
    """True iff consecutive longitudes jump by 180 degrees or more, or the ring
    encloses a pole."""
    pts = _pairs(ring)
    if len(pts) < 2:
        raise GeometryError("need at least 2 vertices")
    if has_longitude_gap(pts):
        return True
    if len(set(pts)) < 3:
        return False
    return pole_inside(pts) is not None


def pole_inside(ring) -> float | None:
    """Latitude (+-90) of a pole strictly inside the ring's smaller side, else None."""
    pts = _pairs(ring)
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    try:
        loop = SphericalPolygon([[np.array([unit_vector(la, lo) for la, lo in pts])]])
    except (GeometryError, ValueError, FloatingPointError):
        return None
    for lat in (90.0, -90.0):
        if loop.contains_points(unit_vector(lat, 0.0)[None], closed=False)[0]:
            return lat
    return None


def unwrap_ring(ring) -> list[tuple[float, float]]:
    """Make longitudes continuous; returns closed (lat, lng) pairs.

    A ring that winds around a pole is closed through that pole, so the
    result is an ordinary planar ring whose longitudes may exceed +-180.
    """
    raw = _pairs(ring)
    pts = expand_poles(raw)
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    out = [pts[0]]
    for lat, lng in pts[1:]:
        out.append((lat, out[-1][1] + _wrap180(lng - out[-1][1])))
    lat0, lng0 = out[0]
    closing = out[-1][1] + _wrap180(lng0 - out[-1][1])
    if abs(closing - lng0) > 1e-9:
        # the ring went once around a pole
        pole = pole_inside(raw)
        if pole is None:
            pole = 90.0 if sum(p[0] for p in pts) >= 0 else -90.0
        out.append((lat0, closing))
        out.append((pole, closing))
        out.append((pole, lng0))
    out.append(out[0])
    # shift so the ring starts inside [-180, 180]
    shift = -360.0 * math.floor((min(p[1] for p in out) + 180.0) / 360.0)
    if shift:
        out = [(la, lo + shift) for la, lo in out]
    return out


def _clip_halfplane(ring, keep):
    """Sutherland-Hodgman clip of a closed (lat, lng) ring by lng-halfplane `keep`."""
    bound, side = keep
    out = []
    pts = ring[:-1]
    for i, cur in enumerate(pts):
        prev = pts[i - 1]
        cin = side * (cur[1] - bound) >= 0
        pin = side * (prev[1] - bound) >= 0
        if cin != pin:
            f = (bound - prev[1]) / (cur[1] - prev[1])
            out.append((prev[0] + f * (cur[0] - prev[0]), bound))
        if cin:
            out.append(cur)
    if out:
        out.append(out[0])
    return out


def split_ring(ring) -> list[list[tuple[float, float]]]:
    """Cut an unwrapped ring at odd multiples of 180 degrees and shift each
    piece back into [-180, 180]."""
    ring = unwrap_ring(ring)
    lo = min(p[1] for p in ring)
    hi = max(p[1] for p in ring)
    pieces = []
    k = math.floor((lo + 180.0) / 360.0)
    while 360.0 * k - 180.0 < hi:
        west, east = 360.0 * k - 180.0, 360.0 * k + 180.0
        part = _clip_halfplane(ring, (west, 1))
        if part:
            part = _clip_halfplane(part, (east, -1))
        if part and _planar_area(part) > 0:
            pieces.append([(la, _clamp_lng(lo_ - 360.0 * k)) for la, lo_ in part])
        k += 1
    return pieces


def _clamp_lng(x):
    return max(-180.0, min(180.0, x))


def _planar_area(ring) -> float:
    return abs(sum(a[1] * b[0] - b[1] * a[0] for a, b in zip(ring[:-1], ring[1:]))) / 2


def _geometry_crosses(kind: str, coords) -> bool:
    if kind == "POINT" or kind == "MULTIPOINT":
        return False
    if kind == "LINESTRING":
        return has_longitude_gap(coords)
    if kind == "MULTILINESTRING":
        return any(has_longitude_gap(l) for l in coords)
    polys = [coords] if kind == "POLYGON" else coords
    return any(detect_crossing(r) for poly in polys for r in poly)


# --- formatting ------------------------------------------------------------------

def fmt_coord(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _fmt_pos(p) -> str:
    if isinstance(p, LatLng):
        return f"{fmt_coord(p.lng)} {fmt_coord(p.lat)}"
    return f"{fmt_coord(p[1])} {fmt_coord(p[0])}"


def _fmt_ring(ring) -> str:
    return "(" + ", ".join(_fmt_pos(p) for p in ring) + ")"


def _format_body(kind: str, coords) -> str:
    if kind == "POINT":
        return f"({_fmt_pos(coords)})"
    if kind in ("LINESTRING", "MULTIPOINT"):
        return _fmt_ring(coords)
    if kind in ("POLYGON", "MULTILINESTRING"):
        return "(" + ", ".join(_fmt_ring(r) for r in coords) + ")"
    return "(" + ", ".join("(" + ", ".join(_fmt_ring(r) for r in poly) + ")" for poly in coords) + ")"


def cell_corners(c: CellId) -> list[LatLng]:
    return [LatLng.from_point(v) for v in c.vertices()]


def cell_to_wkt(c: CellId, policy: "AntimeridianPolicy | str" = AntimeridianPolicy.SPLIT) -> str:
    """Serialize a cell as a closed 4-corner polygon.

    Cells whose corner ring jumps across +-180 or encloses a pole are split
    into a MULTIPOLYGON, rejected, or abstracted to their centre point.
    """
    policy = AntimeridianPolicy.parse(policy)
    corners = cell_corners(c)
    ring = corners + [corners[0]]
    if not detect_crossing(ring):
        return "POLYGON(" + _fmt_ring(expand_poles(ring)) + ")"
    if policy is AntimeridianPolicy.REJECT:
        raise AntimeridianError(f"cell {c.token} crosses the antimeridian or a pole")
    if policy is AntimeridianPolicy.POINT:
        return "POINT(" + _fmt_pos(c.center()) + ")"
    pieces = split_ring(ring)
    return "MULTIPOLYGON(" + ", ".join("(" + _fmt_ring(p) + ")" for p in pieces) + ")"


# --- conversion to sphere regions --------------------------------------------------

def polygon_rings_to_sphere(rings, max_step: float = DEFAULT_MAX_STEP) -> list[np.ndarray]:
    from .sphere import densify_ring
    return [densify_ring(unwrap_ring(r), max_step).vertices for r in rings]


def to_region(geom: WktGeometry, max_step: float = DEFAULT_MAX_STEP):
    """Densified spherical region: PointSet, Polyline or SphericalPolygon."""
    k = geom.kind
    if k == "POINT":
        return PointSet(unit_vector(geom.coordinates.lat, geom.coordinates.lng))
    if k == "MULTIPOINT":
        return PointSet(np.array([unit_vector(p.lat, p.lng) for p in geom.coordinates]))
    if k in ("LINESTRING", "MULTILINESTRING"):
        lines = [geom.coordinates] if k == "LINESTRING" else geom.coordinates
        return Polyline(tuple(densify_line(_unwrap_line(l), max_step) for l in lines))
    return SphericalPolygon([polygon_rings_to_sphere(p, max_step) for p in geom.polygons()])


def _unwrap_line(line) -> list[tuple[float, float]]:
    out = [(line[0].lat, line[0].lng)]
    for p in line[1:]:
        out.append((p.lat, out[-1][1] + _wrap180(p.lng - out[-1][1])))
    return out


def read_wkt_records(lines):
    """Yield (id, WktGeometry) from `id<TAB>WKT` lines; blank and # lines skipped."""
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise WktError(f"line {lineno}: expected id<TAB>WKT")
        ident, text = line.split("\t", 1)
        try:
            yield ident.strip(), parse_wkt(text)
        except WktError as exc:
            raise WktError(f"line {lineno}: {exc}") from None
