"""S2 cell hierarchy on the cube-face Hilbert curve.

A cell id is a 64-bit integer: 3 face bits, then two bits per level of
Hilbert position, then a single trailing 1 bit whose position encodes the
level.  Everything here is integer arithmetic except the face projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import NamedTuple

import numpy as np

MAX_LEVEL = 30
NUM_FACES = 6
POS_BITS = 2 * MAX_LEVEL + 1
MAX_SIZE = 1 << MAX_LEVEL

# authalic radius; reproduces the 8.5e7 km^2 (level 0) and 1.27 km^2 (level 13) anchors
EARTH_RADIUS_KM = 6371.0072

_LOOKUP_BITS = 4
_SWAP_MASK = 0x01
_INVERT_MASK = 0x02
_POS_TO_IJ = ((0, 1, 3, 2), (0, 2, 3, 1), (3, 2, 0, 1), (3, 1, 0, 2))
_POS_TO_ORIENTATION = (_SWAP_MASK, 0, 0, _INVERT_MASK | _SWAP_MASK)

_LOOKUP_POS = [0] * (1 << (2 * _LOOKUP_BITS + 2))
_LOOKUP_IJ = [0] * (1 << (2 * _LOOKUP_BITS + 2))


def _init_lookup(level, i, j, orig_orientation, pos, orientation):
    if level == _LOOKUP_BITS:
        ij = (i << _LOOKUP_BITS) + j
        _LOOKUP_POS[(ij << 2) + orig_orientation] = (pos << 2) + orientation
        _LOOKUP_IJ[(pos << 2) + orig_orientation] = (ij << 2) + orientation
        return
    level += 1
    i <<= 1
    j <<= 1
    pos <<= 2
    r = _POS_TO_IJ[orientation]
    for index in range(4):
        _init_lookup(level, i + (r[index] >> 1), j + (r[index] & 1),
                     orig_orientation, pos + index,
                     orientation ^ _POS_TO_ORIENTATION[index])


for _o in range(4):
    _init_lookup(0, 0, 0, _o, 0, _o)

_LOOKUP_POS_NP = np.array(_LOOKUP_POS, dtype=np.int64)


class InvalidCellError(ValueError):
    pass


@dataclass(frozen=True)
class LatLng:
    """A geographic position in degrees."""

    lat: float
    lng: float

    def __post_init__(self):
        lat, lng = float(self.lat), float(self.lng)
        if not (math.isfinite(lat) and math.isfinite(lng)):
            raise ValueError(f"non-finite coordinate ({lat}, {lng})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lng <= 180.0:
            raise ValueError(f"longitude {lng} outside [-180, 180]")
        if lng == -180.0:
            lng = 180.0
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lng", lng)

    def to_point(self) -> tuple[float, float, float]:
        return xyz_from_latlng(self.lat, self.lng)

    @classmethod
    def from_point(cls, p) -> "LatLng":
        x, y, z = float(p[0]), float(p[1]), float(p[2])
        lat = math.degrees(math.atan2(z, math.hypot(x, y)))
        lng = math.degrees(math.atan2(y, x))
        return cls(max(-90.0, min(90.0, lat)), max(-180.0, min(180.0, lng)))


class FaceIJ(NamedTuple):
    face: int
    i: int
    j: int
    orientation: int


# --- cube-face projection -------------------------------------------------

def xyz_from_latlng(lat: float, lng: float) -> tuple[float, float, float]:
    phi = math.radians(lat)
    theta = math.radians(lng)
    c = math.cos(phi)
    return (math.cos(theta) * c, math.sin(theta) * c, math.sin(phi))


def st_to_uv(s: float) -> float:
    if s >= 0.5:
        return (1.0 / 3.0) * (4 * s * s - 1)
    return (1.0 / 3.0) * (1 - 4 * (1 - s) * (1 - s))


def uv_to_st(u: float) -> float:
    if u >= 0:
        return 0.5 * math.sqrt(1 + 3 * u)
    return 1 - 0.5 * math.sqrt(1 - 3 * u)


def st_to_ij(s: float) -> int:
    return max(0, min(MAX_SIZE - 1, int(math.floor(MAX_SIZE * s))))


def face_uv_to_xyz(face: int, u: float, v: float) -> tuple[float, float, float]:
    if face == 0:
        return (1.0, u, v)
    if face == 1:
        return (-u, 1.0, v)
    if face == 2:
        return (-u, -v, 1.0)
    if face == 3:
        return (-1.0, -v, -u)
    if face == 4:
        return (v, -1.0, -u)
    return (v, u, -1.0)


def xyz_to_face_uv(x: float, y: float, z: float) -> tuple[int, float, float]:
    ax, ay, az = abs(x), abs(y), abs(z)
    if ax > ay:
        face = 0 if ax > az else 2
    else:
        face = 1 if ay > az else 2
    if face == 0 and x < 0 or face == 1 and y < 0 or face == 2 and z < 0:
        face += 3
    return (face,) + face_xyz_to_uv(face, x, y, z)


def face_xyz_to_uv(face: int, x: float, y: float, z: float) -> tuple[float, float]:
    if face == 0:
        return y / x, z / x
    if face == 1:
        return -x / y, z / y
    if face == 2:
        return -x / z, -y / z
    if face == 3:
        return z / x, y / x
    if face == 4:
        return z / y, -x / y
    return -y / z, -x / z


# --- cell ids ---------------------------------------------------------------

def _lsb_for_level(level: int) -> int:
    return 1 << (2 * (MAX_LEVEL - level))


def _raw_is_valid(raw: int) -> bool:
    if raw <= 0 or raw >> 64:
        return False
    if (raw >> POS_BITS) >= NUM_FACES:
        return False
    lsb = raw & -raw
    return (lsb & 0x1555555555555555) != 0


def _from_face_ij(face: int, i: int, j: int) -> int:
    n = face << (POS_BITS - 1)
    bits = face & _SWAP_MASK
    mask = (1 << _LOOKUP_BITS) - 1
    for k in range(7, -1, -1):
        bits += ((i >> (k * _LOOKUP_BITS)) & mask) << (_LOOKUP_BITS + 2)
        bits += ((j >> (k * _LOOKUP_BITS)) & mask) << 2
        bits = _LOOKUP_POS[bits]
        n |= (bits >> 2) << (k * 2 * _LOOKUP_BITS)
        bits &= _SWAP_MASK | _INVERT_MASK
    return n * 2 + 1


def _from_face_ij_wrap(face: int, i: int, j: int) -> int:
    # leaf just beyond this face's edge, re-projected onto the adjacent face
    i = max(-1, min(MAX_SIZE, i))
    j = max(-1, min(MAX_SIZE, j))
    scale = 1.0 / MAX_SIZE
    u = scale * ((i << 1) + 1 - MAX_SIZE)
    v = scale * ((j << 1) + 1 - MAX_SIZE)
    face, u, v = xyz_to_face_uv(*face_uv_to_xyz(face, u, v))
    return _from_face_ij(face, st_to_ij(0.5 * (u + 1)), st_to_ij(0.5 * (v + 1)))


def _parent_raw(raw: int, level: int) -> int:
    lsb = _lsb_for_level(level)
    return (raw & -lsb) | lsb


@total_ordering
class CellId:
    """Immutable 64-bit S2 cell identifier."""

    __slots__ = ("raw",)

    def __init__(self, raw: int):
        raw = int(raw)
        if not _raw_is_valid(raw):
            raise InvalidCellError(f"invalid cell id {raw}")
        object.__setattr__(self, "raw", raw)

    def __setattr__(self, name, value):
        raise AttributeError("CellId is immutable")

    def __reduce__(self):
        return (CellId, (self.raw,))

    @classmethod
    def _unchecked(cls, raw: int) -> "CellId":
        c = object.__new__(cls)
        object.__setattr__(c, "raw", raw)
        return c

    def __eq__(self, other):
        return isinstance(other, CellId) and self.raw == other.raw

    def __lt__(self, other):
        return self.raw < other.raw

    def __hash__(self):
        return hash(self.raw)

    def __int__(self):
        return self.raw

    def __repr__(self):
        return f"CellId({self.token})"

    # structure
    @property
    def face(self) -> int:
        return self.raw >> POS_BITS

    @property
    def lsb(self) -> int:
        return self.raw & -self.raw

    @property
    def level(self) -> int:
        return MAX_LEVEL - ((self.lsb.bit_length() - 1) >> 1)

    @property
    def is_leaf(self) -> bool:
        return bool(self.raw & 1)

    @property
    def is_face(self) -> bool:
        return self.level == 0

    def range_min(self) -> int:
        return self.raw - (self.lsb - 1)

    def range_max(self) -> int:
        return self.raw + (self.lsb - 1)

    def contains(self, other: "CellId") -> bool:
        return self.range_min() <= other.raw <= self.range_max()

    def intersects(self, other: "CellId") -> bool:
        return (other.range_min() <= self.range_max()
                and other.range_max() >= self.range_min())

    def parent(self, level: int | None = None) -> "CellId":
        own = self.level
        if level is None:
            level = own - 1
        if not 0 <= level <= own:
            raise InvalidCellError(f"cannot take level-{level} parent of a level-{own} cell")
        return CellId._unchecked(_parent_raw(self.raw, level))

    def children(self) -> tuple["CellId", "CellId", "CellId", "CellId"]:
        if self.is_leaf:
            raise InvalidCellError("leaf cells have no children")
        d = self.lsb >> 2
        r = self.raw
        mk = CellId._unchecked
        return (mk(r - 3 * d), mk(r - d), mk(r + d), mk(r + 3 * d))

    def descendants(self, level: int):
        """Yield the cells at `level` inside this cell, in Hilbert order."""
        if level < self.level:
            raise InvalidCellError("descendant level above cell level")
        lsb = _lsb_for_level(level)
        step = lsb << 1
        mk = CellId._unchecked
        for raw in range(self.range_min() + lsb - 1, self.range_max() + 1, step):
            yield mk(raw)

    # encoding
    @property
    def token(self) -> str:
        return format(self.raw, "016x").rstrip("0")

    @classmethod
    def from_token(cls, token: str) -> "CellId":
        return token_parse(token)

    def to_face_ij(self) -> FaceIJ:
        face = self.face
        bits = face & _SWAP_MASK
        i = j = 0
        raw = self.raw
        for k in range(7, -1, -1):
            nbits = MAX_LEVEL - 7 * _LOOKUP_BITS if k == 7 else _LOOKUP_BITS
            bits += ((raw >> (k * 2 * _LOOKUP_BITS + 1)) & ((1 << (2 * nbits)) - 1)) << 2
            bits = _LOOKUP_IJ[bits]
            i += (bits >> (_LOOKUP_BITS + 2)) << (k * _LOOKUP_BITS)
            j += ((bits >> 2) & ((1 << _LOOKUP_BITS) - 1)) << (k * _LOOKUP_BITS)
            bits &= _SWAP_MASK | _INVERT_MASK
        if self.lsb & 0x1111111111111110:
            bits ^= _SWAP_MASK
        return FaceIJ(face, i, j, bits)

    @classmethod
    def from_face_ij(cls, fij: FaceIJ | tuple, level: int = MAX_LEVEL) -> "CellId":
        face, i, j = fij[0], fij[1], fij[2]
        if not (0 <= face < NUM_FACES and 0 <= i < MAX_SIZE and 0 <= j < MAX_SIZE):
            raise InvalidCellError(f"face/ij out of range: {fij}")
        leaf = cls._unchecked(_from_face_ij(face, i, j))
        return leaf if level == MAX_LEVEL else leaf.parent(level)

    # geometry
    def _bounds_st(self):
        face, i, j, _ = self.to_face_ij()
        size = 1 << (MAX_LEVEL - self.level)
        i0 = i & -size
        j0 = j & -size
        return face, i0, j0, size

    def uv_bounds(self) -> tuple[int, float, float, float, float]:
        face, i0, j0, size = self._bounds_st()
        return (face,
                st_to_uv(i0 / MAX_SIZE), st_to_uv((i0 + size) / MAX_SIZE),
                st_to_uv(j0 / MAX_SIZE), st_to_uv((j0 + size) / MAX_SIZE))

    def center_point(self) -> tuple[float, float, float]:
        face, i0, j0, size = self._bounds_st()
        u = st_to_uv((i0 + size / 2) / MAX_SIZE)
        v = st_to_uv((j0 + size / 2) / MAX_SIZE)
        return _normalize(face_uv_to_xyz(face, u, v))

    def center(self) -> LatLng:
        return LatLng.from_point(self.center_point())

    def vertices(self) -> np.ndarray:
        """Corner unit vectors, counterclockwise, shape (4, 3)."""
        return _vertices(self.raw)

    def edge_neighbors(self) -> tuple["CellId", "CellId", "CellId", "CellId"]:
        level = self.level
        size = 1 << (MAX_LEVEL - level)
        face, i, j, _ = self.to_face_ij()

        def nbr(ii, jj, same):
            raw = _from_face_ij(face, ii, jj) if same else _from_face_ij_wrap(face, ii, jj)
            return CellId._unchecked(_parent_raw(raw, level))

        return (nbr(i, j - size, j - size >= 0),
                nbr(i + size, j, i + size < MAX_SIZE),
                nbr(i, j + size, j + size < MAX_SIZE),
                nbr(i - size, j, i - size >= 0))

    def exact_area(self) -> float:
        """Area on the unit sphere (steradians)."""
        v = self.vertices()
        return triangle_area(v[0], v[1], v[2]) + triangle_area(v[0], v[2], v[3])


def _normalize(p):
    n = math.sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
    return (p[0] / n, p[1] / n, p[2] / n)


_VERTEX_CACHE: dict[int, np.ndarray] = {}


def _vertices(raw: int) -> np.ndarray:
    v = _VERTEX_CACHE.get(raw)
    if v is not None:
        return v
    face, u0, u1, v0, v1 = CellId._unchecked(raw).uv_bounds()
    v = np.array([_normalize(face_uv_to_xyz(face, u0, v0)),
                  _normalize(face_uv_to_xyz(face, u1, v0)),
                  _normalize(face_uv_to_xyz(face, u1, v1)),
                  _normalize(face_uv_to_xyz(face, u0, v1))])
    v.flags.writeable = False
    if len(_VERTEX_CACHE) > 200_000:
        _VERTEX_CACHE.clear()
    _VERTEX_CACHE[raw] = v
    return v


def triangle_area(a, b, c) -> float:
    """Signed area of the geodesic triangle abc (positive when counterclockwise)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    # a . ((b-a) x (c-a)) equals a . (b x c) but keeps precision for tiny triangles
    num = float(np.dot(a, np.cross(b - a, c - a)))
    den = 1.0 + float(np.dot(a, b) + np.dot(b, c) + np.dot(c, a))
    return 2.0 * math.atan2(num, den)


# --- public operations ------------------------------------------------------

def _check_level(level: int) -> int:
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)):
        raise InvalidCellError(f"level must be an integer, got {level!r}")
    if not 0 <= level <= MAX_LEVEL:
        raise InvalidCellError(f"level {level} outside 0..{MAX_LEVEL}")
    return int(level)


def leaf_from_point(x: float, y: float, z: float) -> int:
    face, u, v = xyz_to_face_uv(x, y, z)
    return _from_face_ij(face, st_to_ij(uv_to_st(u)), st_to_ij(uv_to_st(v)))


def cell_from_point(p, level: int = MAX_LEVEL) -> CellId:
    level = _check_level(level)
    raw = leaf_from_point(float(p[0]), float(p[1]), float(p[2]))
    return CellId._unchecked(_parent_raw(raw, level))


def cell_from_latlng(p: LatLng, level: int = MAX_LEVEL) -> CellId:
    return cell_from_point(xyz_from_latlng(p.lat, p.lng), level)


def token(c: CellId) -> str:
    return c.token


def token_parse(t: str) -> CellId:
    if not isinstance(t, str) or not 1 <= len(t) <= 16:
        raise InvalidCellError(f"malformed token {t!r}")
    try:
        raw = int(t, 16)
    except ValueError:
        raise InvalidCellError(f"malformed token {t!r}") from None
    if t != t.strip() or t.startswith(("+", "-")) or "_" in t:
        raise InvalidCellError(f"malformed token {t!r}")
    return CellId(raw << (4 * (16 - len(t))))


def parse_cell(text: str) -> CellId:
    """Accept a decimal id or a hex token."""
    text = text.strip()
    if text.isdigit() and len(text) > 16:
        return CellId(int(text))
    return token_parse(text.lower())


def average_area(level: int) -> float:
    """Mean cell area at `level`, km^2."""
    level = _check_level(level)
    return 4 * math.pi * EARTH_RADIUS_KM ** 2 / (NUM_FACES * 4 ** level)


def cell_area(c: CellId) -> float:
    """Exact spherical area of `c`, km^2."""
    return c.exact_area() * EARTH_RADIUS_KM ** 2


def face_cells() -> list[CellId]:
    return [CellId._unchecked(((f << 1) + 1) << (POS_BITS - 1)) for f in range(NUM_FACES)]


def cells_at_level_count(level: int) -> int:
    level = _check_level(level)
    return NUM_FACES * 4 ** level


# --- vectorised leaf lookup -------------------------------------------------

def _uv_to_st_np(u):
    return np.where(u >= 0, 0.5 * np.sqrt(1 + 3 * np.abs(u)), 1 - 0.5 * np.sqrt(1 + 3 * np.abs(u)))


def leaf_ids(points: np.ndarray) -> np.ndarray:
    """Leaf cell ids (uint64) for an (n, 3) array of unit vectors."""
    p = np.asarray(points, dtype=float)
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    ax, ay, az = np.abs(x), np.abs(y), np.abs(z)
    face = np.where(ax > ay, np.where(ax > az, 0, 2), np.where(ay > az, 1, 2))
    comp = np.choose(face, [x, y, z])
    face = face + np.where(comp < 0, 3, 0)
    u = np.empty_like(x)
    v = np.empty_like(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        table = {
            0: (y / x, z / x), 1: (-x / y, z / y), 2: (-x / z, -y / z),
            3: (z / x, y / x), 4: (z / y, -x / y), 5: (-y / z, -x / z),
        }
    for f, (uf, vf) in table.items():
        m = face == f
        u[m] = uf[m]
        v[m] = vf[m]
    i = np.clip(np.floor(MAX_SIZE * _uv_to_st_np(u)), 0, MAX_SIZE - 1).astype(np.int64)
    j = np.clip(np.floor(MAX_SIZE * _uv_to_st_np(v)), 0, MAX_SIZE - 1).astype(np.int64)
    n = np.zeros(len(p), dtype=np.uint64)
    bits = (face & _SWAP_MASK).astype(np.int64)
    mask = (1 << _LOOKUP_BITS) - 1
    for k in range(7, -1, -1):
        bits = bits + (((i >> (k * _LOOKUP_BITS)) & mask) << (_LOOKUP_BITS + 2))
        bits = bits + (((j >> (k * _LOOKUP_BITS)) & mask) << 2)
        bits = _LOOKUP_POS_NP[bits]
        n |= ((bits >> 2).astype(np.uint64) << np.uint64(k * 2 * _LOOKUP_BITS))
        bits = bits & (_SWAP_MASK | _INVERT_MASK)
    n |= face.astype(np.uint64) << np.uint64(POS_BITS - 1)
    return n * np.uint64(2) + np.uint64(1)


def parent_ids(ids: np.ndarray, level: int) -> np.ndarray:
    lsb = np.uint64(_lsb_for_level(_check_level(level)))
    return (ids & ~(lsb - np.uint64(1)) & ~lsb) | lsb
