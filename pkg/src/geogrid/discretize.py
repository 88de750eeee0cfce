"""Per-cell observations from vector and raster inputs, plus hierarchical roll-up."""

from __future__ import annotations

import csv
import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass, replace
from decimal import Decimal
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np

from .cell import EARTH_RADIUS_KM, CellId, leaf_ids, parent_ids
from .coverer import Covering, walk
from .enrich import REFERENCE_LEVEL, Feature
from .sphere import CellFrame, Relation, SphericalPolygon, frame_intersection_area, latlng_array

MEREOTOPOLOGICAL = "mereotopological"
ARITHMETIC = "arithmetic"
UNITS = ("km2", "percent", "count", "category", "value")
GEOGRAPHIC_CRS = {"epsg:4326", "epsg:4269", "epsg:4258", "ogc:crs84", "crs84", "wgs84", "geographic"}
STATS = ("percent", "mean", "sum")

_TIME = re.compile(r"^\d{4}(-\d{2}-\d{2})?$")
_NAME = re.compile(r"^[A-Za-z0-9_-]+$")


class DiscretizationError(ValueError):
    pass


class ArithmeticQuantityError(DiscretizationError):
    """Raised when asked to sum a quantity that does not add over space."""


@dataclass(frozen=True)
class PropertySpec:
    property: str
    kind: str
    unit: str
    temporal: bool = False

    def __post_init__(self):
        if not _NAME.match(self.property):
            raise DiscretizationError(f"property name {self.property!r} must match [A-Za-z0-9_-]+")
        if self.kind not in (MEREOTOPOLOGICAL, ARITHMETIC):
            raise DiscretizationError(f"unknown quantity kind {self.kind!r}")
        if self.unit not in UNITS:
            raise DiscretizationError(f"unknown unit {self.unit!r}")


def load_manifest(lines: Iterable[str]) -> dict[str, PropertySpec]:
    """Parse `property<TAB>kind<TAB>unit[<TAB>temporal]` rows; `#` starts a comment."""
    out = {}
    for lineno, row in enumerate(csv.reader(lines, delimiter="\t"), 1):
        if not row or row[0].startswith("#"):
            continue
        if len(row) not in (3, 4):
            raise DiscretizationError(f"manifest line {lineno}: expected 3 or 4 columns")
        temporal = len(row) == 4 and row[3].strip().lower() in ("1", "true", "yes", "temporal")
        spec = PropertySpec(row[0].strip(), row[1].strip(), row[2].strip(), temporal)
        if spec.property in out and out[spec.property] != spec:
            raise DiscretizationError(f"manifest line {lineno}: conflicting entry for {spec.property}")
        out[spec.property] = spec
    return out


@dataclass(frozen=True)
class Observation:
    feature_of_interest: CellId
    property: str
    value: float
    unit: str
    quantity_kind: str
    phenomenon_time: Optional[str] = None
    category: Optional[str] = None
    obs_type: str = "S2OverlapObservation"

    def __post_init__(self):
        if not _NAME.match(self.property):
            raise DiscretizationError(f"property name {self.property!r} must match [A-Za-z0-9_-]+")
        if self.category is not None and not _NAME.match(self.category):
            raise DiscretizationError(f"category {self.category!r} must match [A-Za-z0-9_-]+")
        if not _NAME.match(self.obs_type):
            raise DiscretizationError(f"observation type {self.obs_type!r} is not a valid local name")
        if self.unit not in UNITS:
            raise DiscretizationError(f"unknown unit {self.unit!r}")
        if self.quantity_kind not in (MEREOTOPOLOGICAL, ARITHMETIC):
            raise DiscretizationError(f"unknown quantity kind {self.quantity_kind!r}")
        if self.phenomenon_time is not None and not _TIME.match(self.phenomenon_time):
            raise DiscretizationError(f"time {self.phenomenon_time!r} is not YYYY or YYYY-MM-DD")
        v = float(self.value)
        if not math.isfinite(v):
            raise DiscretizationError("observation value must be finite")
        if self.unit == "percent" and not 0.0 <= v <= 100.0:
            raise DiscretizationError(f"percent value {v} outside [0, 100]")
        if self.unit == "km2" and v < 0:
            raise DiscretizationError(f"area value {v} is negative")
        object.__setattr__(self, "value", v)

    @property
    def id(self) -> str:
        parts = [self.property if self.category is None else f"{self.property}.{self.category}",
                 str(self.feature_of_interest.raw)]
        if self.phenomenon_time:
            parts.append(self.phenomenon_time)
        return ".".join(parts)

    def sort_key(self):
        return (self.feature_of_interest.raw, self.property, self.category or "",
                self.phenomenon_time or "")


def _check_kind(spec: Optional[PropertySpec], unit: str, kind: str, time) -> tuple[str, str]:
    if spec is None:
        return unit, kind
    if spec.unit != unit:
        raise DiscretizationError(f"manifest declares unit {spec.unit} for {spec.property}, got {unit}")
    if spec.temporal and time is None:
        raise DiscretizationError(f"property {spec.property} requires a phenomenon time")
    return spec.unit, spec.kind


# --- vector ------------------------------------------------------------------------

def discretize_vector(f: Feature, level: int = REFERENCE_LEVEL, property: str = "overlapArea",
                      time: Optional[str] = None, obs_type: str = "S2OverlapObservation",
                      manifest: Optional[Mapping[str, PropertySpec]] = None) -> list[Observation]:
    """One observation per cell overlapping the feature, valued in km²."""
    region = f.region
    if not isinstance(region, SphericalPolygon):
        raise DiscretizationError(f"feature {f.id} is not areal")
    unit, kind = _check_kind((manifest or {}).get(property), "km2", MEREOTOPOLOGICAL, time)
    r2 = EARTH_RADIUS_KM ** 2
    out = []
    for cell, rel, cand in walk(region, level, include_touches=False):
        if rel is Relation.CONTAINS_CELL:
            a = cell.exact_area()
        else:
            a = frame_intersection_area(region, CellFrame(cell), rel, cand)
        if a <= 0:
            continue
        out.append(Observation(cell, property, a * r2, unit, kind, time, None, obs_type))
    return out


# --- raster ------------------------------------------------------------------------

@dataclass(frozen=True)
class RasterGrid:
    """Geographic lon/lat grid; row 0 is the northernmost row."""
    values: np.ndarray
    xll: float
    yll: float
    cellsize: float
    nodata: Optional[float] = None
    crs: str = "EPSG:4326"

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.size == 0:
            raise DiscretizationError("raster values must be a nonempty 2-D array")
        object.__setattr__(self, "values", v)
        if self.crs.lower() not in GEOGRAPHIC_CRS:
            raise DiscretizationError(f"raster CRS {self.crs!r} is not geographic lon/lat")
        if not self.cellsize > 0:
            raise DiscretizationError("cellsize must be positive")
        top = self.yll + self.nrows * self.cellsize
        right = self.xll + self.ncols * self.cellsize
        if self.yll < -90 - 1e-9 or top > 90 + 1e-9 or self.xll < -180 - 1e-9 or right > 180 + 1e-9:
            raise DiscretizationError("raster extent leaves the lon/lat domain")

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def bounds(self) -> tuple[float, float, float, float]:
        return (self.xll, self.yll, self.xll + self.ncols * self.cellsize,
                self.yll + self.nrows * self.cellsize)

    def footprint(self) -> SphericalPolygon:
        w, s, e, n = self.bounds()
        return SphericalPolygon.from_latlng([[[(s, w), (s, e), (n, e), (n, w), (s, w)]]])

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = np.indices(self.values.shape)
        lat = self.yll + (self.nrows - rows - 0.5) * self.cellsize
        lng = self.xll + (cols + 0.5) * self.cellsize
        return lat.ravel(), lng.ravel()

    def valid_mask(self) -> np.ndarray:
        v = self.values.ravel()
        mask = np.ones(v.shape, bool)
        if np.issubdtype(v.dtype, np.floating):
            mask &= ~np.isnan(v)
        if self.nodata is not None:
            mask &= v != self.nodata
        return mask


def read_ascii_grid(path: Union[str, Path], sidecar: Optional[Union[str, Path]] = None) -> RasterGrid:
    """Read an ESRI ASCII grid and its JSON CRS sidecar (`<path>.json` by default)."""
    path = Path(path)
    side = Path(sidecar) if sidecar else path.with_name(path.name + ".json")
    if not side.exists():
        raise DiscretizationError(f"missing CRS sidecar {side}")
    try:
        crs = json.loads(side.read_text().strip() or "{}").get("crs")
    except json.JSONDecodeError as e:
        raise DiscretizationError(f"bad CRS sidecar {side}: {e}") from None
    if not crs:
        raise DiscretizationError(f"CRS sidecar {side} declares no crs")
    return parse_ascii_grid(path.read_text(), crs)


def parse_ascii_grid(text: str, crs: str = "EPSG:4326") -> RasterGrid:
    lines = text.splitlines()
    header = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if not parts[0][0].isalpha():
            break
        if len(parts) != 2:
            raise DiscretizationError(f"grid line {i + 1}: malformed header")
        header[parts[0].lower()] = parts[1]
        i += 1
    try:
        ncols, nrows = int(header["ncols"]), int(header["nrows"])
        size = float(header["cellsize"])
    except (KeyError, ValueError) as e:
        raise DiscretizationError(f"grid header incomplete: {e}") from None
    if "xllcorner" in header:
        xll, yll = float(header["xllcorner"]), float(header["yllcorner"])
    elif "xllcenter" in header:
        xll = float(header["xllcenter"]) - size / 2
        yll = float(header["yllcenter"]) - size / 2
    else:
        raise DiscretizationError("grid header lacks xllcorner/xllcenter")
    nodata = float(header["nodata_value"]) if "nodata_value" in header else None
    try:
        vals = np.array(" ".join(lines[i:]).split(), dtype=float)
    except ValueError as e:
        raise DiscretizationError(f"grid body: {e}") from None
    if vals.size != nrows * ncols:
        raise DiscretizationError(f"grid body has {vals.size} values, expected {nrows * ncols}")
    return RasterGrid(vals.reshape(nrows, ncols), xll, yll, size, nodata, crs)


def _category_name(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v)).replace(".", "_").replace("-", "m")


def discretize_raster(r: RasterGrid, level: int = REFERENCE_LEVEL, stat: str = "percent",
                      property: str = "landCover", time: Optional[str] = None,
                      obs_type: str = "S2RasterObservation",
                      manifest: Optional[Mapping[str, PropertySpec]] = None) -> list[Observation]:
    """Aggregate pixels into the cells containing their centers.

    `percent` emits one observation per category present in a cell, as a share
    of that cell's valid pixels; `mean` and `sum` emit one per cell.
    """
    if stat not in STATS:
        raise DiscretizationError(f"unknown statistic {stat!r}; expected one of {STATS}")
    lat, lng = r.pixel_centers()
    mask = r.valid_mask()
    if not mask.any():
        raise DiscretizationError("raster has no valid pixels")
    cells = parent_ids(leaf_ids(latlng_array(lat[mask], lng[mask])), level)
    vals = r.values.ravel()[mask]
    unit, default_kind = {"percent": ("percent", ARITHMETIC), "mean": ("value", ARITHMETIC),
                          "sum": ("value", MEREOTOPOLOGICAL)}[stat]
    unit, kind = _check_kind((manifest or {}).get(property), unit, default_kind, time)
    order = np.lexsort((vals, cells))
    cells, vals = cells[order], vals[order]
    starts = np.flatnonzero(np.r_[True, cells[1:] != cells[:-1]])
    ends = np.r_[starts[1:], cells.size]
    out = []
    for a, b in zip(starts, ends):
        cell = CellId(int(cells[a]))
        chunk = vals[a:b]
        if stat == "percent":
            cats, counts = np.unique(chunk, return_counts=True)
            for cat, n in zip(cats, counts):
                out.append(Observation(cell, property, 100.0 * n / chunk.size, unit, kind, time,
                                       _category_name(cat), obs_type))
        else:
            v = float(chunk.mean() if stat == "mean" else chunk.sum())
            out.append(Observation(cell, property, v, unit, kind, time, None, obs_type))
    return out


def category_totals(obs: Iterable[Observation]) -> dict[CellId, float]:
    """Sum of percent observations per (cell); 100 for every cell with data."""
    tot: dict[CellId, float] = defaultdict(float)
    for o in obs:
        if o.unit == "percent":
            tot[o.feature_of_interest] += o.value
    return dict(tot)


# --- aggregation ----------------------------------------------------------------------

def roll_up(obs: Iterable[Observation], to_level: int) -> list[Observation]:
    """Sum mereotopological observations into their ancestors at `to_level`."""
    obs = list(obs)
    if not obs:
        return []
    levels = {o.feature_of_interest.level for o in obs}
    if len(levels) != 1:
        raise DiscretizationError(f"observations span levels {sorted(levels)}")
    (level,) = levels
    if not 0 <= to_level < level:
        raise DiscretizationError(f"cannot roll level {level} up to {to_level}")
    groups: dict[tuple, list[Observation]] = defaultdict(list)
    for o in obs:
        if o.quantity_kind != MEREOTOPOLOGICAL:
            raise ArithmeticQuantityError(
                f"property {o.property} is an arithmetic quantity and does not sum over cells")
        key = (o.feature_of_interest.parent(to_level), o.property, o.phenomenon_time,
               o.category, o.unit, o.obs_type)
        groups[key].append(o)
    out = []
    for (cell, prop, t, cat, unit, otype), members in groups.items():
        total = math.fsum(m.value for m in members)
        out.append(Observation(cell, prop, total, unit, MEREOTOPOLOGICAL, t, cat, otype))
    out.sort(key=Observation.sort_key)
    return out


def weighted_aggregate(obs: Iterable[Observation], region: Union[Covering, Iterable[CellId]],
                       weights: Union[Mapping[CellId, float], Callable[[CellId], float]]) -> float:
    """Σ wᵢvᵢ / Σ wᵢ over observations whose cell lies in the region."""
    cells = sorted(set(region))
    get = weights if callable(weights) else (lambda c: weights.get(c, 0.0))
    num = den = 0.0
    seen = False
    for o in obs:
        c = o.feature_of_interest
        if not any(x.contains(c) for x in cells):
            continue
        seen = True
        w = float(get(c))
        if w < 0 or not math.isfinite(w):
            raise DiscretizationError(f"weight for {c.token} must be finite and nonnegative")
        num += w * o.value
        den += w
    if not seen:
        raise DiscretizationError("no observation falls inside the region")
    if den == 0:
        raise DiscretizationError("all weights inside the region are zero")
    return num / den


def exact_decimal(v: float) -> str:
    """Shortest decimal text that round-trips the float (no exponent)."""
    d = Decimal(repr(float(v)))
    s = format(d, "f")
    return s if "." in s else s + ".0"


def with_time(obs: Iterable[Observation], time: Optional[str]) -> list[Observation]:
    return [replace(o, phenomenon_time=time) for o in obs]
