"""Topological enrichment: relation records between features and grid cells."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .cell import MAX_LEVEL, CellId, face_cells
from .coverer import Covering, _root_state, relate_walk
from .sphere import (DEFAULT_MAX_STEP, TOUCH_AREA_FLOOR, CellFrame, Relation, SphericalPolygon,
                     frame_intersection_area, relate_frame)
from .wkt import WktGeometry, parse_wkt, to_region

REFERENCE_LEVEL = 13
_SAFE_ID = re.compile(r"^[A-Za-z0-9._~-]+$")


class EnrichmentError(ValueError):
    pass


class Predicate(str, enum.Enum):
    WITHIN = "sfWithin"
    CONTAINS = "sfContains"
    TOUCHES = "sfTouches"
    OVERLAPS = "sfOverlaps"
    CROSSES = "sfCrosses"
    INTERSECTS = "sfIntersects"


INVERSE = {Predicate.WITHIN: Predicate.CONTAINS, Predicate.CONTAINS: Predicate.WITHIN}
SYMMETRIC = {Predicate.TOUCHES, Predicate.OVERLAPS}
PRECOMPUTED = "precomputed"
INFERRED = "inferred"

Entity = Union[str, CellId]


@dataclass(frozen=True)
class Feature:
    id: str
    geometry: WktGeometry
    max_step: float = DEFAULT_MAX_STEP
    _region: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not _SAFE_ID.match(self.id):
            raise EnrichmentError(f"feature id {self.id!r} is not IRI-safe")

    @classmethod
    def from_wkt(cls, ident: str, text: str, max_step: float = DEFAULT_MAX_STEP) -> "Feature":
        return cls(ident, parse_wkt(text), max_step)

    @property
    def kind(self) -> str:
        return "PLA"[self.geometry.dimension]

    @property
    def region(self):
        if self._region is None:
            object.__setattr__(self, "_region", to_region(self.geometry, self.max_step))
        return self._region


@dataclass(frozen=True)
class RelationRecord:
    subject: Entity
    relation: Predicate
    object: Entity
    provenance: str = PRECOMPUTED

    def __post_init__(self):
        rel = self.relation
        if not isinstance(rel, Predicate):
            try:
                rel = Predicate(rel)
            except ValueError:
                raise EnrichmentError(f"relation {rel!r} is never materialized") from None
            object.__setattr__(self, "relation", rel)
        if self.provenance not in (PRECOMPUTED, INFERRED):
            raise EnrichmentError(f"unknown provenance {self.provenance!r}")

    def key(self):
        return (_ekey(self.subject), self.relation.value, _ekey(self.object))

    def swapped(self, relation: Predicate, provenance: str = INFERRED) -> "RelationRecord":
        return RelationRecord(self.object, relation, self.subject, provenance)


def _ekey(e: Entity):
    return (1, e.raw, "") if isinstance(e, CellId) else (0, 0, e)


def _with_counterpart(subject, pred: Predicate, obj) -> list[RelationRecord]:
    rec = RelationRecord(subject, pred, obj, PRECOMPUTED)
    if pred in INVERSE:
        return [rec, rec.swapped(INVERSE[pred])]
    if pred in SYMMETRIC:
        return [rec, rec.swapped(pred)]
    return [rec]


def _finish(records: Iterable[RelationRecord]) -> list[RelationRecord]:
    seen = {}
    for r in records:
        seen.setdefault(r.key(), r)
    return [seen[k] for k in sorted(seen)]


def _equals_cell(region, cell: CellId) -> bool:
    if not isinstance(region, SphericalPolygon):
        return False
    a = cell.exact_area()
    return abs(region.area() - a) <= 1e-9 * a


def records_for(fid: str, region, cell: CellId, rel: Relation) -> list[RelationRecord]:
    """Records for one (feature, cell) relation."""
    if rel is Relation.CONTAINS_CELL:
        out = _with_counterpart(fid, Predicate.CONTAINS, cell)
        if _equals_cell(region, cell):
            out += _with_counterpart(fid, Predicate.WITHIN, cell)
        return out
    if rel is Relation.WITHIN_CELL:
        return _with_counterpart(fid, Predicate.WITHIN, cell)
    if rel is Relation.OVERLAPS:
        return _with_counterpart(fid, Predicate.OVERLAPS, cell)
    if rel is Relation.TOUCHES:
        return _with_counterpart(fid, Predicate.TOUCHES, cell)
    if rel is Relation.CROSSES:
        return _with_counterpart(fid, Predicate.CROSSES, cell)
    return []


def enrich_feature(f: Feature, level: int = REFERENCE_LEVEL) -> list[RelationRecord]:
    """Relations between a feature and every reference cell it meets."""
    region = f.region
    out = []
    for cell, rel in relate_walk(region, level):
        out.extend(records_for(f.id, region, cell, rel))
    return _finish(out)


def enrich_compressed(f: Feature, min_level: int = 3, max_level: int = REFERENCE_LEVEL,
                      boundary_level: Optional[int] = None) -> list[RelationRecord]:
    """Multi-level enrichment of an areal feature.

    Emits containment for the largest cells inside the feature, within for the
    smallest cell holding it, and overlaps for partially covered cells from
    min_level down to boundary_level (default max_level).  Touches are
    reported at boundary_level only.  Reference-level containment follows by
    transitivity through the cell hierarchy.
    """
    region = f.region
    if not isinstance(region, SphericalPolygon):
        raise EnrichmentError("compressed enrichment needs an areal feature")
    if not 0 <= min_level < max_level <= MAX_LEVEL:
        raise EnrichmentError("need 0 <= min_level < max_level <= 30")
    boundary_level = max_level if boundary_level is None else boundary_level
    if not min_level <= boundary_level <= max_level:
        raise EnrichmentError("boundary_level must lie in [min_level, max_level]")
    out: list[RelationRecord] = []
    within: Optional[CellId] = None

    def visit(cell: CellId, cand) -> bool:
        """Emit records under `cell`; True once its overlap area is known to clear the floor.

        Overlap area only grows from child to parent, so above boundary_level a
        partially covered cell is an overlap as soon as one child is; its own
        area is measured only when no child settles it.
        """
        nonlocal within
        lv = cell.level
        frame = CellFrame(cell)
        measured = lv == boundary_level or lv == max_level
        rel, child_cand = relate_frame(region, frame, region.edges, cand, area_floor=measured)
        if rel is Relation.DISJOINT:
            return False
        if rel is Relation.CONTAINS_CELL:
            cells = [cell] if lv >= min_level else list(cell.descendants(min_level))
            for c in cells:
                out.extend(records_for(f.id, region, c, rel))
            return True
        evidence = False
        if lv < max_level and (rel is not Relation.TOUCHES or lv < boundary_level):
            for child in cell.children():
                evidence |= visit(child, child_cand)
        if rel is Relation.OVERLAPS and not measured and min_level <= lv and not evidence:
            if frame_intersection_area(region, frame, rel, cand) < TOUCH_AREA_FLOOR:
                rel = Relation.TOUCHES
        if lv >= min_level:
            if rel is Relation.WITHIN_CELL:
                if within is None or lv > within.level:
                    within = cell
            elif rel is Relation.OVERLAPS and lv <= boundary_level:
                out.extend(records_for(f.id, region, cell, rel))
            elif rel is Relation.TOUCHES and lv == boundary_level:
                out.extend(records_for(f.id, region, cell, rel))
        if rel is Relation.WITHIN_CELL:
            return evidence or region.area() >= TOUCH_AREA_FLOOR
        return evidence or (rel is Relation.OVERLAPS and (measured or min_level <= lv))

    state = _root_state(region)
    for face in face_cells():
        visit(face, state)
    if within is not None:
        out.extend(records_for(f.id, region, within, Relation.WITHIN_CELL))
    return _finish(out)


def cell_hierarchy_records(level_hi: int, level_lo: int, region: Covering | Iterable[CellId],
                           neighbors: bool = True) -> list[RelationRecord]:
    """One step of hierarchy: parent/child containment for every parent in
    `region` (cells at level_hi), plus edge-neighbour touches at both levels."""
    if level_lo != level_hi + 1:
        raise EnrichmentError("hierarchy records link adjacent levels only")
    parents = sorted({c if c.level == level_hi else c.parent(level_hi) for c in region
                      if c.level >= level_hi})
    out = []
    children = []
    for p in parents:
        for ch in p.children():
            children.append(ch)
            out.extend(_with_counterpart(p, Predicate.CONTAINS, ch))
    if neighbors:
        for group in (parents, children):
            members = set(group)
            for c in group:
                for n in c.edge_neighbors():
                    if n in members:
                        out.append(RelationRecord(c, Predicate.TOUCHES, n, PRECOMPUTED))
    return _finish(out)


def descendant_hierarchy(cells: Iterable[CellId], level: int) -> list[RelationRecord]:
    """Parent/child records linking each cell to all its descendants down to `level`."""
    out = []
    frontier = sorted(set(cells))
    while frontier:
        nxt = []
        for p in frontier:
            if p.level >= level:
                continue
            for ch in p.children():
                out.extend(_with_counterpart(p, Predicate.CONTAINS, ch))
                nxt.append(ch)
        frontier = nxt
    return _finish(out)


def reference_containment(records: Iterable[RelationRecord], fid: str, level: int) -> set:
    """(subject, predicate, object) triples of within/contains links between
    feature `fid` and level-`level` cells."""
    out = set()
    for r in records:
        if r.relation not in (Predicate.WITHIN, Predicate.CONTAINS):
            continue
        s, o = r.subject, r.object
        if s == fid and isinstance(o, CellId) and o.level == level:
            out.add((s, r.relation, o))
        elif o == fid and isinstance(s, CellId) and s.level == level:
            out.add((s, r.relation, o))
    return out
