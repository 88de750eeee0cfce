"""Cell coverings of spherical regions."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .cell import MAX_LEVEL, CellId, cell_from_point, face_cells
from .sphere import (CellFrame, PointSet, Relation, SphericalPolygon, as_region,
                     relate_frame)

MODES = ("ordinary", "homogeneous", "interior")


class CoveringError(ValueError):
    pass


@dataclass(frozen=True)
class CoveringParams:
    min_level: int = 0
    max_level: int = MAX_LEVEL
    max_cells: Optional[int] = 8
    mode: str = "ordinary"

    def __post_init__(self):
        if self.mode not in MODES:
            raise CoveringError(f"unknown covering mode {self.mode!r}")
        for name in ("min_level", "max_level"):
            v = getattr(self, name)
            if not isinstance(v, int) or not 0 <= v <= MAX_LEVEL:
                raise CoveringError(f"{name} must be an integer in 0..{MAX_LEVEL}")
        if self.min_level > self.max_level:
            raise CoveringError("min_level exceeds max_level")
        if self.mode == "homogeneous" and self.min_level != self.max_level:
            raise CoveringError("homogeneous coverings need min_level == max_level")
        if self.max_cells is not None and self.max_cells < 1:
            raise CoveringError("max_cells must be positive")

    @classmethod
    def homogeneous(cls, level: int) -> "CoveringParams":
        return cls(level, level, None, "homogeneous")


@dataclass(frozen=True)
class Covering:
    cells: tuple[CellId, ...]
    params: CoveringParams

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def __contains__(self, c):
        return c in set(self.cells)

    def tokens(self) -> list[str]:
        return [c.token for c in self.cells]

    def contains_cell(self, c: CellId) -> bool:
        """Whether some covering cell equals or is an ancestor of c."""
        return any(x.contains(c) for x in self.cells)


def _normalize(cells) -> tuple[CellId, ...]:
    """Sort and drop cells that are descendants of another cell."""
    out = []
    for c in sorted(set(cells)):
        if out and out[-1].contains(c):
            continue
        out.append(c)
    return tuple(out)


# --- relation walk ------------------------------------------------------------

def _is_hit(region, rel: Relation) -> bool:
    if rel is Relation.DISJOINT:
        return False
    if rel is Relation.TOUCHES:
        # boundary-only contact counts for linear regions, not for areas
        return not isinstance(region, SphericalPolygon)
    return True


def _root_state(region):
    if isinstance(region, PointSet):
        return None
    return np.arange(len(region.edges))


def _relate(region, cell: CellId, state, final: bool):
    if isinstance(region, PointSet):
        return _relate_pointset(region, cell), None
    return relate_frame(region, CellFrame(cell), region.edges, state, area_floor=final)


def _relate_pointset(ps: PointSet, cell: CellId) -> Relation:
    hits = [cell.contains(cell_from_point(p, MAX_LEVEL)) for p in ps.points]
    if all(hits):
        return Relation.WITHIN_CELL
    if any(hits):
        return Relation.CROSSES
    return Relation.DISJOINT


def relate_walk(region, level: int, include_touches: bool = True) -> Iterator[tuple[CellId, Relation]]:
    """Yield (cell, relation) for every level-`level` cell not disjoint from
    the region, in increasing id order.

    Points are assigned to the single cell they snap to.  Fully contained
    subtrees are expanded arithmetically without further geometry.
    """
    for cell, rel, _ in walk(region, level, include_touches):
        yield cell, rel


def walk(region, level: int, include_touches: bool = True):
    """Like relate_walk, also yielding the indices of region edges that reach
    each cell (None where no edge does)."""
    region = as_region(region)
    if not 0 <= level <= MAX_LEVEL:
        raise CoveringError(f"level {level} outside 0..{MAX_LEVEL}")
    if isinstance(region, PointSet):
        groups: dict[CellId, int] = {}
        for p in region.points:
            c = cell_from_point(p, level)
            groups[c] = groups.get(c, 0) + 1
        n = len(region.points)
        for c in sorted(groups):
            yield c, (Relation.WITHIN_CELL if groups[c] == n else Relation.CROSSES), None
        return
    stack = [(f, _root_state(region)) for f in reversed(face_cells())]
    while stack:
        cell, state = stack.pop()
        final = cell.level == level
        rel, child_state = _relate(region, cell, state, final)
        if rel is Relation.DISJOINT:
            continue
        if rel is Relation.CONTAINS_CELL:
            if final:
                yield cell, rel, None
            else:
                for d in cell.descendants(level):
                    yield d, rel, None
            continue
        if final:
            if rel is not Relation.TOUCHES or include_touches:
                yield cell, rel, state
            continue
        for child in reversed(cell.children()):
            stack.append((child, child_state))


def iter_homogeneous(region, level: int) -> Iterator[CellId]:
    region = as_region(region)
    for cell, rel in relate_walk(region, level):
        if _is_hit(region, rel):
            yield cell


def homogeneous_covering(region, level: int) -> Covering:
    cells = tuple(iter_homogeneous(region, level))
    if not cells:
        raise CoveringError("region does not intersect any cell")
    return Covering(cells, CoveringParams.homogeneous(level))


# --- interior -------------------------------------------------------------------

def interior_covering(region, params: CoveringParams) -> Covering:
    """Largest cells in [min_level, max_level] lying entirely inside the region.

    With max_cells set, whole levels are taken coarse-to-fine and the first
    level that would exceed the cap is truncated in id order.
    """
    region = as_region(region)
    if not isinstance(region, SphericalPolygon):
        return Covering((), params)
    found: list[CellId] = []
    frontier = [(f, _root_state(region)) for f in face_cells()]
    cap = params.max_cells
    while frontier:
        nxt = []
        level_hits = []
        for cell, state in frontier:
            rel, child_state = _relate(region, cell, state, final=False)
            if rel is Relation.CONTAINS_CELL:
                if cell.level >= params.min_level:
                    level_hits.append(cell)
                else:
                    level_hits.extend(cell.descendants(params.min_level))
            elif rel in (Relation.OVERLAPS, Relation.WITHIN_CELL) and cell.level < params.max_level:
                nxt.extend((ch, child_state) for ch in cell.children())
        level_hits.sort()
        if cap is not None and len(found) + len(level_hits) > cap:
            found.extend(level_hits[:cap - len(found)])
            break
        found.extend(level_hits)
        frontier = nxt
    return Covering(_normalize(found), params)


def interior_cells(region, level: int, min_level: int = 0) -> Covering:
    return interior_covering(region, CoveringParams(min_level, level, None, "interior"))


def boundary_cells(region, level: int) -> Covering:
    """Cells at `level` that meet the region without lying inside it."""
    region = as_region(region)
    cells = tuple(c for c, rel in relate_walk(region, level, include_touches=False)
                  if _is_hit(region, rel) and rel is not Relation.CONTAINS_CELL)
    return Covering(cells, CoveringParams.homogeneous(level))


# --- ordinary ----------------------------------------------------------------------

@dataclass
class _Candidate:
    cell: CellId
    state: object
    terminal: bool
    children: list


def covering(region, params: CoveringParams = CoveringParams()) -> Covering:
    """Cover a region with at most max_cells cells (may exceed it only when
    min_level forces more), refining the coarsest, busiest cells first."""
    region = as_region(region)
    if params.mode == "homogeneous":
        return homogeneous_covering(region, params.max_level)
    if params.mode == "interior":
        return interior_covering(region, params)
    max_cells = params.max_cells if params.max_cells is not None else 1 << 62
    result: list[CellId] = []
    heap: list = []
    counter = 0

    def new_candidate(cell, state):
        rel, child_state = _relate(region, cell, state, final=False)
        if not _is_hit(region, rel):
            return None
        terminal = (cell.level >= params.min_level
                    and (cell.level >= params.max_level or rel is Relation.CONTAINS_CELL))
        return _Candidate(cell, child_state, terminal, [])

    def add(cand):
        nonlocal counter
        if cand is None:
            return
        if cand.terminal:
            result.append(cand.cell)
            return
        n_terminal = 0
        for child in cand.cell.children():
            cc = new_candidate(child, cand.state)
            if cc is not None:
                cand.children.append(cc)
                n_terminal += cc.terminal
        if not cand.children:
            return
        key = (cand.cell.level, len(cand.children), n_terminal)
        counter += 1
        heapq.heappush(heap, (key, counter, cand))

    for f in face_cells():
        add(new_candidate(f, _root_state(region)))
    if not heap and not result:
        raise CoveringError("region does not intersect any cell")
    while heap:
        _, _, cand = heapq.heappop(heap)
        if cand.cell.level < params.min_level or len(cand.children) == 1 or \
                len(result) + len(heap) + len(cand.children) <= max_cells:
            for child in cand.children:
                add(child)
        else:
            result.append(cand.cell)
    return Covering(_normalize(result), params)
