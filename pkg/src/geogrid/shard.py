"""Location-based sharding of cells and triples on the grid hierarchy."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .cell import MAX_LEVEL, CellId, token_parse
from .coverer import homogeneous_covering
from .rdf import IriScheme, RdfError, Triple, parse_line

GLOBAL = "global"
UNROUTED = "unrouted"


class ShardError(ValueError):
    pass


@dataclass(frozen=True)
class ShardMap:
    level: int
    keys: frozenset

    def __post_init__(self):
        if not 0 <= self.level <= MAX_LEVEL:
            raise ShardError(f"shard level {self.level} outside 0..{MAX_LEVEL}")
        keys = frozenset(self.keys)
        for k in keys:
            if k.level != self.level:
                raise ShardError(f"shard key {k.token} is not at level {self.level}")
        if not keys:
            raise ShardError("a shard map needs at least one key")
        object.__setattr__(self, "keys", keys)

    def sorted_keys(self) -> list[CellId]:
        return sorted(self.keys)

    def assign(self, c: CellId) -> Optional[CellId]:
        """The shard holding a cell at or below the shard level, or None."""
        if c.level < self.level:
            raise ShardError(f"cell {c.token} is coarser than the shard level")
        k = c.parent(self.level)
        return k if k in self.keys else None

    def shards_for(self, c: CellId) -> list[CellId]:
        """Shards a cell of any level touches: its ancestor key, or every key below it."""
        if c.level >= self.level:
            k = self.assign(c)
            return [k] if k is not None else []
        return [k for k in self.sorted_keys() if c.contains(k)]

    def to_json(self) -> str:
        return json.dumps({"shard_level": self.level, "tokens": [k.token for k in self.sorted_keys()]})

    @classmethod
    def from_json(cls, text: str) -> "ShardMap":
        try:
            d = json.loads(text)
            return cls(int(d["shard_level"]), frozenset(token_parse(t) for t in d["tokens"]))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
            raise ShardError(f"bad shard map: {e}") from None


def plan(region, shard_level: int) -> ShardMap:
    """Shard keys = the homogeneous covering of the region at shard_level."""
    return ShardMap(shard_level, frozenset(homogeneous_covering(region, shard_level).cells))


@dataclass(frozen=True)
class Route:
    shards: frozenset
    unroutable: tuple = ()


def route(query: Iterable[CellId], m: ShardMap) -> Route:
    """Shards a query covering must visit, plus any cells no shard holds."""
    hit, lost = set(), []
    for c in query:
        ks = m.shards_for(c)
        if ks:
            hit.update(ks)
        else:
            lost.append(c)
    return Route(frozenset(hit), tuple(sorted(set(lost))))


@dataclass
class SplitResult:
    streams: dict[str, list[str]] = field(default_factory=dict)
    input_count: int = 0
    cross_shard: int = 0
    duplicates: int = 0

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in sorted(self.streams.items())}

    def report(self) -> dict:
        return {"input": self.input_count, "cross_shard": self.cross_shard,
                "duplicates": self.duplicates, "streams": self.counts()}


def _cells_of(t: Triple, scheme: IriScheme) -> list[CellId]:
    out = []
    for term in (t.s, t.o):
        if isinstance(term, str):
            c = scheme.parse_cell(term)
            if c is not None:
                out.append(c)
    return out


def split_triples(lines: Iterable[str], m: ShardMap, scheme: IriScheme = IriScheme()) -> SplitResult:
    """Distribute N-Triples lines into per-shard streams keyed by token.

    Triples naming no cell go to `global`; triples whose cells lie outside
    every shard go to `unrouted`.  A triple reaching several shards is copied
    to each and counted once as cross-shard.
    """
    res = SplitResult()
    for lineno, line in enumerate(lines, 1):
        t = parse_line(line, lineno)
        if t is None:
            continue
        res.input_count += 1
        text = t.to_nt() + "\n"
        try:
            cells = _cells_of(t, scheme)
        except RdfError as e:
            raise ShardError(f"line {lineno}: {e}") from None
        if not cells:
            res.streams.setdefault(GLOBAL, []).append(text)
            continue
        keys = sorted({k for c in cells for k in m.shards_for(c)})
        if not keys:
            res.streams.setdefault(UNROUTED, []).append(text)
            continue
        for k in keys:
            res.streams.setdefault(k.token, []).append(text)
        if len(keys) > 1:
            res.cross_shard += 1
            res.duplicates += len(keys) - 1
    return res


def touch_duplicate_rate(res: SplitResult, touches_iri: str) -> float:
    """Share of sfTouches triples that landed in more than one shard."""
    seen = Counter()
    for k, lines in res.streams.items():
        for line in lines:
            if f"<{touches_iri}>" in line:
                seen[line] += 1
    if not seen:
        return 0.0
    return sum(1 for n in seen.values() if n > 1) / len(seen)
