"""In-memory triple store with SPO/POS/OSP indexes and property-path evaluation."""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .rdf import Literal, Term, Triple, parse_ntriples

PREFIXES = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
    "geo": "http://www.opengis.net/ont/geosparql#",
    "sosa": "http://www.w3.org/ns/sosa/",
    "kwg-ont": "http://stko-kwg.geog.ucsb.edu/lod/ontology/",
    "kwgr": "http://stko-kwg.geog.ucsb.edu/lod/resource/",
}

_ORDERS = {"spo": (0, 1, 2), "pos": (1, 2, 0), "osp": (2, 0, 1)}


class TripleStore:
    """Immutable once built.  Terms are interned to dense integer ids."""

    def __init__(self, triples: Iterable[Triple] = ()):
        self.terms: list[Term] = []
        self.ids: dict[Term, int] = {}
        rows = []
        for t in triples:
            rows.append((self._intern(t.s), self._intern(t.p), self._intern(t.o)))
        arr = np.array(sorted(set(rows)), dtype=np.int64).reshape(-1, 3)
        self._index = {}
        for name, perm in _ORDERS.items():
            a = arr[:, perm]
            order = np.lexsort((a[:, 2], a[:, 1], a[:, 0]))
            self._index[name] = a[order]
        self._pairs_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _intern(self, term: Term) -> int:
        i = self.ids.get(term)
        if i is None:
            i = self.ids[term] = len(self.terms)
            self.terms.append(term)
        return i

    @classmethod
    def load(cls, lines: Iterable[str]) -> "TripleStore":
        """Build from N-Triples text lines; parse errors carry the line number."""
        return cls(parse_ntriples(lines))

    def __len__(self):
        return len(self._index["spo"])

    def id_of(self, term: Term) -> Optional[int]:
        return self.ids.get(term)

    def index(self, name: str) -> np.ndarray:
        return self._index[name]

    def _range(self, name: str, prefix: Sequence[int]) -> np.ndarray:
        a = self._index[name]
        lo, hi = 0, len(a)
        for col, v in enumerate(prefix):
            seg = a[lo:hi, col]
            lo, hi = lo + int(np.searchsorted(seg, v, "left")), lo + int(np.searchsorted(seg, v, "right"))
        return a[lo:hi]

    def match_ids(self, s: Optional[int] = None, p: Optional[int] = None,
                  o: Optional[int] = None) -> np.ndarray:
        """Rows (s, p, o) of term ids matching the bound positions."""
        if s is None and p is None and o is None:
            return self._index["spo"]
        if s is not None and p is not None:
            return self._range("spo", [s, p] + ([o] if o is not None else []))
        if s is not None and o is not None:
            return self._range("osp", [o, s])[:, [1, 2, 0]]
        if s is not None:
            return self._range("spo", [s])
        if p is not None:
            return self._range("pos", [p] + ([o] if o is not None else []))[:, [2, 0, 1]]
        return self._range("osp", [o])[:, [1, 2, 0]]

    def match(self, s: Optional[Term] = None, p: Optional[Term] = None,
              o: Optional[Term] = None) -> list[Triple]:
        ids = []
        for t in (s, p, o):
            if t is None:
                ids.append(None)
            else:
                i = self.ids.get(t)
                if i is None:
                    return []
                ids.append(i)
        return [Triple(*(self.terms[x] for x in row)) for row in self.match_ids(*ids)]

    def triples(self) -> list[Triple]:
        return self.match()

    def pairs(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """(subjects, objects) for predicate id p, sorted by subject."""
        hit = self._pairs_cache.get(p)
        if hit is None:
            rows = self._range("pos", [p])
            s, o = rows[:, 2], rows[:, 1]
            order = np.lexsort((o, s))
            hit = self._pairs_cache[p] = (s[order], o[order])
        return hit


# --- paths ------------------------------------------------------------------------

@dataclass(frozen=True)
class PathStep:
    predicate: str
    star: bool = False


@dataclass(frozen=True)
class PathQuery:
    """A fixed sequence of predicates; starred steps match zero or one hop.

    Starred steps rely on closure triples materialized at load time, so one
    hop over a transitive predicate already reaches every ancestor.
    """
    steps: tuple[PathStep, ...]
    start: Optional[Term] = None
    end: Optional[Term] = None

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a path needs at least one step")

    @classmethod
    def parse(cls, text: str, start: Optional[Term] = None, end: Optional[Term] = None,
              prefixes: Mapping[str, str] = PREFIXES) -> "PathQuery":
        steps = []
        for part in text.split("/"):
            part = part.strip()
            star = part.endswith("*")
            if star:
                part = part[:-1].strip()
            if not part:
                raise ValueError(f"empty step in path {text!r}")
            steps.append(PathStep(expand(part, prefixes), star))
        return cls(tuple(steps), start, end)


def expand(name: str, prefixes: Mapping[str, str] = PREFIXES) -> str:
    if name.startswith("<") and name.endswith(">"):
        return name[1:-1]
    if name == "a":
        return PREFIXES["rdf"] + "type"
    pre, sep, local = name.partition(":")
    if sep and pre in prefixes:
        return prefixes[pre] + local
    if sep and local.startswith("//"):
        return name
    raise ValueError(f"cannot expand {name!r}: unknown prefix")


def _join(left_start: np.ndarray, left_end: np.ndarray, s: np.ndarray, o: np.ndarray):
    """Compose pairs (a, b) with (b, c) where s is sorted."""
    lo = np.searchsorted(s, left_end, "left")
    hi = np.searchsorted(s, left_end, "right")
    n = hi - lo
    if n.sum() == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    rep_start = np.repeat(left_start, n)
    offs = np.repeat(lo - np.cumsum(np.r_[0, n[:-1]]), n) + np.arange(n.sum())
    return rep_start, o[offs]


def _dedupe_pairs(a: np.ndarray, b: np.ndarray):
    if a.size == 0:
        return a, b
    packed = np.unique(np.stack([a, b], axis=1), axis=0)
    return packed[:, 0], packed[:, 1]


def eval_path_ids(store: TripleStore, q: PathQuery,
                  starts: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Start/end term-id arrays of all bindings, deduplicated.

    `starts` restricts the start to a set of term ids, as a typed subject
    would in a graph pattern.
    """
    empty = (np.empty(0, np.int64), np.empty(0, np.int64))
    if q.start is not None:
        sid = store.id_of(q.start)
        if sid is None or starts is not None and sid not in starts:
            return empty
        cur_a = cur_b = np.array([sid], np.int64)
    elif starts is not None:
        cur_a = cur_b = np.unique(np.asarray(starts, np.int64))
    else:
        cur_a = cur_b = None
    for step in q.steps:
        pid = store.id_of(step.predicate)
        if pid is None:
            s = o = np.empty(0, np.int64)
        else:
            s, o = store.pairs(pid)
        if cur_a is None:
            a, b = s, o
            if step.star:
                every = np.arange(len(store.terms), dtype=np.int64)
                a, b = np.r_[every, a], np.r_[every, b]
        else:
            a, b = _join(cur_a, cur_b, s, o)
            if step.star:
                a, b = np.r_[cur_a, a], np.r_[cur_b, b]
        cur_a, cur_b = _dedupe_pairs(a, b)
        if cur_a.size == 0:
            return empty
    if q.end is not None:
        eid = store.id_of(q.end)
        if eid is None:
            return empty
        keep = cur_b == eid
        cur_a, cur_b = cur_a[keep], cur_b[keep]
    return cur_a, cur_b


def eval_path(store: TripleStore, q: PathQuery) -> set[tuple[Term, Term]]:
    a, b = eval_path_ids(store, q)
    t = store.terms
    return {(t[x], t[y]) for x, y in zip(a.tolist(), b.tolist())}


def naive_eval_path(triples: Iterable[Triple], q: PathQuery) -> set[tuple[Term, Term]]:
    """Reference evaluation: a linear scan per step over a plain triple list."""
    triples = list(set(triples))
    nodes = {x for t in triples for x in (t.s, t.p, t.o)}
    if q.start is not None:
        if q.start not in nodes:
            return set()
        cur = {(q.start, q.start)}
    else:
        cur = None
    for step in q.steps:
        nxt = set()
        if cur is None:
            for t in triples:
                if t.p == step.predicate:
                    nxt.add((t.s, t.o))
            if step.star:
                nxt |= {(n, n) for n in nodes}
        else:
            succ: dict[Term, list[Term]] = {}
            for t in triples:
                if t.p == step.predicate:
                    succ.setdefault(t.s, []).append(t.o)
            for a, b in cur:
                for c in succ.get(b, ()):
                    nxt.add((a, c))
            if step.star:
                nxt |= cur
        cur = nxt
    if q.end is not None:
        cur = {(a, b) for a, b in cur if b == q.end}
    return cur


# --- basic graph patterns -----------------------------------------------------------

_OPS = {"=": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
        ">": operator.gt, ">=": operator.ge}


def _is_var(x) -> bool:
    return isinstance(x, str) and x.startswith("?")


def literal_value(t: Term):
    if isinstance(t, Literal):
        try:
            return Decimal(t.lexical)
        except InvalidOperation:
            return t.lexical
    return t


@dataclass(frozen=True)
class Filter:
    var: str
    op: str
    value: Union[int, float, str, Decimal]

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unsupported filter operator {self.op!r}")

    def test(self, term: Term) -> bool:
        v = literal_value(term)
        w = self.value
        if isinstance(v, Decimal) and isinstance(w, (int, float)):
            w = Decimal(repr(w))
        try:
            return _OPS[self.op](v, w)
        except TypeError:
            return False


Pattern = tuple  # (subject, predicate-or-PathQuery, object); strings starting with "?" are variables


def select(store: TripleStore, patterns: Sequence[Pattern],
           filters: Sequence[Filter] = ()) -> list[dict[str, Term]]:
    """Evaluate a basic graph pattern; predicates may be IRIs or PathQuery objects."""
    sols: list[dict[str, Term]] = [{}]
    for s, p, o in patterns:
        new = []
        for sol in sols:
            sv = sol.get(s, None) if _is_var(s) else s
            ov = sol.get(o, None) if _is_var(o) else o
            if isinstance(p, PathQuery):
                q = PathQuery(p.steps, sv, ov)
                hits = eval_path(store, q)
            else:
                pv = sol.get(p) if _is_var(p) else p
                hits = set()
                for t in store.match(sv, pv, ov):
                    if _is_var(p) and p not in sol:
                        hits.add((t.s, t.o, t.p))
                    else:
                        hits.add((t.s, t.o, None))
            for h in hits:
                a, b = h[0], h[1]
                ext = dict(sol)
                ok = True
                for var, val in ((s, a), (o, b)) + (((p, h[2]),) if len(h) > 2 and h[2] is not None else ()):
                    if _is_var(var):
                        if var in ext and ext[var] != val:
                            ok = False
                            break
                        ext[var] = val
                if ok:
                    new.append(ext)
        sols = new
        if not sols:
            break
    out = [s for s in sols if all(f.test(s[f.var]) for f in filters if f.var in s)]
    uniq = {tuple(sorted((k, repr(v)) for k, v in s.items())): s for s in out}
    return [uniq[k] for k in sorted(uniq)]


_TRIPLE_RE = re.compile(r"\s*(\S+)\s+(\S+)\s+(\S+)\s*")


def parse_patterns(text: str, prefixes: Mapping[str, str] = PREFIXES) -> list[Pattern]:
    """Parse `s p o . s p o` with prefixed names, variables and `/`-paths."""
    pats = []
    for chunk in [c for c in text.split(" .") if c.strip()]:
        m = _TRIPLE_RE.fullmatch(chunk)
        if not m:
            raise ValueError(f"cannot parse pattern {chunk.strip()!r}")
        s, p, o = m.groups()
        term = lambda x: x if _is_var(x) else expand(x, prefixes)
        pred = PathQuery.parse(p, prefixes=prefixes) if ("/" in p.replace("//", "") or p.endswith("*")) \
            and not p.startswith("<") else term(p)
        pats.append((term(s), pred, term(o)))
    return pats

