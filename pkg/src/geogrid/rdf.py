"""N-Triples emission for cells, relation records and observations."""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Iterator, Mapping, NamedTuple, Optional, Union

from .cell import EARTH_RADIUS_KM, InvalidCellError, CellId
from .discretize import (DiscretizationError, Observation, PropertySpec, exact_decimal)
from .enrich import Predicate, RelationRecord
from .wkt import AntimeridianPolicy, cell_to_wkt

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_STRING = XSD + "string"
XSD_DECIMAL = XSD + "decimal"
XSD_DATE = XSD + "date"
XSD_GYEAR = XSD + "gYear"
GEO = "http://www.opengis.net/ont/geosparql#"
SOSA = "http://www.w3.org/ns/sosa/"
WKT_LITERAL = GEO + "wktLiteral"

DEFAULT_RESOURCE = "http://stko-kwg.geog.ucsb.edu/lod/resource/"
DEFAULT_ONTOLOGY = "http://stko-kwg.geog.ucsb.edu/lod/ontology/"

GEOMETRY_MODES = ("split", "reject", "point", "none")


class RdfError(ValueError):
    pass


class Literal(NamedTuple):
    lexical: str
    datatype: str = XSD_STRING
    lang: Optional[str] = None


Term = Union[str, Literal]


class Triple(NamedTuple):
    s: str
    p: str
    o: Term

    def to_nt(self) -> str:
        return f"{format_term(self.s)} {format_term(self.p)} {format_term(self.o)} ."


_IRI_BAD = re.compile(r'[\x00-\x20<>"{}|^`\\]')
_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")


def check_iri(iri: str) -> str:
    if not _SCHEME.match(iri) or _IRI_BAD.search(iri):
        raise RdfError(f"not an absolute IRI: {iri!r}")
    return iri


_ESC = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r"}


def escape_literal(s: str) -> str:
    return "".join(_ESC.get(ch, ch) for ch in s)


def format_term(t: Term) -> str:
    if isinstance(t, Literal):
        body = f'"{escape_literal(t.lexical)}"'
        if t.lang:
            return f"{body}@{t.lang}"
        return body if t.datatype == XSD_STRING else f"{body}^^<{t.datatype}>"
    if t.startswith("_:"):
        return t
    return f"<{t}>"


# --- parsing ---------------------------------------------------------------------

_UNESC = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_TERM = re.compile(r'''
    <(?P<iri>[^<>"{}|^`\\\x00-\x20]*)>
  | (?P<bnode>_:[A-Za-z0-9_][A-Za-z0-9_.-]*)
  | "(?P<lit>(?:[^"\\\n\r]|\\.)*)"(?:\^\^<(?P<dt>[^<>"{}|^`\\\x00-\x20]*)>|@(?P<lang>[A-Za-z]+(?:-[A-Za-z0-9]+)*))?
''', re.X)
_WS = re.compile(r"[ \t]*")


def _unescape(s: str, lineno: int) -> str:
    out = []
    i = 0
    while i < len(s):
        ch = s[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        nxt = s[i + 1]
        if nxt in _UNESC:
            out.append(_UNESC[nxt])
            i += 2
        elif nxt in "uU":
            n = 4 if nxt == "u" else 8
            hexs = s[i + 2:i + 2 + n]
            if len(hexs) != n or not all(c in "0123456789abcdefABCDEF" for c in hexs):
                raise RdfError(f"line {lineno}: bad \\{nxt} escape")
            out.append(chr(int(hexs, 16)))
            i += 2 + n
        else:
            raise RdfError(f"line {lineno}: bad escape \\{nxt}")
    return "".join(out)


def parse_line(line: str, lineno: int = 1) -> Optional[Triple]:
    """Parse one N-Triples line; returns None for blank or comment lines."""
    pos = _WS.match(line).end()
    if pos == len(line.rstrip("\r\n")) or line[pos] == "#":
        return None
    terms = []
    for k in range(3):
        m = _TERM.match(line, pos)
        if not m:
            raise RdfError(f"line {lineno}: expected term at column {pos + 1}")
        if m.group("iri") is not None:
            iri = _unescape(m.group("iri"), lineno)
            if not _SCHEME.match(iri):
                raise RdfError(f"line {lineno}: relative IRI <{iri}>")
            terms.append(iri)
        elif m.group("bnode"):
            if k == 1:
                raise RdfError(f"line {lineno}: blank node as predicate")
            terms.append(m.group("bnode"))
        else:
            if k < 2:
                raise RdfError(f"line {lineno}: literal in subject or predicate position")
            lex = _unescape(m.group("lit"), lineno)
            terms.append(Literal(lex, m.group("dt") or XSD_STRING, m.group("lang")))
        pos = _WS.match(line, m.end()).end()
    rest = line[pos:].rstrip("\r\n")
    if not rest.startswith("."):
        raise RdfError(f"line {lineno}: missing terminating '.'")
    tail = rest[1:].strip()
    if tail and not tail.startswith("#"):
        raise RdfError(f"line {lineno}: trailing content after '.'")
    return Triple(*terms)


def parse_ntriples(lines: Iterable[str]) -> Iterator[Triple]:
    for lineno, line in enumerate(lines, 1):
        t = parse_line(line, lineno)
        if t is not None:
            yield t


def write_ntriples(triples: Iterable[Triple]) -> Iterator[str]:
    for t in triples:
        yield t.to_nt() + "\n"


def dedupe(triples: Iterable[Triple]) -> list[Triple]:
    return list(dict.fromkeys(triples))


# --- IRIs -------------------------------------------------------------------------

_CELL_LOCAL = re.compile(r"^s2\.level(\d{1,2})\.(\d+)$")


@dataclass(frozen=True)
class IriScheme:
    resource: str = DEFAULT_RESOURCE
    ontology: str = DEFAULT_ONTOLOGY

    def __post_init__(self):
        check_iri(self.resource)
        check_iri(self.ontology)

    def cell(self, c: CellId) -> str:
        return f"{self.resource}s2.level{c.level}.{c.raw}"

    def parse_cell(self, iri: str) -> Optional[CellId]:
        """The cell named by `iri`, or None for non-cell IRIs.

        Raises RdfError for IRIs shaped like cell IRIs that do not name a valid cell.
        """
        if not isinstance(iri, str) or not iri.startswith(self.resource + "s2."):
            return None
        m = _CELL_LOCAL.match(iri[len(self.resource):])
        if not m:
            raise RdfError(f"malformed cell IRI {iri}")
        try:
            c = CellId(int(m.group(2)))
        except (InvalidCellError, ValueError):
            raise RdfError(f"cell IRI {iri} names no valid cell") from None
        if c.level != int(m.group(1)):
            raise RdfError(f"cell IRI {iri} has level {m.group(1)} but the id is level {c.level}")
        return c

    def geometry(self, c: CellId) -> str:
        return f"{self.resource}geometry.s2.level{c.level}.{c.raw}"

    def feature(self, fid: str) -> str:
        return check_iri(self.resource + fid)

    def entity(self, e) -> str:
        return self.cell(e) if isinstance(e, CellId) else self.feature(e)

    def term(self, local: str) -> str:
        return self.ontology + local

    def cell_type(self, level: int) -> str:
        return self.term(f"S2Cell_Level{level}")

    def relation(self, pred: Predicate) -> str:
        return self.term(pred.value)

    def observation(self, o: Observation) -> str:
        return f"{self.resource}observation/{o.id}"

    def observed_property(self, o: Observation) -> str:
        return self.term(o.property if o.category is None else f"{o.property}.{o.category}")


# --- cells --------------------------------------------------------------------------

def emit_cell(c: CellId, geometry: str = "split", scheme: IriScheme = IriScheme()) -> list[Triple]:
    """Type, identifier, area and (unless geometry='none') a WKT geometry node."""
    if geometry not in GEOMETRY_MODES:
        raise RdfError(f"unknown geometry mode {geometry!r}")
    iri = scheme.cell(c)
    out = [Triple(iri, RDF_TYPE, scheme.cell_type(c.level))]
    if geometry != "none":
        wkt = cell_to_wkt(c, AntimeridianPolicy.parse(geometry))
        g = scheme.geometry(c)
        out += [Triple(iri, GEO + "hasGeometry", g),
                Triple(g, RDF_TYPE, GEO + "Geometry"),
                Triple(g, GEO + "asWKT", Literal(wkt, WKT_LITERAL))]
    m2 = c.exact_area() * EARTH_RADIUS_KM ** 2 * 1e6
    out += [Triple(iri, scheme.term("hasID"), Literal(str(c.raw))),
            Triple(iri, scheme.term("hasM2Area"), Literal(exact_decimal(m2), XSD_DECIMAL))]
    return out


def emit_relations(records: Iterable[Union[RelationRecord, tuple]],
                   scheme: IriScheme = IriScheme()) -> list[Triple]:
    out = []
    for r in records:
        if not isinstance(r, RelationRecord):
            try:
                r = RelationRecord(*r)
            except Exception as e:
                raise RdfError(str(e)) from None
        out.append(Triple(scheme.entity(r.subject), scheme.relation(r.relation),
                          scheme.entity(r.object)))
    return dedupe(out)


# --- closure ------------------------------------------------------------------------

def materialize_transitive(triples: Iterable[Triple], scheme: IriScheme = IriScheme(),
                           predicate: Predicate = Predicate.WITHIN,
                           include_feature_chains: bool = False) -> list[Triple]:
    """Add the transitive closure of sfWithin (and matching sfContains inverses).

    Input sfContains edges are read as reversed sfWithin edges.  Edges between
    two non-cell entities are left out of the closure unless
    include_feature_chains is set.  Raises RdfError on a containment cycle.
    """
    triples = dedupe(triples)
    inverse = Predicate.CONTAINS if predicate is Predicate.WITHIN else Predicate.WITHIN
    p_fwd, p_inv = scheme.relation(predicate), scheme.relation(inverse)
    up: dict[str, set[str]] = {}
    for t in triples:
        if t.p == p_fwd and not isinstance(t.o, Literal):
            a, b = t.s, t.o
        elif t.p == p_inv and not isinstance(t.o, Literal):
            a, b = t.o, t.s
        else:
            continue
        if not include_feature_chains and scheme.parse_cell(a) is None and scheme.parse_cell(b) is None:
            continue
        if a == b:
            raise RdfError(f"containment cycle at {a}")
        up.setdefault(a, set()).add(b)

    closure: dict[str, frozenset] = {}
    for root in sorted(up):
        if root in closure:
            continue
        # iterative post-order DFS with cycle detection
        stack = [(root, iter(sorted(up.get(root, ()))))]
        on_path = {root}
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                on_path.discard(node)
                acc = set()
                for b in up.get(node, ()):
                    acc.add(b)
                    acc |= closure.get(b, frozenset())
                closure[node] = frozenset(acc)
                continue
            if nxt in on_path:
                raise RdfError(f"containment cycle through {nxt}")
            if nxt not in closure:
                on_path.add(nxt)
                stack.append((nxt, iter(sorted(up.get(nxt, ())))))
    out = list(triples)
    for a in sorted(closure):
        for b in sorted(closure[a]):
            out.append(Triple(a, p_fwd, b))
            out.append(Triple(b, p_inv, a))
    return dedupe(out)


# --- observations -----------------------------------------------------------------------

def _time_literal(t: str) -> Literal:
    return Literal(t, XSD_GYEAR if len(t) == 4 else XSD_DATE)


def emit_observation(o: Observation, scheme: IriScheme = IriScheme(),
                     manifest: Optional[Mapping[str, PropertySpec]] = None) -> list[Triple]:
    spec = (manifest or {}).get(o.property)
    if spec is not None and spec.temporal and o.phenomenon_time is None:
        raise RdfError(f"property {o.property} requires a phenomenon time")
    node = scheme.observation(o)
    out = [Triple(node, RDF_TYPE, scheme.term(o.obs_type)),
           Triple(node, SOSA + "hasFeatureOfInterest", scheme.cell(o.feature_of_interest)),
           Triple(node, SOSA + "observedProperty", scheme.observed_property(o)),
           Triple(node, SOSA + "hasSimpleResult", Literal(exact_decimal(o.value), XSD_DECIMAL))]
    if o.phenomenon_time is not None:
        out.append(Triple(node, SOSA + "phenomenonTime", _time_literal(o.phenomenon_time)))
    return out


def parse_observations(triples: Iterable[Triple], manifest: Mapping[str, PropertySpec],
                       scheme: IriScheme = IriScheme()) -> list[Observation]:
    """Rebuild observations from emitted triples; unit and kind come from the manifest."""
    nodes: dict[str, dict[str, Term]] = {}
    for t in triples:
        if t.s.startswith(scheme.resource + "observation/"):
            nodes.setdefault(t.s, {})[t.p] = t.o
    out = []
    for node, props in sorted(nodes.items()):
        try:
            typ = props[RDF_TYPE]
            cell = scheme.parse_cell(props[SOSA + "hasFeatureOfInterest"])
            prop_iri = props[SOSA + "observedProperty"]
            result = props[SOSA + "hasSimpleResult"]
        except KeyError as e:
            raise RdfError(f"observation {node} lacks {e.args[0]}") from None
        if cell is None or not prop_iri.startswith(scheme.ontology) or not typ.startswith(scheme.ontology):
            raise RdfError(f"observation {node} is not in the expected namespaces")
        local = prop_iri[len(scheme.ontology):]
        prop, _, cat = local.partition(".")
        spec = manifest.get(prop)
        if spec is None:
            raise RdfError(f"property {prop} is not in the manifest")
        time = props.get(SOSA + "phenomenonTime")
        try:
            out.append(Observation(cell, prop, float(Decimal(result.lexical)), spec.unit, spec.kind,
                                   time.lexical if time is not None else None, cat or None,
                                   typ[len(scheme.ontology):]))
        except DiscretizationError as e:
            raise RdfError(f"observation {node}: {e}") from None
    return out


def emit_features_points(points: Iterable[tuple[str, CellId]], scheme: IriScheme = IriScheme()) -> list[Triple]:
    """Within/contains pairs linking point features to their cells."""
    out = []
    for fid, c in points:
        out.append(Triple(scheme.feature(fid), scheme.relation(Predicate.WITHIN), scheme.cell(c)))
        out.append(Triple(scheme.cell(c), scheme.relation(Predicate.CONTAINS), scheme.feature(fid)))
    return out
