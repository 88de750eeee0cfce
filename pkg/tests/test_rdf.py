import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geogrid.cell import LatLng, cell_from_latlng, token_parse
from geogrid.discretize import (ARITHMETIC, MEREOTOPOLOGICAL, Observation, PropertySpec,
                                discretize_vector)
from geogrid.enrich import Feature, Predicate, RelationRecord, enrich_compressed, enrich_feature
from geogrid.rdf import (GEO, RDF_TYPE, SOSA, WKT_LITERAL, XSD_DATE, XSD_DECIMAL, XSD_GYEAR,
                         IriScheme, Literal, RdfError, Triple, dedupe, emit_cell,
                         emit_observation, emit_relations, materialize_transitive,
                         parse_line, parse_ntriples, parse_observations, write_ntriples)
from geogrid.samples import florida
from geogrid.wkt import AntimeridianError

from conftest import closure_containment

S = IriScheme()
NT_LINE = re.compile(r'^<[^<>"\s]+> <[^<>"\s]+> (<[^<>"\s]+>|"([^"\\\n\r]|\\.)*"(\^\^<[^<>"\s]+>)?) \.$')


def preds(triples, p):
    return [t for t in triples if t.p == p]


# --- terms and lines ---------------------------------------------------------------------

def test_cell_iri_pattern_and_parse():
    c = token_parse("7d")
    iri = S.cell(c)
    assert iri == "http://stko-kwg.geog.ucsb.edu/lod/resource/s2.level2.9007199254740992000"
    assert S.parse_cell(iri) == c
    assert S.parse_cell(S.feature("florida")) is None
    for bad in ("s2.level3.9007199254740992000", "s2.level2.12", "s2.levelx.1"):
        with pytest.raises(RdfError):
            S.parse_cell(S.resource + bad)


@given(st.integers(0, 30), st.floats(-89, 89), st.floats(-180, 180))
def test_cell_iris_are_injective(level, lat, lng):
    c = cell_from_latlng(LatLng(lat, lng), level)
    assert S.parse_cell(S.cell(c)) == c


def test_bad_namespaces_rejected():
    with pytest.raises(RdfError):
        IriScheme("not an iri")
    with pytest.raises(RdfError):
        S.feature("has space")


@given(st.text(min_size=0, max_size=40))
def test_literal_escaping_round_trips(text):
    t = Triple("http://ex.org/s", "http://ex.org/p", Literal(text))
    line = t.to_nt()
    assert "\n" not in line
    assert parse_line(line) == t


def test_line_parser_errors_carry_line_numbers():
    lines = ['<http://a/s> <http://a/p> "x" .\n', "# comment\n", "\n", '<http://a/s> "x" <http://a/o> .\n']
    with pytest.raises(RdfError, match="line 4"):
        list(parse_ntriples(lines))
    for bad in ['<rel> <http://a/p> <http://a/o> .', '<http://a/s> <http://a/p> <http://a/o>',
                '<http://a/s> <http://a/p> "\\q" .', '<http://a/s> _:b <http://a/o> .']:
        with pytest.raises(RdfError):
            parse_line(bad)


def test_unicode_escapes():
    t = parse_line('<http://a/s> <http://a/p> "caf\\u00E9 \\U0001F600"@fr .')
    assert t.o == Literal("café 😀", lang="fr")


# --- cells ---------------------------------------------------------------------------------

def test_level13_cell_triples():
    c = cell_from_latlng(LatLng(35, -100), 13)
    out = emit_cell(c)
    assert Triple(S.cell(c), RDF_TYPE, S.term("S2Cell_Level13")) in out
    (area,) = preds(out, S.term("hasM2Area"))
    assert area.o.datatype == XSD_DECIMAL
    assert float(area.o.lexical) == pytest.approx(1.27e6, rel=0.10)
    (wkt,) = preds(out, GEO + "asWKT")
    assert wkt.o.datatype == WKT_LITERAL and wkt.o.lexical.startswith("POLYGON((")
    for t in out:
        assert NT_LINE.match(t.to_nt())


def test_cell_7d_identifier_and_policies():
    c = token_parse("7d")
    (ident,) = preds(emit_cell(c, "none"), S.term("hasID"))
    assert ident.o.lexical == "9007199254740992000"
    assert len(emit_cell(c, "none")) == 3
    assert not preds(emit_cell(c, "none"), GEO + "hasGeometry")
    with pytest.raises(AntimeridianError):
        emit_cell(c, "reject")
    (wkt,) = preds(emit_cell(c, "split"), GEO + "asWKT")
    assert wkt.o.lexical.startswith("MULTIPOLYGON")
    (pt,) = preds(emit_cell(c, "point"), GEO + "asWKT")
    assert pt.o.lexical.startswith("POINT")
    with pytest.raises(RdfError):
        emit_cell(c, "bogus")


# --- relations and closure ---------------------------------------------------------------------

def test_relations_keep_inverses_and_dedupe():
    f = Feature.from_wkt("poly", "POLYGON((-100 35, -99.9 35, -99.9 35.1, -100 35.1, -100 35))")
    recs = enrich_feature(f)
    triples = emit_relations(recs + recs)
    assert len(triples) == len(set(triples)) == len(recs)
    within, contains = S.relation(Predicate.WITHIN), S.relation(Predicate.CONTAINS)
    cont = {(t.s, t.o) for t in preds(triples, contains)}
    assert {(t.o, t.s) for t in preds(triples, within)} == cont
    assert cont


def test_unmaterialized_relations_rejected():
    for rel in ("sfEquals", "sfDisjoint"):
        with pytest.raises(RdfError):
            emit_relations([("a", rel, "b")])


def chain(k):
    c = cell_from_latlng(LatLng(12, 34), 30)
    return [c.parent(30 - i) for i in range(k)]


def test_two_step_closure():
    c13, c12, c11 = (cell_from_latlng(LatLng(1, 2), lv) for lv in (13, 12, 11))
    base = emit_relations([RelationRecord(c13, Predicate.WITHIN, c12),
                           RelationRecord(c12, Predicate.WITHIN, c11)])
    out = materialize_transitive(base)
    assert Triple(S.cell(c13), S.relation(Predicate.WITHIN), S.cell(c11)) in out
    assert Triple(S.cell(c11), S.relation(Predicate.CONTAINS), S.cell(c13)) in out


@pytest.mark.parametrize("k", [2, 5, 12])
def test_chain_closure_size_and_idempotence(k):
    cells = chain(k)
    base = emit_relations([RelationRecord(a, Predicate.WITHIN, b) for a, b in zip(cells, cells[1:])])
    once = materialize_transitive(base)
    within = preds(once, S.relation(Predicate.WITHIN))
    assert len(within) == k * (k - 1) // 2
    assert len(preds(once, S.relation(Predicate.CONTAINS))) == len(within)
    assert set(materialize_transitive(once)) == set(once)


def test_closure_detects_cycles():
    a, b = token_parse("88c"), token_parse("889")
    with pytest.raises(RdfError, match="cycle"):
        materialize_transitive(emit_relations([RelationRecord(a, Predicate.WITHIN, b),
                                               RelationRecord(b, Predicate.WITHIN, a)]))
    with pytest.raises(RdfError):
        materialize_transitive(emit_relations([RelationRecord(a, Predicate.WITHIN, a)]))


def test_feature_chains_excluded_by_default():
    base = emit_relations([("a", "sfWithin", "b"), ("b", "sfWithin", "c")])
    assert len(materialize_transitive(base)) == 2
    full = materialize_transitive(base, include_feature_chains=True)
    assert Triple(S.feature("a"), S.relation(Predicate.WITHIN), S.feature("c")) in full


def test_florida_closure_reaches_reference_cells():
    f = Feature("florida", florida())
    compressed = enrich_compressed(f, 3, 7)
    got = closure_containment(compressed, "florida", 7)
    classic = {(s, p, o) for s, p, o in closure_containment(enrich_feature(f, 7), "florida", 7)}
    assert got == classic and len(got) > 10


# --- observations ---------------------------------------------------------------------------

MANIFEST = {
    "cropland": PropertySpec("cropland", ARITHMETIC, "percent", temporal=True),
    "soilArea": PropertySpec("soilArea", MEREOTOPOLOGICAL, "km2"),
}


def test_percent_observation_has_five_triples():
    c = cell_from_latlng(LatLng(40, -90), 13)
    o = Observation(c, "cropland", 37.5, "percent", ARITHMETIC, "2023", "corn", "CroplandS2OverlapObservation")
    out = emit_observation(o, manifest=MANIFEST)
    assert len(out) == 5
    by_pred = {t.p: t.o for t in out}
    assert by_pred[RDF_TYPE] == S.term("CroplandS2OverlapObservation")
    assert by_pred[SOSA + "hasFeatureOfInterest"] == S.cell(c)
    assert by_pred[SOSA + "hasSimpleResult"] == Literal("37.5", XSD_DECIMAL)
    assert by_pred[SOSA + "phenomenonTime"] == Literal("2023", XSD_GYEAR)
    assert parse_observations(out, MANIFEST) == [o]


def test_missing_time_rejected_when_required():
    c = cell_from_latlng(LatLng(40, -90), 13)
    o = Observation(c, "cropland", 37.5, "percent", ARITHMETIC)
    with pytest.raises(RdfError):
        emit_observation(o, manifest=MANIFEST)


def test_vector_observations_round_trip(rng):
    f = Feature.from_wkt("sq", "POLYGON((-100 35, -99.95 35, -99.95 35.05, -100 35.05, -100 35))")
    obs = discretize_vector(f, 13, property="soilArea", time="2021-06-30", manifest=MANIFEST)
    triples = [t for o in obs for t in emit_observation(o, manifest=MANIFEST)]
    assert {t.o.datatype for t in preds(triples, SOSA + "phenomenonTime")} == {XSD_DATE}
    lines = list(write_ntriples(triples))
    assert all(NT_LINE.match(line.rstrip("\n")) for line in lines)
    back = parse_observations(parse_ntriples(lines), MANIFEST)
    assert sorted(back, key=Observation.sort_key) == sorted(obs, key=Observation.sort_key)


def test_observation_parse_errors():
    c = cell_from_latlng(LatLng(40, -90), 13)
    o = Observation(c, "soilArea", 1.0, "km2", MEREOTOPOLOGICAL)
    out = emit_observation(o)
    with pytest.raises(RdfError, match="lacks"):
        parse_observations(out[:2], MANIFEST)
    with pytest.raises(RdfError, match="manifest"):
        parse_observations(out, {})


def test_dedupe_keeps_first_order():
    a = Triple("http://a/1", "http://a/p", "http://a/2")
    b = Triple("http://a/3", "http://a/p", "http://a/4")
    assert dedupe([a, b, a]) == [a, b]
