import numpy as np
import pytest

from geogrid.cell import LatLng, cell_from_latlng, token_parse
from geogrid.coverer import boundary_cells, interior_cells, relate_walk
from geogrid.enrich import (INFERRED, PRECOMPUTED, EnrichmentError, Feature, Predicate,
                            RelationRecord, cell_hierarchy_records, enrich_compressed,
                            enrich_feature, records_for, reference_containment)
from geogrid.samples import florida
from geogrid.sphere import Relation, cell_polygon, relate_cell
from geogrid.wkt import cell_to_wkt, parse_wkt

from conftest import closure_containment, star_ring


def ring_wkt(ring):
    return "POLYGON((" + ", ".join(f"{lng} {lat}" for lat, lng in ring) + "))"


def by_relation(records):
    out = {}
    for r in records:
        out.setdefault(r.relation, set()).add((r.subject, r.object))
    return out


def assert_inverse_and_symmetric(records):
    keys = {(r.subject, r.relation, r.object) for r in records}
    for s, p, o in keys:
        if p is Predicate.CONTAINS:
            assert (o, Predicate.WITHIN, s) in keys
        elif p is Predicate.WITHIN:
            assert (o, Predicate.CONTAINS, s) in keys
        elif p in (Predicate.TOUCHES, Predicate.OVERLAPS):
            assert (o, p, s) in keys


def test_feature_ids_must_be_iri_safe():
    with pytest.raises(EnrichmentError):
        Feature.from_wkt("has space", "POINT(0 0)")
    assert Feature.from_wkt("a.b-c_1", "POINT(0 0)").kind == "P"


def test_relation_record_validation():
    with pytest.raises(EnrichmentError):
        RelationRecord("a", "sfEquals", "b")
    with pytest.raises(EnrichmentError):
        RelationRecord("a", "sfWithin", "b", "guessed")
    r = RelationRecord("a", "sfWithin", token_parse("88c"))
    assert r.relation is Predicate.WITHIN and r.provenance == PRECOMPUTED
    assert r.swapped(Predicate.CONTAINS).provenance == INFERRED


def test_point_feature_gets_two_records():
    f = Feature.from_wkt("p", "POINT(-119.7 34.42)")
    recs = enrich_feature(f)
    cell = cell_from_latlng(LatLng(34.42, -119.7), 13)
    assert {(r.subject, r.relation, r.object) for r in recs} == {
        ("p", Predicate.WITHIN, cell), (cell, Predicate.CONTAINS, "p")}


def test_feature_equal_to_cell_emits_both_directions():
    c = cell_from_latlng(LatLng(35, -100), 13)
    region = cell_polygon(c)
    recs = [r for cell, rel in relate_walk(region, 13) for r in records_for("sq", region, cell, rel)]
    mine = {(r.subject, r.relation, r.object) for r in recs if c in (r.subject, r.object)}
    assert mine == {("sq", Predicate.CONTAINS, c), (c, Predicate.WITHIN, "sq"),
                    ("sq", Predicate.WITHIN, c), (c, Predicate.CONTAINS, "sq")}
    others = {r.relation for r in recs if c not in (r.subject, r.object)}
    assert others == {Predicate.TOUCHES}


def test_serialized_cell_is_close_to_its_cell():
    # six-decimal, lat/lng-linear edges make the round trip only approximately the cell
    c = cell_from_latlng(LatLng(35, -100), 13)
    recs = enrich_feature(Feature.from_wkt("sq", cell_to_wkt(c), max_step=0.001))
    assert all(r.relation is not Predicate.INTERSECTS for r in recs)
    assert {r.relation for r in recs if c in (r.subject, r.object)} & {
        Predicate.CONTAINS, Predicate.OVERLAPS}


def test_square_matches_per_cell_brute_force():
    f = Feature.from_wkt("sq", "POLYGON((-100 35, -99.9 35, -99.9 35.1, -100 35.1, -100 35))")
    got = {(r.subject, r.relation, r.object) for r in enrich_feature(f)}
    region = f.region
    want = set()
    for coarse, _ in relate_walk(region, 9):
        for c in coarse.descendants(13):
            for r in records_for("sq", region, c, relate_cell(region, c)):
                want.add((r.subject, r.relation, r.object))
    assert got == want
    assert len({o for s, p, o in got if p is Predicate.CONTAINS}) >= 50


def test_line_feature_crosses_and_touches():
    f = Feature.from_wkt("l", "LINESTRING(0.021 0.013, 0.117 0.061)")
    recs = enrich_feature(f)
    rels = {r.relation for r in recs}
    assert Predicate.CROSSES in rels
    assert not rels & {Predicate.CONTAINS, Predicate.WITHIN, Predicate.OVERLAPS}
    edge = Feature.from_wkt("e", "LINESTRING(0 0, 0.1 0)")
    assert {r.relation for r in enrich_feature(edge)} == {Predicate.TOUCHES}


def test_polygon_records_are_paired_and_nondisjoint(rng):
    f = Feature.from_wkt("poly", ring_wkt(star_ring(rng, 40, -105, 0.15)))
    recs = enrich_feature(f)
    assert_inverse_and_symmetric(recs)
    cells = sorted({r.object for r in recs if r.subject == "poly"})
    sample = rng.choice(len(cells), max(1, len(cells) // 100), replace=False)
    for i in sample:
        assert relate_cell(f.region, cells[i]) is not Relation.DISJOINT
    grouped = by_relation(recs)
    assert grouped[Predicate.OVERLAPS] and grouped[Predicate.CONTAINS]


def test_corner_contact_is_not_a_touch():
    c = cell_from_latlng(LatLng(35, -100), 13)
    recs = cell_hierarchy_records(12, 13, [c.parent(12)])
    diag = {(r.subject, r.object) for r in recs if r.relation is Predicate.TOUCHES}
    for a, b in diag:
        assert b in a.edge_neighbors()


def test_florida_compressed():
    f = Feature("florida", florida())
    recs = enrich_compressed(f, 3, 8)
    within = {r.object for r in recs if r.subject == "florida" and r.relation is Predicate.WITHIN}
    assert token_parse("88c") in within
    overlaps4 = {r.object.token for r in recs if r.subject == "florida"
                 and r.relation is Predicate.OVERLAPS and r.object.level == 4}
    assert overlaps4 == {"889", "88b", "88d", "88f"}
    assert_inverse_and_symmetric(recs)


def test_compressed_closure_equals_classic():
    rng = np.random.default_rng(21)
    f = Feature("blob", parse_wkt(ring_wkt(star_ring(rng, 36, -119, 0.5))))
    classic = reference_containment(enrich_feature(f, 11), "blob", 11)
    compressed = enrich_compressed(f, 3, 11)
    assert len(classic) >= 2 * 100
    assert closure_containment(compressed, "blob", 11) == classic


def test_boundary_level_limits_overlaps():
    rng = np.random.default_rng(5)
    f = Feature("blob", parse_wkt(ring_wkt(star_ring(rng, 36, -119, 0.25))))
    recs = enrich_compressed(f, 3, 11, boundary_level=8)
    assert max(r.object.level for r in recs if r.relation is Predicate.OVERLAPS
               and r.subject == "blob") == 8
    assert closure_containment(recs, "blob", 11) == reference_containment(enrich_feature(f, 11), "blob", 11)


def test_compressed_needs_area_and_valid_levels():
    with pytest.raises(EnrichmentError):
        enrich_compressed(Feature.from_wkt("p", "POINT(0 0)"))
    f = Feature.from_wkt("sq", "POLYGON((0 0, 1 0, 1 1, 0 1, 0 0))")
    with pytest.raises(EnrichmentError):
        enrich_compressed(f, 8, 8)
    with pytest.raises(EnrichmentError):
        enrich_compressed(f, 3, 8, boundary_level=9)


def test_compressed_is_ten_times_smaller_on_large_square():
    f = Feature.from_wkt("sq", "POLYGON((-100 35, -95 35, -95 40, -100 40, -100 35))")
    compressed = enrich_compressed(f, 3, 13)
    region = f.region
    inside = sum(4 ** (13 - c.level) for c in interior_cells(region, 13))
    edge = len(boundary_cells(region, 13))
    classic_count = 2 * (inside + edge)
    assert classic_count >= 10 * len(compressed)


def test_hierarchy_one_parent():
    p = token_parse("88c")
    recs = cell_hierarchy_records(3, 4, [p], neighbors=False)
    grouped = by_relation(recs)
    assert grouped[Predicate.CONTAINS] == {(p, c) for c in p.children()}
    assert grouped[Predicate.WITHIN] == {(c, p) for c in p.children()}
    assert len(recs) == 8


def test_hierarchy_touches_symmetric_and_single_step():
    cells = list(token_parse("88c").children())
    recs = cell_hierarchy_records(4, 5, cells)
    assert_inverse_and_symmetric(recs)
    for r in recs:
        if r.relation in (Predicate.CONTAINS, Predicate.WITHIN):
            assert abs(r.subject.level - r.object.level) == 1
        else:
            assert r.subject.level == r.object.level
    with pytest.raises(EnrichmentError):
        cell_hierarchy_records(3, 5, cells)


def test_records_are_deterministic():
    f = Feature("florida", florida())
    assert enrich_compressed(f, 3, 7) == enrich_compressed(f, 3, 7)
