import itertools

import numpy as np
import pytest

from geogrid.bench import BenchSpec, bench_compare
from geogrid.cell import LatLng, cell_from_latlng
from geogrid.enrich import Predicate, RelationRecord
from geogrid.rdf import (RDF_TYPE, SOSA, XSD_DECIMAL, IriScheme, Literal, RdfError, Triple,
                         emit_cell, emit_relations, write_ntriples)
from geogrid.store import (PREFIXES, Filter, PathQuery, PathStep, TripleStore, eval_path,
                           eval_path_ids, expand, naive_eval_path, parse_patterns, select)

S = IriScheme()
WITHIN, CONTAINS = S.relation(Predicate.WITHIN), S.relation(Predicate.CONTAINS)


def random_store(rng, n_triples, n_nodes=300, n_preds=4):
    nodes = [f"http://ex.org/n{i}" for i in range(n_nodes)]
    preds = [f"http://ex.org/p{i}" for i in range(n_preds)]
    triples = [Triple(nodes[rng.integers(n_nodes)], preds[rng.integers(n_preds)], nodes[rng.integers(n_nodes)])
               for _ in range(n_triples)]
    return triples, nodes, preds


def nested_loop(triples, q):
    """Brute force: every combination of triples chained along the path."""
    triples = sorted(set(triples))
    nodes = {x for t in triples for x in (t.s, t.o)} | {t.p for t in triples}
    paths = {(n, n) for n in nodes} if q.start is None else ({(q.start, q.start)} if q.start in nodes else set())
    for step in q.steps:
        nxt = {(a, t.o) for a, b in paths for t in triples if t.p == step.predicate and t.s == b}
        if step.star:
            nxt |= paths
        paths = nxt
    return {(a, b) for a, b in paths if q.end is None or b == q.end}


# --- loading ------------------------------------------------------------------------------

def test_empty_store():
    store = TripleStore.load([])
    assert len(store) == 0
    assert eval_path(store, PathQuery((PathStep("http://ex.org/p"),))) == set()


def test_cell_triples_are_conserved():
    rng = np.random.default_rng(0)
    cells = {cell_from_latlng(LatLng(rng.uniform(-60, 60), rng.uniform(-170, 170)), 13) for _ in range(100)}
    triples = [t for c in cells for t in emit_cell(c)]
    store = TripleStore.load(write_ntriples(triples))
    assert len(store) == len(triples)


def test_duplicate_lines_collapse():
    line = "<http://a/s> <http://a/p> <http://a/o> .\n"
    assert len(TripleStore.load([line, line, "\n", "# c\n", line])) == 1


def test_load_reports_line_numbers():
    with pytest.raises(RdfError, match="line 2"):
        TripleStore.load(["<http://a/s> <http://a/p> <http://a/o> .\n", "garbage\n"])


def test_indexes_agree(rng):
    triples, _, _ = random_store(rng, 2000)
    store = TripleStore(triples)
    want = sorted(set(triples))
    assert sorted(store.triples()) == want
    for t in want[:200]:
        s, p, o = (store.id_of(x) for x in t)
        assert len(store.match_ids(s=s, p=p, o=o)) == 1
        assert t in store.match(s=t.s) and t in store.match(p=t.p, o=t.o) and t in store.match(o=t.o, s=t.s)
    for name in ("spo", "pos", "osp"):
        assert len(store.index(name)) == len(want)
    assert len(set(store.terms)) == len(store.terms)
    assert all(store.id_of(term) == i for i, term in enumerate(store.terms))


# --- paths ----------------------------------------------------------------------------------

def test_single_step_is_predicate_lookup(rng):
    triples, _, preds = random_store(rng, 500)
    store = TripleStore(triples)
    got = eval_path(store, PathQuery((PathStep(preds[0]),)))
    assert got == {(t.s, t.o) for t in triples if t.p == preds[0]}


def test_zero_fan_out_is_empty():
    t = [Triple("http://a/x", "http://a/p", "http://a/y")]
    q = PathQuery((PathStep("http://a/p"), PathStep("http://a/p")))
    assert eval_path(TripleStore(t), q) == set()
    assert eval_path(TripleStore(t), PathQuery((PathStep("http://a/missing"),))) == set()


def test_star_step_means_zero_or_one_hop_over_closure():
    cells = [cell_from_latlng(LatLng(1, 1), lv) for lv in (13, 12, 11)]
    triples = emit_relations([RelationRecord(a, Predicate.WITHIN, b) for a, b in itertools.pairwise(cells)])
    store = TripleStore(triples)
    c13 = S.cell(cell_from_latlng(LatLng(1, 1), 13))
    got = eval_path(store, PathQuery((PathStep(WITHIN, star=True),), start=c13))
    assert got == {(c13, c13), (c13, S.cell(cell_from_latlng(LatLng(1, 1), 12)))}


@pytest.mark.parametrize("seed", range(8))
def test_paths_match_nested_loop(seed):
    rng = np.random.default_rng(seed)
    triples, nodes, preds = random_store(rng, 300, n_nodes=60, n_preds=3)
    store = TripleStore(triples)
    for _ in range(10):
        k = int(rng.integers(1, 4))
        steps = tuple(PathStep(preds[rng.integers(3)], bool(rng.random() < 0.3)) for _ in range(k))
        start = nodes[rng.integers(60)] if rng.random() < 0.4 else None
        end = nodes[rng.integers(60)] if rng.random() < 0.3 else None
        q = PathQuery(steps, start, end)
        want = nested_loop(triples, q)
        assert eval_path(store, q) == want
        assert naive_eval_path(triples, q) == want


def test_path_parsing_and_prefixes():
    q = PathQuery.parse("sosa:hasFeatureOfInterest/kwg-ont:sfContains*")
    assert q.steps == (PathStep(SOSA + "hasFeatureOfInterest"), PathStep(CONTAINS, True))
    assert expand("a") == RDF_TYPE
    assert expand("<http://x/y>") == "http://x/y"
    assert expand("http://x/y") == "http://x/y"
    with pytest.raises(ValueError):
        PathQuery.parse("a//b")
    with pytest.raises(ValueError):
        PathQuery(())
    assert set(PREFIXES) >= {"rdf", "xsd", "geo", "sosa", "kwg-ont", "kwgr"}


# --- graph patterns -------------------------------------------------------------------------

def conflation_graph(rng):
    """Fire, climate and vulnerability observations; returns triples and the
    level-13 cells seeded to satisfy every pattern."""
    ont = S.ontology
    triples = []
    coarse = [cell_from_latlng(LatLng(rng.uniform(33, 35), rng.uniform(-120, -117)), 9) for _ in range(12)]
    targets = set()
    k = 0
    for ci, big in enumerate(coarse):
        kids = list(big.descendants(13))[:: 37][:8]
        hot = ci % 3 == 0
        vulnerable = ci % 2 == 0
        triples += [t for c in kids for t in emit_relations([RelationRecord(big, Predicate.CONTAINS, c),
                                                             RelationRecord(c, Predicate.WITHIN, big)])]
        clim = f"{S.resource}observation/climate{ci}"
        triples += [Triple(clim, RDF_TYPE, ont + "ClimateObservation"),
                    Triple(clim, SOSA + "hasFeatureOfInterest", S.cell(big)),
                    Triple(clim, SOSA + "hasSimpleResult", Literal("35.5" if hot else "20.0", XSD_DECIMAL))]
        svi = f"{S.resource}observation/svi{ci}"
        triples += [Triple(svi, RDF_TYPE, ont + "SVIObservation"),
                    Triple(svi, SOSA + "hasFeatureOfInterest", S.cell(big)),
                    Triple(svi, SOSA + "hasSimpleResult", Literal("0.9" if vulnerable else "0.1", XSD_DECIMAL))]
        for c in kids:
            if rng.random() < 0.5:
                fire = f"{S.resource}observation/fire{k}"
                k += 1
                triples += [Triple(fire, RDF_TYPE, ont + "FireObservation"),
                            Triple(fire, SOSA + "hasFeatureOfInterest", S.cell(c))]
                if hot and vulnerable:
                    targets.add(S.cell(c))
    return triples, targets


def test_conflation_query_returns_seeded_cells(rng):
    triples, targets = conflation_graph(rng)
    store = TripleStore(triples)
    pats = parse_patterns(
        "?fire a kwg-ont:FireObservation . ?fire sosa:hasFeatureOfInterest ?cell . "
        "?clim a kwg-ont:ClimateObservation . ?clim sosa:hasFeatureOfInterest/kwg-ont:sfContains ?cell . "
        "?clim sosa:hasSimpleResult ?temp . "
        "?svi a kwg-ont:SVIObservation . ?svi sosa:hasFeatureOfInterest/kwg-ont:sfContains ?cell . "
        "?svi sosa:hasSimpleResult ?v")
    rows = select(store, pats, [Filter("?temp", ">", 30), Filter("?v", ">=", 0.5)])
    assert targets and {r["?cell"] for r in rows} == targets


def test_select_with_unbound_predicate():
    t = [Triple("http://a/x", "http://a/p", "http://a/y"), Triple("http://a/x", "http://a/q", "http://a/z")]
    rows = select(TripleStore(t), [("http://a/x", "?p", "?o")])
    assert {(r["?p"], r["?o"]) for r in rows} == {("http://a/p", "http://a/y"), ("http://a/q", "http://a/z")}
    with pytest.raises(ValueError):
        Filter("?x", "~", 1)


# --- benchmark ---------------------------------------------------------------------------------

def test_bench_parity_away_from_boundaries():
    spec = BenchSpec(points=3000, regions=10, level=13, seed=1, exclude_boundary=True)
    report = bench_compare(spec, runs=1)
    assert report["q1"]["mismatches"] == []
    assert report["q1"]["enriched_results"] == report["q1"]["geometric_results"] > 0


def test_bench_region_overlaps_match_geometry():
    spec = BenchSpec(points=500, regions=30, level=12, seed=2, lat_range=(35.0, 35.8),
                     lng_range=(-120.0, -119.0))
    report = bench_compare(spec, runs=1)
    assert report["q3"]["geometric_results"] > 0
    assert all(m["boundary_adjacent"] for m in report["q3"]["mismatches"])
    assert all(m["boundary_adjacent"] for m in report["q1"]["mismatches"])


def test_start_set_restricts_bindings(rng):
    triples, nodes, preds = random_store(rng, 400, n_nodes=50, n_preds=2)
    store = TripleStore(triples)
    q = PathQuery((PathStep(preds[0]), PathStep(preds[1], star=True)))
    chosen = nodes[:10]
    ids = np.array([i for i in (store.id_of(n) for n in chosen) if i is not None])
    a, b = eval_path_ids(store, q, ids)
    t = store.terms
    got = {(t[x], t[y]) for x, y in zip(a.tolist(), b.tolist())}
    assert got == {(s, o) for s, o in nested_loop(triples, q) if s in chosen}
    outsider = next(n for n in nodes[10:] if store.id_of(n) is not None)
    assert eval_path_ids(store, PathQuery(q.steps, start=outsider), ids)[0].size == 0
