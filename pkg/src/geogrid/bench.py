"""Enriched-join versus geometric-scan timing on synthetic data."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from .cell import CellId, LatLng, leaf_ids, parent_ids
from .enrich import Feature, Predicate, enrich_feature
from .rdf import IriScheme, Triple, emit_relations
from .sphere import latlng_array, polygons_intersect
from .store import PathQuery, PathStep, TripleStore, eval_path_ids
from .wkt import WktGeometry

RUNS = 5


@dataclass(frozen=True)
class BenchSpec:
    points: int = 50_000
    regions: int = 100
    level: int = 13
    seed: int = 0
    lat_range: tuple[float, float] = (34.0, 38.0)
    lng_range: tuple[float, float] = (-122.0, -116.0)
    radius_range: tuple[float, float] = (0.05, 0.15)
    exclude_boundary: bool = False


@dataclass
class Dataset:
    spec: BenchSpec
    lat: np.ndarray
    lng: np.ndarray
    regions: list[Feature]


def _region_ring(rng: np.random.Generator, spec: BenchSpec) -> list[LatLng]:
    lat0 = rng.uniform(*spec.lat_range)
    lng0 = rng.uniform(*spec.lng_range)
    r = rng.uniform(*spec.radius_range)
    k = int(rng.integers(6, 12))
    ang = (np.arange(k) + rng.uniform(-0.3, 0.3, k)) * (2 * math.pi / k)
    rad = r * rng.uniform(0.6, 1.0, k)
    scale = 1 / math.cos(math.radians(lat0))
    ring = [LatLng(float(lat0 + a * math.sin(t)), float(lng0 + a * scale * math.cos(t)))
            for t, a in zip(ang, rad)]
    return ring + [ring[0]]


def make_dataset(spec: BenchSpec) -> Dataset:
    """Uniform points and random star-shaped regions in a lon/lat box."""
    rng = np.random.default_rng(spec.seed)
    regions = []
    for i in range(spec.regions):
        ring = _region_ring(rng, spec)
        regions.append(Feature(f"region{i}", WktGeometry("POLYGON", [ring])))
    lat = rng.uniform(*spec.lat_range, spec.points)
    lng = rng.uniform(*spec.lng_range, spec.points)
    ds = Dataset(spec, lat, lng, regions)
    if spec.exclude_boundary:
        bad = set()
        for f in regions:
            bad |= _boundary_cells(f, spec.level)
        cells = parent_ids(leaf_ids(latlng_array(lat, lng)), spec.level)
        keep = ~np.isin(cells, np.array(sorted(bad), dtype=np.uint64))
        ds = Dataset(spec, lat[keep], lng[keep], regions)
    return ds


def _boundary_cells(f: Feature, level: int) -> set[int]:
    return {r.object.raw for r in enrich_feature(f, level)
            if r.subject == f.id and r.relation in (Predicate.OVERLAPS, Predicate.TOUCHES)}


def _median_ms(fn: Callable[[], object], runs: int = RUNS) -> tuple[float, object]:
    times = []
    out = None
    for _ in range(runs):
        t = time.perf_counter()
        out = fn()
        times.append((time.perf_counter() - t) * 1000)
    return statistics.median(times), out


def build_store(ds: Dataset, scheme: IriScheme = IriScheme()) -> tuple[TripleStore, dict]:
    """Materialize region-cell relations and point-cell links."""
    triples: list[Triple] = []
    boundary: dict[str, set[int]] = {}
    for f in ds.regions:
        recs = enrich_feature(f, ds.spec.level)
        triples += emit_relations(recs, scheme)
        boundary[f.id] = {r.object.raw for r in recs if r.subject == f.id
                          and r.relation in (Predicate.OVERLAPS, Predicate.TOUCHES)}
    cells = parent_ids(leaf_ids(latlng_array(ds.lat, ds.lng)), ds.spec.level)
    within, contains = scheme.relation(Predicate.WITHIN), scheme.relation(Predicate.CONTAINS)
    for i, raw in enumerate(cells.tolist()):
        p = scheme.feature(f"point{i}")
        c = scheme.cell(CellId(raw))
        triples.append(Triple(p, within, c))
        triples.append(Triple(c, contains, p))
    return TripleStore(triples), {"boundary": boundary, "point_cells": cells}


def _pairs_by_name(store: TripleStore, a: np.ndarray, b: np.ndarray, prefix_a: str, prefix_b: str):
    t = store.terms
    out = set()
    for x, y in zip(a.tolist(), b.tolist()):
        sx, sy = t[x], t[y]
        if isinstance(sx, str) and isinstance(sy, str):
            la, lb = sx.rsplit("/", 1)[-1], sy.rsplit("/", 1)[-1]
            if la.startswith(prefix_a) and lb.startswith(prefix_b):
                out.add((la, lb))
    return out


def q1_enriched(store: TripleStore, scheme: IriScheme = IriScheme()):
    c = scheme.relation(Predicate.CONTAINS)
    return eval_path_ids(store, PathQuery((PathStep(c), PathStep(c))))


def q1_geometric(ds: Dataset):
    pts = latlng_array(ds.lat, ds.lng)
    hits = []
    for f in ds.regions:
        mask = f.region.contains_points(pts)
        hits.append(np.flatnonzero(mask))
    return hits


def q3_enriched(store: TripleStore, regions: np.ndarray, scheme: IriScheme = IriScheme()):
    """Region pairs sharing a cell; `regions` are the region term ids."""
    rel = scheme.relation
    outs = []
    for first in (Predicate.CONTAINS, Predicate.OVERLAPS):
        for second in (Predicate.WITHIN, Predicate.OVERLAPS):
            q = PathQuery((PathStep(rel(first)), PathStep(rel(second))))
            outs.append(eval_path_ids(store, q, regions))
    return outs


def q3_geometric(ds: Dataset):
    regs = [f.region for f in ds.regions]
    out = []
    for i in range(len(regs)):
        for j in range(i + 1, len(regs)):
            if polygons_intersect(regs[i], regs[j]):
                out.append((i, j))
    return out


def bench_compare(spec: BenchSpec = BenchSpec(), runs: int = RUNS) -> dict:
    """Run Q1 (points in regions) and Q3 (regions overlapping regions) both ways."""
    ds = make_dataset(spec)
    t0 = time.perf_counter()
    store, aux = build_store(ds)
    build_ms = (time.perf_counter() - t0) * 1000

    e_ms, e_raw = _median_ms(lambda: q1_enriched(store), runs)
    g_ms, g_raw = _median_ms(lambda: q1_geometric(ds), runs)
    enriched = _pairs_by_name(store, *e_raw, "region", "point")
    geometric = {(ds.regions[k].id, f"point{i}") for k, idx in enumerate(g_raw) for i in idx.tolist()}
    diff = sorted(enriched ^ geometric)
    cells = aux["point_cells"]
    q1_items = [{"region": r, "point": p, "side": "enriched" if (r, p) in enriched else "geometric",
                 "boundary_adjacent": int(cells[int(p[5:])]) in aux["boundary"][r]} for r, p in diff]

    region_ids = np.array([store.id_of(IriScheme().feature(f.id)) for f in ds.regions], np.int64)
    e3_ms, e3_raw = _median_ms(lambda: q3_enriched(store, region_ids), runs)
    g3_ms, g3_raw = _median_ms(lambda: q3_geometric(ds), runs)
    e3 = set()
    for a, b in e3_raw:
        for x, y in _pairs_by_name(store, a, b, "region", "region"):
            if x != y:
                e3.add(tuple(sorted((x, y))))
    g3 = {tuple(sorted((ds.regions[i].id, ds.regions[j].id))) for i, j in g3_raw}
    q3_items = []
    for pair in sorted(e3 ^ g3):
        shared = aux["boundary"][pair[0]] & aux["boundary"][pair[1]]
        q3_items.append({"regions": list(pair), "side": "enriched" if pair in e3 else "geometric",
                         "boundary_adjacent": bool(shared)})

    return {
        "config": asdict(spec),
        "runs": runs,
        "store_triples": len(store),
        "build_ms": round(build_ms, 3),
        "q1": {"enriched_ms": e_ms, "geometric_ms": g_ms,
               "speedup": g_ms / e_ms if e_ms else math.inf,
               "enriched_results": len(enriched), "geometric_results": len(geometric),
               "mismatches": q1_items},
        "q3": {"enriched_ms": e3_ms, "geometric_ms": g3_ms,
               "speedup": g3_ms / e3_ms if e3_ms else math.inf,
               "enriched_results": len(e3), "geometric_results": len(g3),
               "mismatches": q3_items},
    }
