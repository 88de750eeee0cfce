import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geogrid.cell import LatLng, cell_from_latlng, leaf_ids, parent_ids, token_parse
from geogrid.coverer import (CoveringError, CoveringParams, boundary_cells, covering,
                             homogeneous_covering, interior_cells, interior_covering,
                             iter_homogeneous, relate_walk)
from geogrid.samples import florida
from geogrid.sphere import (PointSet, Polyline, Relation, SphericalPolygon, cell_polygon,
                            densify_line, overlap_fraction, relate_cell)
from geogrid.wkt import to_region

from conftest import sample_inside, star_ring


def poly_of(ring, step=0.05):
    return SphericalPolygon.from_latlng([[ring]], step)


def covered_by(cells, pts):
    """Which points fall in some cell of a mixed-level covering."""
    leaves = leaf_ids(pts)
    hit = np.zeros(len(pts), dtype=bool)
    for level in {c.level for c in cells}:
        mine = np.array(sorted(c.raw for c in cells if c.level == level), dtype=np.uint64)
        hit |= np.isin(parent_ids(leaves, level), mine)
    return hit


def assert_normalized(cells):
    assert list(cells) == sorted(set(cells))
    for a in cells:
        for b in cells:
            assert a == b or not a.contains(b)


def test_params_validation():
    with pytest.raises(CoveringError):
        CoveringParams(5, 4)
    with pytest.raises(CoveringError):
        CoveringParams(3, 4, mode="homogeneous")
    with pytest.raises(CoveringError):
        CoveringParams(0, 31)
    with pytest.raises(CoveringError):
        CoveringParams(max_cells=0)
    with pytest.raises(CoveringError):
        CoveringParams(mode="fancy")


@pytest.mark.parametrize("token", ["88c", "89c3", "1", "7d", "b"])
def test_cell_covers_itself(token):
    c = token_parse(token)
    poly = cell_polygon(c)
    assert homogeneous_covering(poly, c.level).cells == (c,)
    assert interior_covering(poly, CoveringParams(0, c.level, None, "interior")).cells == (c,)
    assert covering(poly, CoveringParams(0, c.level)).cells == (c,)
    assert len(boundary_cells(poly, c.level)) == 0


def test_florida_ordinary_and_homogeneous():
    region = to_region(florida())
    ordinary = covering(region, CoveringParams(0, 4, 8))
    top = token_parse("88c")
    assert all(top.contains(c) for c in ordinary.cells)
    assert len(ordinary) <= 8
    level4 = homogeneous_covering(region, 4)
    assert level4.tokens() == ["889", "88b", "88d", "88f"]
    assert all(c.level == 4 for c in level4)


@pytest.mark.parametrize("seed", range(5))
def test_ordinary_covering_contains_samples(seed):
    rng = np.random.default_rng(seed)
    lat, lng = rng.uniform(-60, 60), rng.uniform(-170, 170)
    poly = poly_of(star_ring(rng, lat, lng, 2.0))
    cov = covering(poly, CoveringParams(0, 12, 20))
    assert len(cov) <= 20
    assert_normalized(cov.cells)
    pts = sample_inside(rng, poly, 1000, (lat - 2.5, lng - 5, lat + 2.5, lng + 5))
    assert len(pts) > 200
    assert covered_by(cov.cells, pts).all()


def test_ordinary_min_level_respected():
    poly = poly_of(star_ring(np.random.default_rng(7), 30, 30, 1.0))
    cov = covering(poly, CoveringParams(6, 10, 4))
    assert all(6 <= c.level <= 10 for c in cov)


def test_homogeneous_matches_brute_force():
    rng = np.random.default_rng(3)
    poly = poly_of(star_ring(rng, 45, 10, 0.4))
    got = set(homogeneous_covering(poly, 8).cells)
    coarse = homogeneous_covering(poly, 5).cells
    brute = {d for c in coarse for d in c.descendants(8) if relate_cell(poly, d) not in
             (Relation.DISJOINT, Relation.TOUCHES)}
    assert got == brute


def test_homogeneous_streams_in_order():
    poly = poly_of(star_ring(np.random.default_rng(4), 10, 10, 0.5))
    it = iter_homogeneous(poly, 9)
    first = next(it)
    rest = list(it)
    assert [first, *rest] == sorted([first, *rest])


def test_interior_within_region_and_subset_of_homogeneous():
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        poly = poly_of(star_ring(rng, rng.uniform(-50, 50), rng.uniform(-170, 170), 0.3), 0.1)
        interior = interior_cells(poly, 9)
        homo = set(homogeneous_covering(poly, 9).cells)
        for c in interior:
            assert relate_cell(poly, c) is Relation.CONTAINS_CELL
            for d in (c.descendants(9) if c.level < 9 else [c]):
                assert d in homo


def test_interior_cells_sampled_inside(rng):
    poly = poly_of(star_ring(rng, 20, 20, 1.0))
    cells = interior_cells(poly, 10).cells
    for c in cells[:50]:
        w = rng.dirichlet([1, 1, 1, 1], 20)
        pts = w @ c.vertices()
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        assert poly.contains_points(pts).all()


def test_interior_cap_and_min_level():
    poly = poly_of(star_ring(np.random.default_rng(9), 0, 0, 2.0))
    capped = interior_covering(poly, CoveringParams(0, 10, 10, "interior"))
    assert 0 < len(capped) <= 10
    floored = interior_covering(poly, CoveringParams(7, 9, None, "interior"))
    assert all(7 <= c.level <= 9 for c in floored)


def test_thin_sliver_has_empty_interior():
    sliver = poly_of([(10, 10), (10.00001, 10), (10.00001, 11), (10, 11), (10, 10)])
    assert len(interior_cells(sliver, 13)) == 0
    assert len(homogeneous_covering(sliver, 13)) > 0


def test_boundary_cells_partially_overlap():
    poly = poly_of([(36.0, -120.0), (36.1, -120.0), (36.1, -119.88), (36.0, -119.88), (36.0, -120.0)], 0.01)
    bnd = boundary_cells(poly, 13)
    assert len(homogeneous_covering(poly, 13)) >= 100
    for c in bnd:
        assert 0 < overlap_fraction(poly, c) < 1


def test_homogeneous_partition():
    rng = np.random.default_rng(11)
    poly = poly_of(star_ring(rng, -30, 140, 0.5))
    level = 10
    homo = set(homogeneous_covering(poly, level).cells)
    inner = set()
    for c in interior_cells(poly, level):
        inner |= set(c.descendants(level)) if c.level < level else {c}
    bnd = set(boundary_cells(poly, level).cells)
    assert inner.isdisjoint(bnd)
    assert inner | bnd == homo


def test_disjoint_boundary_window_is_empty():
    poly = poly_of(star_ring(np.random.default_rng(2), 0, 0, 0.2))
    assert len(boundary_cells(poly, 13)) > 0
    far = poly_of(star_ring(np.random.default_rng(2), 60, 60, 0.2))
    assert not set(boundary_cells(far, 13).cells) & set(boundary_cells(poly, 13).cells)


def test_point_and_line_coverings():
    p = cell_from_latlng(LatLng(1, 2), 13)
    pts = PointSet(np.array([p.center_point()]))
    assert homogeneous_covering(pts, 13).cells == (p,)
    line = Polyline((densify_line([(0.013, 0.021), (0.061, 0.117)]),))
    cells = homogeneous_covering(line, 13).cells
    assert len(cells) > 5
    rels = {c: r for c, r in relate_walk(line, 13)}
    assert all(rels[c] is Relation.CROSSES for c in cells)


def test_line_along_cell_edges_only_touches():
    # the equator near lng 0 runs along cell edges on face 0
    line = Polyline((densify_line([(0, 0), (0, 0.1)]),))
    rels = [r for _, r in relate_walk(line, 13)]
    assert rels and all(r is Relation.TOUCHES for r in rels)


@settings(max_examples=30)
@given(st.floats(-70, 70), st.floats(-170, 170), st.floats(0.05, 0.5), st.integers(5, 10))
def test_coverings_are_normalized(lat, lng, radius, level):
    poly = poly_of(star_ring(np.random.default_rng(int(abs(lat * 1000))), lat, lng, radius), 0.1)
    for cov in (covering(poly, CoveringParams(0, level, 12)), interior_cells(poly, level)):
        assert_normalized(cov.cells)
    assert all(c.level == level for c in homogeneous_covering(poly, level))
