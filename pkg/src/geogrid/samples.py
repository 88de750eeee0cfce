"""Reference outlines used by examples and tests.

Coordinates are (lng, lat) pairs, as in WKT.
"""

from __future__ import annotations

from .wkt import WktGeometry, parse_wkt

# coarse Florida outline: Atlantic coast vertices, Key West, then a straight
# Gulf-side edge back to the panhandle
FLORIDA_COARSE = [
    (-87.6, 31.0), (-85.0, 31.0), (-84.9, 30.7), (-82.2, 30.6), (-81.45, 30.7),
    (-81.3, 29.9), (-80.6, 28.5), (-80.0, 26.7), (-80.1, 25.8), (-80.4, 25.2),
    (-81.1, 25.1), (-81.8, 24.55), (-87.5, 30.3),
]

# finer Florida coastline (does not reach the Gulf far enough south-west to meet
# the level-4 cell south of the panhandle)
FLORIDA_DETAILED = [
    (-87.6, 31.0), (-85.0, 31.0), (-84.9, 30.7), (-82.2, 30.6), (-81.45, 30.7),
    (-81.3, 29.9), (-80.6, 28.5), (-80.0, 26.7), (-80.1, 25.8), (-80.4, 25.2),
    (-81.1, 25.1), (-81.8, 26.1), (-82.7, 27.7), (-82.8, 29.0), (-83.7, 29.9),
    (-84.4, 29.9), (-85.4, 29.7), (-86.5, 30.4), (-87.5, 30.3),
]

# simplified conterminous United States
CONUS = [
    (-124.7, 48.4), (-123.0, 49.0), (-95.15, 49.0), (-95.15, 49.38), (-94.8, 49.3),
    (-89.6, 48.0), (-84.8, 46.5), (-82.4, 45.3), (-82.5, 43.0), (-83.1, 42.0),
    (-78.9, 42.9), (-79.2, 43.3), (-76.5, 43.6), (-74.9, 45.0), (-71.5, 45.0),
    (-70.8, 45.4), (-70.0, 46.7), (-69.2, 47.45), (-68.2, 47.35), (-67.8, 47.1),
    (-67.8, 45.7), (-67.0, 44.9), (-68.8, 44.3), (-70.2, 43.6), (-70.7, 42.7),
    (-70.0, 41.8), (-71.4, 41.4), (-73.6, 40.9), (-74.0, 40.5), (-74.1, 39.7),
    (-75.0, 38.9), (-75.2, 38.0), (-76.0, 36.9), (-75.5, 35.2), (-76.5, 34.6),
    (-78.0, 33.8), (-79.3, 33.0), (-80.9, 32.0), (-81.4, 30.7), (-80.6, 28.5),
    (-80.0, 26.7), (-80.4, 25.2), (-81.1, 25.1), (-81.8, 26.1), (-82.7, 27.7),
    (-82.8, 29.0), (-83.7, 29.9), (-84.4, 29.9), (-85.4, 29.7), (-86.5, 30.4),
    (-88.0, 30.6), (-89.6, 30.2), (-89.4, 29.0), (-91.3, 29.3), (-93.8, 29.7),
    (-94.8, 29.3), (-96.5, 28.2), (-97.4, 27.3), (-97.2, 25.95), (-99.1, 26.4),
    (-100.3, 28.0), (-101.4, 29.8), (-102.7, 29.7), (-103.3, 29.0), (-104.5, 29.6),
    (-106.5, 31.75), (-108.2, 31.8), (-108.2, 31.33), (-111.1, 31.33), (-114.8, 32.5),
    (-117.1, 32.5), (-118.5, 34.0), (-120.6, 34.6), (-121.9, 36.6), (-122.5, 37.8),
    (-123.7, 39.0), (-124.2, 40.4), (-124.2, 42.0), (-124.5, 43.0), (-124.0, 46.2),
]


# common bounding extent of the conterminous United States
CONUS_EXTENT = (-124.848974, 24.396308, -66.885444, 49.384358)


def ring_wkt(points) -> str:
    ring = list(points) + [points[0]]
    return "POLYGON((" + ", ".join(f"{x} {y}" for x, y in ring) + "))"


def florida() -> WktGeometry:
    return parse_wkt(ring_wkt(FLORIDA_COARSE))


def florida_detailed() -> WktGeometry:
    return parse_wkt(ring_wkt(FLORIDA_DETAILED))


def conus() -> WktGeometry:
    return parse_wkt(ring_wkt(CONUS))


def conus_extent() -> WktGeometry:
    w, s, e, n = CONUS_EXTENT
    return parse_wkt(ring_wkt([(w, s), (e, s), (e, n), (w, n)]))
