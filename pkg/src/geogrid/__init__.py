"""Discrete global grid cells, coverings and knowledge-graph materialization."""

__version__ = "0.1.0"

from .cell import CellId, LatLng, average_area, cell_from_latlng, parse_cell  # noqa: E402,F401
