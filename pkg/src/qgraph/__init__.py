"""Round-accounted query oracles, connectivity algorithms and adversaries."""

__version__ = "0.1.0"
