"""Semantic segmentation of airborne radar point clouds into collision-hazard classes."""

__version__ = "0.1.0"
