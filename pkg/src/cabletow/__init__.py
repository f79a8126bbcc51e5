"""Tensioning-implicit trajectory optimization for cable-towed planar boxes."""

__version__ = "0.1.0"
