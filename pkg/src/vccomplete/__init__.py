"""Viewer-centred point cloud completion for partially observed cars."""

__version__ = "0.1.0"
