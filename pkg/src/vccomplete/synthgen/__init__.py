"""Synthetic scenes: car meshes, raycasting, complete-surface sampling."""

from .mesh import TriangleMesh, car_mesh, read_mesh, write_mesh
from .raycast import intersect_mesh, raycast
from .sampling import complete_surface, farthest_point_indices, farthest_point_sample
from .scene import RayGrid, SampleRecord, SceneManifest, random_manifest, render_scene

__all__ = ["TriangleMesh", "car_mesh", "read_mesh", "write_mesh", "intersect_mesh", "raycast", "complete_surface",
           "farthest_point_indices", "farthest_point_sample", "RayGrid", "SampleRecord", "SceneManifest",
           "random_manifest", "render_scene"]
