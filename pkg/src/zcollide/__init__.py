"""Image-space collision detection with orthographic height fields."""

from .detector import (
    CollisionConfig,
    CollisionReport,
    Contact,
    DetectionVolume,
    FieldKind,
    HeightField,
    UsageError,
    build_environment_field,
    build_object_back_field,
    build_object_field,
    compare,
    compare_two_boundary,
    detect,
    detect_multi,
)
from .geometry import Mesh, RigidTransform, apply_transform, load_obj, triangle_normal
from .oracle import mesh_collide, point_inside_closed_mesh, raycast_surface, tri_tri_intersect
from .particles import CubeField, ParticleField, ParticleSet, ParticleSystem, step_particles
from .pgm import dump_height_field
from .pipeline import Cull, DepthTest, OrthoCamera, RenderConfig, RenderTargets, rasterize
from .scene import SceneError, load_scene, parse_scene

__version__ = "0.1.0"

__all__ = [
    "CollisionConfig", "CollisionReport", "Contact", "CubeField", "Cull", "DepthTest",
    "DetectionVolume", "FieldKind", "HeightField", "Mesh", "OrthoCamera", "ParticleField",
    "ParticleSet", "ParticleSystem", "RenderConfig", "RenderTargets", "RigidTransform",
    "SceneError", "UsageError", "apply_transform", "build_environment_field",
    "build_object_back_field", "build_object_field", "compare", "compare_two_boundary",
    "detect", "detect_multi", "dump_height_field", "load_obj", "load_scene", "mesh_collide",
    "parse_scene", "point_inside_closed_mesh", "rasterize", "raycast_surface", "step_particles",
    "tri_tri_intersect", "triangle_normal",
]
