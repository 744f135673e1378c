"""Analytic-primitive ray tracing, procedural textures and PNG output."""
from .geometry import Box, Cone, Cylinder, Hit, Ray, RoomInterior, Sphere, intersect_primitive, primitive_for_object
from .pngio import read_png, read_render, write_png
from .raytracer import RenderOutput, RenderSettings, render, render_scene_all_views, visible_pixel_counts
from ..textures import TEXTURE_COLORS, parse_texture_id, procedural_texture

__all__ = [
    "Box", "Cone", "Cylinder", "Hit", "Ray", "RoomInterior", "Sphere",
    "intersect_primitive", "primitive_for_object",
    "read_png", "read_render", "write_png",
    "RenderOutput", "RenderSettings", "render", "render_scene_all_views", "visible_pixel_counts",
    "TEXTURE_COLORS", "parse_texture_id", "procedural_texture",
]
