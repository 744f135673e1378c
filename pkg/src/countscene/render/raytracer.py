"""Direct-lighting ray tracer producing RGB images and instance maps.

Shading is Lambertian: albedo times (ambient + point-light irradiance with a
hard shadow test).  Each pixel averages ``samples_per_pixel`` jittered primary
rays in linear light; the instance map uses one unjittered ray through the
pixel center.  Work is split into fixed row tiles whose jitter streams depend
only on the scene seed, camera and tile, so output does not depend on the
number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..colors import encode_8bit, srgb_to_linear
from ..seeding import derive_seed
from ..scenegen import LEG_INSET, LEG_SIZE, TOP_THICKNESS
from .geometry import EPS, Box, RoomInterior, primitive_for_object
from ..textures import parse_texture_id, procedural_texture

TILE_ROWS = 16
SHADOW_BIAS = 1e-4
CEILING_ALBEDO = srgb_to_linear(np.array([240, 240, 235]) / 255.0)

KIND_OBJECT, KIND_TABLE, KIND_ROOM = 0, 1, 2


@dataclass
class RenderOutput:
    width: int
    height: int
    rgb: np.ndarray  # (height, width, 3) uint8 sRGB
    instances: np.ndarray  # (height, width) uint16, 0 = background
    camera_index: int

    def __post_init__(self):
        if self.rgb.shape != (self.height, self.width, 3) or self.instances.shape != (self.height, self.width):
            raise ValueError("rgb and instance buffers must match width x height")


@dataclass(frozen=True)
class RenderSettings:
    width: int
    height: int
    samples_per_pixel: int = 1

    @classmethod
    def from_image(cls, image):
        return cls(image.width, image.height, image.samples_per_pixel)


@dataclass
class _Surface:
    prim: object
    instance_id: int
    kind: int
    albedo: np.ndarray = None
    bsphere: tuple = None


def table_primitives(table):
    """Top slab and four legs of the table, as axis-aligned boxes."""
    (xlo, ylo, _), (xhi, yhi, h) = table.lo, table.hi
    cx, cy = (xlo + xhi) / 2, (ylo + yhi) / 2
    parts = [Box((cx, cy, h - TOP_THICKNESS / 2), ((xhi - xlo) / 2, (yhi - ylo) / 2, TOP_THICKNESS / 2))]
    leg_h = h - TOP_THICKNESS
    off = LEG_INSET + LEG_SIZE / 2
    for lx in (xlo + off, xhi - off):
        for ly in (ylo + off, yhi - off):
            parts.append(Box((lx, ly, leg_h / 2), (LEG_SIZE / 2, LEG_SIZE / 2, leg_h / 2)))
    return parts


def scene_surfaces(scene):
    surfaces = []
    for obj in scene.objects:
        prim = primitive_for_object(obj)
        albedo = srgb_to_linear(np.array(obj.rgb, dtype=np.float64) / 255.0)
        surfaces.append(_Surface(prim, obj.object_id, KIND_OBJECT, albedo, prim.bounding_sphere()))
    table_albedo = srgb_to_linear(np.array(scene.table_color[1], dtype=np.float64) / 255.0)
    for prim in table_primitives(scene.table):
        surfaces.append(_Surface(prim, 0, KIND_TABLE, table_albedo, prim.bounding_sphere()))
    surfaces.append(_Surface(RoomInterior(scene.room.lo, scene.room.hi), 0, KIND_ROOM))
    return surfaces


def _bsphere_mask(o, d, bs):
    c, r = bs
    oc = o - c
    b = np.einsum("ij,ij->i", oc, d)
    cc = np.einsum("ij,ij->i", oc, oc) - r * r
    disc = b * b - cc
    return (disc >= 0) & (-b + np.sqrt(np.maximum(disc, 0.0)) > EPS)


def trace(surfaces, o, d):
    """Nearest hit over all surfaces: (t, surface index or -1, normal)."""
    n_rays = len(o)
    best_t = np.full(n_rays, np.inf)
    best_i = np.full(n_rays, -1, dtype=np.int64)
    best_n = np.zeros((n_rays, 3))
    for idx, s in enumerate(surfaces):
        if s.bsphere is not None:
            sel = np.nonzero(_bsphere_mask(o, d, s.bsphere))[0]
            if sel.size == 0:
                continue
            t, n = s.prim.intersect(o[sel], d[sel])
            closer = t < best_t[sel]
            rows = sel[closer]
            best_t[rows] = t[closer]
            best_i[rows] = idx
            best_n[rows] = n[closer]
        else:
            t, n = s.prim.intersect(o, d)
            closer = t < best_t
            best_t[closer] = t[closer]
            best_i[closer] = idx
            best_n[closer] = n[closer]
    return best_t, best_i, best_n


def occluded(surfaces, o, d, max_t):
    blocked = np.zeros(len(o), dtype=bool)
    for s in surfaces:
        if s.kind == KIND_ROOM:
            continue
        sel = np.nonzero(~blocked & _bsphere_mask(o, d, s.bsphere))[0]
        if sel.size == 0:
            continue
        t, _ = s.prim.intersect(o[sel], d[sel])
        blocked[sel[t < max_t[sel]]] = True
    return blocked


def camera_rays(camera, width, height, rows, cols, sx, sy):
    """Unit ray directions through image positions (row + sy, col + sx)."""
    pos = np.asarray(camera.position, dtype=np.float64)
    forward = np.asarray(camera.look_at, dtype=np.float64) - pos
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(camera.up, dtype=np.float64))
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    tan_half = math.tan(math.radians(camera.fov_deg) / 2)
    aspect = width / height
    u = ((cols + sx) / width * 2.0 - 1.0) * tan_half * aspect
    v = (1.0 - (rows + sy) / height * 2.0) * tan_half
    d = forward[None, :] + u[:, None] * right[None, :] + v[:, None] * up[None, :]
    d /= np.linalg.norm(d, axis=1)[:, None]
    return pos, d


def _room_albedo(scene, points, normals, floor_tex, wall_tex):
    out = np.empty_like(points)
    nz = normals[:, 2]
    floor = nz > 0.5
    ceiling = nz < -0.5
    xwall = np.abs(normals[:, 0]) > 0.5
    ywall = ~(floor | ceiling | xwall)
    if floor.any():
        out[floor] = procedural_texture(floor_tex, points[floor][:, :2])
    if xwall.any():
        out[xwall] = procedural_texture(wall_tex, points[xwall][:, [1, 2]])
    if ywall.any():
        out[ywall] = procedural_texture(wall_tex, points[ywall][:, [0, 2]])
    out = srgb_to_linear(out / 255.0)
    if ceiling.any():
        out[ceiling] = CEILING_ALBEDO
    return out


def _shade(scene, surfaces, o, d, floor_tex, wall_tex):
    t, idx, n = trace(surfaces, o, d)
    radiance = np.zeros((len(d), 3))
    hit = idx >= 0
    if not hit.any():
        return radiance
    rows = np.nonzero(hit)[0]
    t, idx, n = t[rows], idx[rows], n[rows]
    oo = o[rows] if o.ndim == 2 else np.broadcast_to(o, (len(rows), 3))
    p = oo + d[rows] * t[:, None]

    albedo = np.empty((len(rows), 3))
    kinds = np.array([s.kind for s in surfaces])[idx]
    room = kinds == KIND_ROOM
    if room.any():
        albedo[room] = _room_albedo(scene, p[room], n[room], floor_tex, wall_tex)
    solid = ~room
    if solid.any():
        table = np.stack([s.albedo if s.albedo is not None else np.zeros(3) for s in surfaces])
        albedo[solid] = table[idx[solid]]

    light_sum = np.full(len(rows), scene.ambient)
    for light in scene.lights:
        lp = np.asarray(light.position, dtype=np.float64)
        to_l = lp - p
        dist = np.linalg.norm(to_l, axis=1)
        ldir = to_l / dist[:, None]
        cos = np.einsum("ij,ij->i", n, ldir)
        lit = cos > 0
        if not lit.any():
            continue
        origin = p + n * SHADOW_BIAS
        sel = np.nonzero(lit)[0]
        blocked = occluded(surfaces, origin[sel], ldir[sel], dist[sel])
        contrib = np.zeros(len(rows))
        contrib[sel] = np.where(blocked, 0.0, light.strength * cos[sel] / (dist[sel] ** 2))
        light_sum += contrib
    radiance[rows] = albedo * light_sum[:, None]
    return radiance


def _render_tile(scene, surfaces, camera_index, settings, row0, row1, floor_tex, wall_tex):
    cam = scene.cameras[camera_index]
    w, h, spp = settings.width, settings.height, settings.samples_per_pixel
    rr, cc = np.meshgrid(np.arange(row0, row1, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    rr = rr.ravel()
    cc = cc.ravel()

    # instance map: one center ray per pixel
    origin, d = camera_rays(cam, w, h, rr, cc, 0.5, 0.5)
    o = np.broadcast_to(origin, d.shape)
    _, idx, _ = trace(surfaces, o, d)
    ids = np.array([s.instance_id for s in surfaces] + [0], dtype=np.uint16)
    inst = ids[idx].reshape(row1 - row0, w)

    rng = np.random.default_rng(derive_seed(scene.seed, "render", camera_index, row0, w, h, spp))
    jitter = rng.random((len(rr) * spp, 2))
    rs = np.repeat(rr, spp)
    cs = np.repeat(cc, spp)
    _, d = camera_rays(cam, w, h, rs, cs, jitter[:, 0], jitter[:, 1])
    o = np.broadcast_to(origin, d.shape)
    rad = _shade(scene, surfaces, o, d, floor_tex, wall_tex)
    rad = rad.reshape(len(rr), spp, 3).mean(axis=1)
    rgb = encode_8bit(rad).reshape(row1 - row0, w, 3)
    return rgb, inst


def render(scene, camera_index, settings, workers=1):
    """Render one camera view of ``scene``.

    ``settings`` is a :class:`RenderSettings` or anything with ``width``,
    ``height`` and ``samples_per_pixel``.
    """
    if not 0 <= camera_index < len(scene.cameras):
        raise IndexError(f"camera index {camera_index} out of range")
    w, h = settings.width, settings.height
    surfaces = scene_surfaces(scene)
    floor_tex = parse_texture_id(scene.floor_texture)
    wall_tex = parse_texture_id(scene.wall_texture)
    starts = list(range(0, h, TILE_ROWS))

    def job(r0):
        return _render_tile(scene, surfaces, camera_index, settings, r0, min(r0 + TILE_ROWS, h), floor_tex, wall_tex)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, starts))
    else:
        parts = [job(r0) for r0 in starts]
    rgb = np.concatenate([p[0] for p in parts], axis=0)
    inst = np.concatenate([p[1] for p in parts], axis=0)
    return RenderOutput(w, h, rgb, inst, camera_index)


def render_scene_all_views(scene, settings, workers=1):
    """One :class:`RenderOutput` per camera, in camera order."""
    if not scene.cameras:
        raise ValueError("scene has no cameras")
    return [render(scene, k, settings, workers=workers) for k in range(len(scene.cameras))]


def visible_pixel_counts(outputs, object_ids):
    """Map object id -> list of pixel counts, one per view."""
    counts = {oid: [] for oid in object_ids}
    for out in outputs:
        binc = np.bincount(out.instances.ravel(), minlength=max(object_ids, default=0) + 1)
        for oid in object_ids:
            counts[oid].append(int(binc[oid]))
    return counts
