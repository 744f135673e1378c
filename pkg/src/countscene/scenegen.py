"""Concrete scene construction: room, table, zone placement, lights, cameras.

Coordinates are meters with z up.  The room is centered on the origin in x/y
with its floor at z = 0, and the table is centered in the room.  Cameras sit on
an arc on the -y side of the table, so "left" is -x and "front" is -y.

An object's ``position`` is the center of its footprint on the supporting
surface (table top for ``on_table``, floor otherwise).
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .config import SHAPES, ZONES, CameraSettings
from .seeding import derive_seed
from .errors import PlacementError
from .textures import parse_texture_id

TOP_THICKNESS = 0.04
LEG_SIZE = 0.06
LEG_INSET = 0.04
SIDE_GAP = 0.2
SIDE_WIDTH = 0.9
FRONT_GAP = 0.2
FRONT_DEPTH = 0.45
# clearance kept free between neighbouring footprints
MARGIN = 0.02
CEILING_LIGHT_DROP = 0.25
LIGHT_FORWARD_OFFSET = 1.0


@dataclass(frozen=True)
class Box3:
    lo: tuple
    hi: tuple

    @property
    def center(self):
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    def contains(self, p, strict=True):
        if strict:
            return all(a < v < b for a, v, b in zip(self.lo, p, self.hi))
        return all(a <= v <= b for a, v, b in zip(self.lo, p, self.hi))


@dataclass(frozen=True)
class ZoneRegion:
    x0: float
    x1: float
    y0: float
    y1: float
    z: float


@dataclass(frozen=True)
class Light:
    position: tuple
    strength: float


@dataclass(frozen=True)
class Camera:
    position: tuple
    look_at: tuple
    fov_deg: float
    up: tuple = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class SceneObject:
    object_id: int
    shape: str
    color: str
    rgb: tuple
    size: float
    zone: str
    position: tuple
    bin_index: int
    yaw: float = 0.0

    @property
    def footprint(self):
        """Full width of the object's x (and y) extent."""
        if self.shape == "cube":
            return self.size * (abs(math.cos(self.yaw)) + abs(math.sin(self.yaw)))
        return self.size


@dataclass(frozen=True)
class SceneGraph:
    scene_id: str
    room: Box3
    table: Box3
    table_color: tuple  # (name, rgb)
    lights: tuple
    ambient: float
    cameras: tuple
    objects: tuple
    floor_texture: str
    wall_texture: str
    seed: int
    color_palette: tuple = ()
    floor_texture_palette: tuple = ()
    wall_texture_palette: tuple = ()
    table_palette: tuple = ()

    def to_dict(self):
        return {
            "scene_id": self.scene_id,
            "room": {"lo": list(self.room.lo), "hi": list(self.room.hi)},
            "table": {
                "lo": list(self.table.lo),
                "hi": list(self.table.hi),
                "top_thickness": TOP_THICKNESS,
                "leg_size": LEG_SIZE,
                "leg_inset": LEG_INSET,
                "material": {"name": self.table_color[0], "rgb": list(self.table_color[1])},
            },
            "materials": {"floor_texture": self.floor_texture, "wall_texture": self.wall_texture},
            "lights": [{"position": list(l.position), "strength": l.strength} for l in self.lights],
            "ambient": self.ambient,
            "cameras": [
                {"position": list(c.position), "look_at": list(c.look_at), "fov_deg": c.fov_deg, "up": list(c.up)}
                for c in self.cameras
            ],
            "objects": [
                {
                    "object_id": o.object_id,
                    "shape": o.shape,
                    "color": o.color,
                    "rgb": list(o.rgb),
                    "size": o.size,
                    "zone": o.zone,
                    "position": list(o.position),
                    "bin_index": o.bin_index,
                    "yaw": o.yaw,
                }
                for o in self.objects
            ],
            "seed": self.seed,
            "palettes": {
                "color": [{"name": n, "rgb": list(c)} for n, c in self.color_palette],
                "floor_texture": list(self.floor_texture_palette),
                "wall_texture": list(self.wall_texture_palette),
                "table": [{"name": n, "rgb": list(c)} for n, c in self.table_palette],
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        def pal(entries):
            return tuple((e["name"], tuple(e["rgb"])) for e in entries)

        tb = d["table"]
        pals = d.get("palettes", {})
        return cls(
            scene_id=d["scene_id"],
            room=Box3(tuple(d["room"]["lo"]), tuple(d["room"]["hi"])),
            table=Box3(tuple(tb["lo"]), tuple(tb["hi"])),
            table_color=(tb["material"]["name"], tuple(tb["material"]["rgb"])),
            lights=tuple(Light(tuple(l["position"]), l["strength"]) for l in d["lights"]),
            ambient=d["ambient"],
            cameras=tuple(
                Camera(tuple(c["position"]), tuple(c["look_at"]), c["fov_deg"], tuple(c["up"])) for c in d["cameras"]
            ),
            objects=tuple(
                SceneObject(
                    object_id=o["object_id"],
                    shape=o["shape"],
                    color=o["color"],
                    rgb=tuple(o["rgb"]),
                    size=o["size"],
                    zone=o["zone"],
                    position=tuple(o["position"]),
                    bin_index=o["bin_index"],
                    yaw=o.get("yaw", 0.0),
                )
                for o in d["objects"]
            ),
            floor_texture=d["materials"]["floor_texture"],
            wall_texture=d["materials"]["wall_texture"],
            seed=d["seed"],
            color_palette=pal(pals.get("color", [])),
            floor_texture_palette=tuple(pals.get("floor_texture", [])),
            wall_texture_palette=tuple(pals.get("wall_texture", [])),
            table_palette=pal(pals.get("table", [])),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SceneMetadata:
    per_shape: dict
    per_color: dict
    per_zone: dict
    composite: dict  # (shape, color, zone) -> count, present triples only
    total: int

    def count(self, shape=None, color=None, zone=None):
        return sum(
            n
            for (s, c, z), n in self.composite.items()
            if (shape is None or s == shape) and (color is None or c == color) and (zone is None or z == zone)
        )

    @property
    def present_shapes(self):
        return [s for s in SHAPES if self.per_shape.get(s, 0) > 0]

    @property
    def present_colors(self):
        return sorted(c for c, n in self.per_color.items() if n > 0)

    @property
    def present_zones(self):
        return [z for z in ZONES if self.per_zone.get(z, 0) > 0]

    @property
    def palette_colors(self):
        return sorted(self.per_color)

    def to_dict(self):
        return {
            "total": self.total,
            "per_shape": dict(self.per_shape),
            "per_color": dict(self.per_color),
            "per_zone": dict(self.per_zone),
            "composite": [
                {"shape": s, "color": c, "zone": z, "count": n} for (s, c, z), n in sorted(self.composite.items())
            ],
        }


def zone_regions(table):
    """Footprint region of each zone for a table bounding box."""
    (xlo, ylo, _), (xhi, yhi, h) = table.lo, table.hi
    under_pad = LEG_INSET + LEG_SIZE + MARGIN
    return {
        "on_table": ZoneRegion(xlo, xhi, ylo, yhi, h),
        "under_table": ZoneRegion(xlo, xhi, ylo + under_pad, yhi - under_pad, 0.0),
        "left_of_table": ZoneRegion(xlo - SIDE_GAP - SIDE_WIDTH, xlo - SIDE_GAP, ylo, yhi, 0.0),
        "right_of_table": ZoneRegion(xhi + SIDE_GAP, xhi + SIDE_GAP + SIDE_WIDTH, ylo, yhi, 0.0),
        "front_of_table": ZoneRegion(xlo, xhi, ylo - FRONT_GAP - FRONT_DEPTH, ylo - FRONT_GAP, 0.0),
    }


@dataclass
class Placement:
    position: tuple
    bin_index: int
    size: float
    yaw: float = 0.0


def _footprint_factor(shape, yaw):
    if shape == "cube":
        return abs(math.cos(yaw)) + abs(math.sin(yaw))
    return 1.0


def place_objects(table_bounds, zone_groups, rng, size_ranges=None):
    """Bin-partition placement of objects around a table.

    ``zone_groups`` maps a zone to a list of objects with ``shape`` and
    ``size`` attributes.  Within a zone with ``n`` objects, the zone's x-extent
    is cut into ``n`` equal bins, bins are assigned through a random
    permutation and each object lands uniformly inside its own bin with its
    whole footprint contained.  Cubes get a random yaw.

    An object too wide for its bin is resized uniformly within
    ``size_ranges[shape]`` truncated to the bin; without ``size_ranges`` (or
    if even the smallest size does not fit) :class:`PlacementError` is raised.

    Returns a dict zone -> list of :class:`Placement` in group order.
    """
    regions = zone_regions(table_bounds)
    placed = {}
    for zone in ZONES:
        group = list(zone_groups.get(zone, ()))
        if not group:
            continue
        reg = regions[zone]
        n = len(group)
        bin_w = (reg.x1 - reg.x0) / n
        depth = reg.y1 - reg.y0
        perm = rng.permutation(n)
        out = []
        for i, obj in enumerate(group):
            b = int(perm[i])
            yaw = float(rng.uniform(0.0, math.pi / 2)) if obj.shape == "cube" else 0.0
            size = float(obj.size)
            room = min(bin_w, depth) - MARGIN
            fac = _footprint_factor(obj.shape, yaw)
            if size * fac > room:
                lo, hi = size_ranges[obj.shape] if size_ranges else (size, size)
                if lo * fac > room and obj.shape == "cube":
                    yaw, fac = 0.0, 1.0
                if lo * fac > room:
                    raise PlacementError(
                        f"zone {zone} over capacity: {n} objects in {reg.x1 - reg.x0:.2f} m "
                        f"(bin {bin_w:.3f} m, smallest {obj.shape} {lo:.3f} m)"
                    )
                if size * fac > room:
                    size = float(rng.uniform(lo, min(hi, room / fac)))
            half = size * fac / 2
            bx0 = reg.x0 + b * bin_w
            x = float(rng.uniform(bx0 + half + MARGIN / 2, bx0 + bin_w - half - MARGIN / 2))
            y = float(rng.uniform(reg.y0 + half + MARGIN / 2, reg.y1 - half - MARGIN / 2))
            out.append(Placement((x, y, reg.z), b, size, yaw))
        placed[zone] = out
    return placed


def zone_capacity(table_bounds, zone, min_size):
    reg = zone_regions(table_bounds)[zone]
    return int((reg.x1 - reg.x0) // (min_size + MARGIN))


def _place_cameras(spec, rng, table, room):
    cs: CameraSettings = spec.camera
    w, d, h = spec.table_dims
    look_at = (0.0, -(FRONT_GAP + FRONT_DEPTH) / 2, h * 0.5)
    k = spec.camera_count
    if k == 1:
        bases = [0.0]
    else:
        bases = np.linspace(-cs.azimuth_spread_deg, cs.azimuth_spread_deg, k)
    cams = []
    for base in bases:
        az = math.radians(float(base) + float(rng.uniform(-cs.azimuth_jitter_deg, cs.azimuth_jitter_deg)))
        el = math.radians(float(rng.uniform(*cs.elevation_deg)))
        dist = float(rng.uniform(*cs.distance))
        fov = float(rng.uniform(*cs.fov_deg))
        direction = (math.cos(el) * math.sin(az), -math.cos(el) * math.cos(az), math.sin(el))
        inner = Box3(tuple(v + 0.15 for v in room.lo), tuple(v - 0.15 for v in room.hi))
        while True:
            pos = tuple(l + dist * u for l, u in zip(look_at, direction))
            if inner.contains(pos) or dist < 0.5:
                break
            dist *= 0.95
        if table.contains(pos, strict=False):
            raise PlacementError("camera ended up inside the table")
        cams.append(Camera(pos, look_at, fov))
    return tuple(cams)


def build_scene(spec):
    """Turn a :class:`~countscene.config.SceneSpec` into a :class:`SceneGraph`."""
    rng = np.random.default_rng(derive_seed(spec.rng_stream, "build"))
    rx, ry, rz = spec.room_dims
    room = Box3((-rx / 2, -ry / 2, 0.0), (rx / 2, ry / 2, rz))
    w, d, h = spec.table_dims
    table = Box3((-w / 2, -d / 2, 0.0), (w / 2, d / 2, h))
    # the table stands on the floor, so z is only checked against the ceiling
    inside = all(room.lo[i] < table.lo[i] and table.hi[i] < room.hi[i] for i in (0, 1))
    if not inside or table.hi[2] >= room.hi[2]:
        raise PlacementError("table does not fit in the room")

    groups = {}
    for idx, ospec in enumerate(spec.object_specs):
        groups.setdefault(ospec.zone, []).append((idx, ospec))
    placed = place_objects(
        table,
        {z: [o for _, o in items] for z, items in groups.items()},
        rng,
        size_ranges=spec.size_ranges,
    )
    by_index = {}
    for zone, items in groups.items():
        for (idx, _), p in zip(items, placed[zone]):
            by_index[idx] = p
    objects = []
    for idx, ospec in enumerate(spec.object_specs):
        p = by_index[idx]
        objects.append(
            SceneObject(
                object_id=idx + 1,
                shape=ospec.shape,
                color=ospec.color,
                rgb=tuple(ospec.rgb),
                size=p.size,
                zone=ospec.zone,
                position=p.position,
                bin_index=p.bin_index,
                yaw=p.yaw,
            )
        )

    light = Light((0.0, -LIGHT_FORWARD_OFFSET, rz - CEILING_LIGHT_DROP), spec.light_strength)
    cameras = _place_cameras(spec, rng, table, room)
    return SceneGraph(
        scene_id=spec.scene_id,
        room=room,
        table=table,
        table_color=(spec.table_color[0], tuple(spec.table_color[1])),
        lights=(light,),
        ambient=spec.ambient,
        cameras=cameras,
        objects=tuple(objects),
        floor_texture=spec.floor_texture,
        wall_texture=spec.wall_texture,
        seed=spec.rng_stream,
        color_palette=tuple(spec.color_palette),
        floor_texture_palette=tuple(spec.floor_texture_palette),
        wall_texture_palette=tuple(spec.wall_texture_palette),
        table_palette=tuple(spec.table_palette),
    )


def derive_metadata(scene):
    """Exact object counts per shape, color, zone and their combinations."""
    per_shape = {s: 0 for s in SHAPES}
    per_zone = {z: 0 for z in ZONES}
    per_color = {name: 0 for name, _ in scene.color_palette}
    composite = Counter()
    for o in scene.objects:
        per_shape[o.shape] = per_shape.get(o.shape, 0) + 1
        per_zone[o.zone] = per_zone.get(o.zone, 0) + 1
        per_color[o.color] = per_color.get(o.color, 0) + 1
        composite[(o.shape, o.color, o.zone)] += 1
    return SceneMetadata(per_shape, per_color, per_zone, dict(composite), len(scene.objects))


def recolor(scene, rng):
    """Random material reassignment; geometry and per-color grouping kept.

    Floor, wall and table materials are redrawn from their palettes.  Object
    colors are remapped through a random injective map from the colors in use
    to palette colors, skipping colors named by the new floor texture when the
    palette allows it.
    """
    floor = scene.floor_texture_palette[int(rng.integers(len(scene.floor_texture_palette)))] \
        if scene.floor_texture_palette else scene.floor_texture
    wall = scene.wall_texture_palette[int(rng.integers(len(scene.wall_texture_palette)))] \
        if scene.wall_texture_palette else scene.wall_texture
    table_color = scene.table_palette[int(rng.integers(len(scene.table_palette)))] \
        if scene.table_palette else scene.table_color
    used = sorted({o.color for o in scene.objects})
    palette = list(scene.color_palette)
    floor_names = set(parse_texture_id(floor).color_names)
    allowed = [c for c in palette if c[0] not in floor_names]
    if len(allowed) < len(used):
        allowed = palette
    mapping = {}
    if used and allowed:
        picks = rng.choice(len(allowed), size=len(used), replace=len(allowed) < len(used))
        mapping = {old: allowed[int(i)] for old, i in zip(used, picks)}
    objects = tuple(
        replace(o, color=mapping[o.color][0], rgb=tuple(mapping[o.color][1])) if o.color in mapping else o
        for o in scene.objects
    )
    return replace(
        scene,
        objects=objects,
        floor_texture=floor,
        wall_texture=wall,
        table_color=(table_color[0], tuple(table_color[1])),
    )
