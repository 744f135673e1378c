"""Generation config: parsing, validation and per-scene sampling.

The config is a JSON document with the sections ``image``, ``environment``,
``table``, ``camera``, ``objects``, ``validation`` and a top-level ``seed``.
Every section is optional; missing sections and fields fall back to the
shipped defaults (``data/default_config.json``).  Unknown keys are rejected.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError
from .seeding import derive_seed
from .textures import parse_texture_id

SHAPES = ("cube", "sphere", "cone", "cylinder")
ZONES = ("on_table", "under_table", "left_of_table", "right_of_table", "front_of_table")
ZONE_ALIASES = {
    "on": "on_table",
    "on_table": "on_table",
    "under": "under_table",
    "under_table": "under_table",
    "left": "left_of_table",
    "left_of_table": "left_of_table",
    "right": "right_of_table",
    "right_of_table": "right_of_table",
    "front": "front_of_table",
    "front_of_table": "front_of_table",
}
VISIBILITY_POLICIES = ("every_view", "any_view")


@dataclass(frozen=True)
class ImageSettings:
    width: int = 1024
    height: int = 576
    samples_per_pixel: int = 16
    cameras_per_scene: int = 5


@dataclass(frozen=True)
class EnvironmentSettings:
    light_strength: tuple
    ambient: float
    room_dims: tuple  # ((lo, hi) for x, y, z)
    floor_texture_palette: tuple
    wall_texture_palette: tuple
    table_palette: tuple  # ((name, rgb), ...)


@dataclass(frozen=True)
class TableSettings:
    width: tuple
    depth: tuple
    height: tuple


@dataclass(frozen=True)
class CameraSettings:
    distance: tuple
    elevation_deg: tuple
    fov_deg: tuple
    azimuth_spread_deg: float
    azimuth_jitter_deg: float


@dataclass(frozen=True)
class ObjectSettings:
    count_range: tuple
    size_range_per_shape: dict
    zone_probabilities: dict
    color_palette: tuple  # ((name, rgb), ...)
    shape_variety: dict  # number of distinct shapes -> probability
    color_variety: dict

    def color_rgb(self, name):
        for n, rgb in self.color_palette:
            if n == name:
                return rgb
        raise KeyError(name)


@dataclass(frozen=True)
class ValidationSettings:
    delta_e_threshold: float = 12.5
    dilation_radius: int = 2
    max_retries: int = 5
    min_object_pixels: int = 25
    visibility: str = "every_view"


@dataclass(frozen=True)
class GenerationConfig:
    image: ImageSettings
    environment: EnvironmentSettings
    table: TableSettings
    camera: CameraSettings
    objects: ObjectSettings
    validation: ValidationSettings
    seed: int = 0

    def to_dict(self):
        """JSON-ready dict in the same schema :func:`parse_config` accepts."""
        env = self.environment
        obj = self.objects
        return {
            "image": asdict(self.image),
            "environment": {
                "light_strength": list(env.light_strength),
                "ambient": env.ambient,
                "room_dims": {ax: list(r) for ax, r in zip("xyz", env.room_dims)},
                "floor_texture_palette": list(env.floor_texture_palette),
                "wall_texture_palette": list(env.wall_texture_palette),
                "table_palette": [{"name": n, "rgb": list(c)} for n, c in env.table_palette],
            },
            "table": {k: list(v) for k, v in asdict(self.table).items()},
            "camera": {
                "distance": list(self.camera.distance),
                "elevation_deg": list(self.camera.elevation_deg),
                "fov_deg": list(self.camera.fov_deg),
                "azimuth_spread_deg": self.camera.azimuth_spread_deg,
                "azimuth_jitter_deg": self.camera.azimuth_jitter_deg,
            },
            "objects": {
                "count_range": list(obj.count_range),
                "size_range_per_shape": {s: list(r) for s, r in obj.size_range_per_shape.items()},
                "zone_probabilities": dict(obj.zone_probabilities),
                "color_palette": [{"name": n, "rgb": list(c)} for n, c in obj.color_palette],
                "shape_variety": {str(k): v for k, v in obj.shape_variety.items()},
                "color_variety": {str(k): v for k, v in obj.color_variety.items()},
            },
            "validation": asdict(self.validation),
            "seed": self.seed,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def config_hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ObjectSpec:
    shape: str
    color: str
    rgb: tuple
    size: float
    zone: str


@dataclass(frozen=True)
class SceneSpec:
    scene_id: str
    scene_index: int
    object_specs: tuple
    room_dims: tuple
    light_strength: float
    ambient: float
    floor_texture: str
    wall_texture: str
    table_color: tuple  # (name, rgb)
    table_dims: tuple  # (width, depth, height)
    camera_count: int
    camera: CameraSettings
    size_ranges: dict
    rng_stream: int
    color_palette: tuple = field(default=())
    floor_texture_palette: tuple = field(default=())
    wall_texture_palette: tuple = field(default=())
    table_palette: tuple = field(default=())



def _default_document():
    text = resources.files("countscene").joinpath("data/default_config.json").read_text("utf-8")
    return json.loads(text)


# -- field validators ---------------------------------------------------------

def _number(value, path, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", path)
    if integer and not (isinstance(value, int) or float(value).is_integer()):
        raise ConfigError("expected an integer", path)
    if not math.isfinite(value):
        raise ConfigError("must be finite", path)
    return int(value) if integer else float(value)


def _range(value, path, integer=False, positive=False):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError("expected a [low, high] pair", path)
    lo = _number(value[0], path, integer)
    hi = _number(value[1], path, integer)
    if lo > hi:
        raise ConfigError(f"low {lo} exceeds high {hi}", path)
    if positive and lo <= 0:
        raise ConfigError("low must be > 0", path)
    return (lo, hi)


def _palette(value, path, min_len=1):
    if not isinstance(value, list) or len(value) < min_len:
        raise ConfigError(f"expected a list of at least {min_len} colors", path)
    out = []
    seen = set()
    for i, entry in enumerate(value):
        p = f"{path}[{i}]"
        if isinstance(entry, dict):
            _check_keys(entry, {"name", "rgb"}, p)
            name, rgb = entry.get("name"), entry.get("rgb")
        elif isinstance(entry, list) and len(entry) == 2:
            name, rgb = entry
        else:
            raise ConfigError("expected {name, rgb}", p)
        if not isinstance(name, str) or not name:
            raise ConfigError("color name must be a non-empty string", p)
        if name in seen:
            raise ConfigError(f"duplicate color name {name!r}", p)
        seen.add(name)
        if not isinstance(rgb, list) or len(rgb) != 3:
            raise ConfigError("rgb must be three integers", p)
        triple = tuple(_number(c, p + ".rgb", integer=True) for c in rgb)
        if any(c < 0 or c > 255 for c in triple):
            raise ConfigError("rgb channels must lie in [0, 255]", p)
        out.append((name, triple))
    return tuple(out)


def _probabilities(value, path, keys=None, key_map=None):
    if not isinstance(value, dict) or not value:
        raise ConfigError("expected a non-empty mapping", path)
    out = {}
    for k, v in value.items():
        key = k
        if key_map is not None:
            if k not in key_map:
                raise ConfigError(f"unknown key {k!r}", path)
            key = key_map[k]
        elif keys is not None and k not in keys:
            raise ConfigError(f"unknown key {k!r}", path)
        if key in out:
            raise ConfigError(f"duplicate entry for {key!r}", path)
        p = _number(v, f"{path}.{k}")
        if p < 0:
            raise ConfigError("probabilities must be >= 0", f"{path}.{k}")
        out[key] = p
    total = sum(out.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"probabilities sum to {total!r}, expected 1.0", path)
    return out


def _check_keys(section, allowed, path):
    if not isinstance(section, dict):
        raise ConfigError("expected an object", path)
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(map(repr, unknown))}", path)


def _variety(value, path):
    probs = _probabilities(value, path)
    out = {}
    for k, p in probs.items():
        try:
            n = int(k)
        except ValueError:
            raise ConfigError(f"variety keys must be integers, got {k!r}", path) from None
        if n < 1:
            raise ConfigError("variety keys must be >= 1", path)
        out[n] = p
    return dict(sorted(out.items()))


def build_config(doc):
    """Validate a decoded JSON document (merged over defaults)."""
    defaults = _default_document()
    _check_keys(doc, defaults.keys(), "config")
    merged = copy.deepcopy(defaults)
    for section, value in doc.items():
        if section == "seed":
            merged["seed"] = value
            continue
        _check_keys(value, defaults[section].keys(), section)
        merged[section].update(value)

    im = merged["image"]
    image = ImageSettings(
        width=_number(im["width"], "image.width", integer=True),
        height=_number(im["height"], "image.height", integer=True),
        samples_per_pixel=_number(im["samples_per_pixel"], "image.samples_per_pixel", integer=True),
        cameras_per_scene=_number(im["cameras_per_scene"], "image.cameras_per_scene", integer=True),
    )
    if image.width < 64:
        raise ConfigError("must be >= 64", "image.width")
    if image.height < 64:
        raise ConfigError("must be >= 64", "image.height")
    if image.samples_per_pixel < 1:
        raise ConfigError("must be >= 1", "image.samples_per_pixel")
    if image.cameras_per_scene < 1:
        raise ConfigError("must be >= 1", "image.cameras_per_scene")

    en = merged["environment"]
    room = en["room_dims"]
    _check_keys(room, {"x", "y", "z"}, "environment.room_dims")
    if set(room) != {"x", "y", "z"}:
        raise ConfigError("needs x, y and z ranges", "environment.room_dims")
    room_dims = tuple(_range(room[ax], f"environment.room_dims.{ax}", positive=True) for ax in "xyz")
    textures = {}
    for key in ("floor_texture_palette", "wall_texture_palette"):
        pal = en[key]
        if not isinstance(pal, list) or not pal:
            raise ConfigError("expected a non-empty list of texture ids", f"environment.{key}")
        for i, tid in enumerate(pal):
            try:
                parse_texture_id(tid)
            except ConfigError as exc:
                raise ConfigError(str(exc), f"environment.{key}[{i}]") from None
        textures[key] = tuple(pal)
    ambient = _number(en["ambient"], "environment.ambient")
    if not 0 <= ambient <= 1:
        raise ConfigError("must lie in [0, 1]", "environment.ambient")
    environment = EnvironmentSettings(
        light_strength=_range(en["light_strength"], "environment.light_strength", positive=True),
        ambient=ambient,
        room_dims=room_dims,
        floor_texture_palette=textures["floor_texture_palette"],
        wall_texture_palette=textures["wall_texture_palette"],
        table_palette=_palette(en["table_palette"], "environment.table_palette"),
    )

    tb = merged["table"]
    table = TableSettings(
        width=_range(tb["width"], "table.width", positive=True),
        depth=_range(tb["depth"], "table.depth", positive=True),
        height=_range(tb["height"], "table.height", positive=True),
    )
    if table.depth[0] < 0.5:
        raise ConfigError("tables shallower than 0.5 m leave no room under them", "table.depth")
    # table plus side zones must fit inside the room
    if table.width[1] + 2 * 1.2 >= room_dims[0][0]:
        raise ConfigError("room too narrow for the table and side zones", "environment.room_dims.x")
    if table.height[1] + 0.5 >= room_dims[2][0]:
        raise ConfigError("room too low for the table", "environment.room_dims.z")

    ca = merged["camera"]
    camera = CameraSettings(
        distance=_range(ca["distance"], "camera.distance", positive=True),
        elevation_deg=_range(ca["elevation_deg"], "camera.elevation_deg"),
        fov_deg=_range(ca["fov_deg"], "camera.fov_deg"),
        azimuth_spread_deg=_number(ca["azimuth_spread_deg"], "camera.azimuth_spread_deg"),
        azimuth_jitter_deg=_number(ca["azimuth_jitter_deg"], "camera.azimuth_jitter_deg"),
    )
    if camera.fov_deg[0] <= 10 or camera.fov_deg[1] >= 120:
        raise ConfigError("field of view must lie in (10, 120) degrees", "camera.fov_deg")
    if camera.elevation_deg[0] < 0 or camera.elevation_deg[1] >= 89:
        raise ConfigError("elevation must lie in [0, 89) degrees", "camera.elevation_deg")
    if not 0 <= camera.azimuth_spread_deg <= 80 or not 0 <= camera.azimuth_jitter_deg <= 20:
        raise ConfigError("azimuth spread in [0, 80], jitter in [0, 20] degrees", "camera")

    ob = merged["objects"]
    count_range = _range(ob["count_range"], "objects.count_range", integer=True)
    if count_range[0] < 0:
        raise ConfigError("low must be >= 0", "objects.count_range")
    sizes = ob["size_range_per_shape"]
    _check_keys(sizes, SHAPES, "objects.size_range_per_shape")
    if set(sizes) != set(SHAPES):
        raise ConfigError(f"needs a range for each of {', '.join(SHAPES)}", "objects.size_range_per_shape")
    size_ranges = {s: _range(sizes[s], f"objects.size_range_per_shape.{s}", positive=True) for s in SHAPES}
    if max(hi for _, hi in size_ranges.values()) > 0.45:
        raise ConfigError("objects larger than 0.45 m do not fit under the table", "objects.size_range_per_shape")
    zprobs = _probabilities(ob["zone_probabilities"], "objects.zone_probabilities", key_map=ZONE_ALIASES)
    zprobs = {z: zprobs.get(z, 0.0) for z in ZONES}
    objects = ObjectSettings(
        count_range=count_range,
        size_range_per_shape=size_ranges,
        zone_probabilities=zprobs,
        color_palette=_palette(ob["color_palette"], "objects.color_palette", min_len=2),
        shape_variety=_variety(ob["shape_variety"], "objects.shape_variety"),
        color_variety=_variety(ob["color_variety"], "objects.color_variety"),
    )
    if max(objects.shape_variety) > len(SHAPES):
        raise ConfigError(f"at most {len(SHAPES)} distinct shapes", "objects.shape_variety")
    if max(objects.color_variety) > len(objects.color_palette):
        raise ConfigError("more distinct colors than the palette holds", "objects.color_variety")

    va = merged["validation"]
    validation = ValidationSettings(
        delta_e_threshold=_number(va["delta_e_threshold"], "validation.delta_e_threshold"),
        dilation_radius=_number(va["dilation_radius"], "validation.dilation_radius", integer=True),
        max_retries=_number(va["max_retries"], "validation.max_retries", integer=True),
        min_object_pixels=_number(va["min_object_pixels"], "validation.min_object_pixels", integer=True),
        visibility=va["visibility"],
    )
    if validation.delta_e_threshold <= 0:
        raise ConfigError("must be > 0", "validation.delta_e_threshold")
    if validation.dilation_radius < 1:
        raise ConfigError("must be >= 1", "validation.dilation_radius")
    if validation.max_retries < 1:
        raise ConfigError("must be >= 1", "validation.max_retries")
    if validation.min_object_pixels < 1:
        raise ConfigError("must be >= 1", "validation.min_object_pixels")
    if validation.visibility not in VISIBILITY_POLICIES:
        raise ConfigError(f"must be one of {VISIBILITY_POLICIES}", "validation.visibility")

    seed = merged["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("must be an unsigned 64-bit integer", "seed")

    return GenerationConfig(image, environment, table, camera, objects, validation, seed)


def parse_document(text):
    """JSON text to a raw config document (not yet validated)."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def parse_config(text):
    """Parse and validate a JSON config document."""
    return build_config(parse_document(text))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def default_config(**overrides):
    """Shipped defaults; ``overrides`` maps section name to a partial dict."""
    return build_config(overrides)


TOY_OVERRIDES = {
    "image": {"width": 128, "height": 72, "samples_per_pixel": 1, "cameras_per_scene": 2},
    "validation": {"min_object_pixels": 4},
}


def apply_overrides(doc, overrides):
    """Section-level merge of ``overrides`` into a copy of ``doc``."""
    out = dict(doc)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = {**out[key], **value}
        else:
            out[key] = value
    return out


def toy_config(seed=0):
    """Small preset for fast runs: 128x72, 1 spp, 2 cameras."""
    return build_config(apply_overrides(TOY_OVERRIDES, {"seed": seed}))


def _uniform(rng, r):
    lo, hi = r
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def _choose_variety(rng, variety, limit):
    ks = [k for k in variety if k <= limit]
    ps = np.array([variety[k] for k in ks], dtype=np.float64)
    if ps.sum() <= 0:
        return min(limit, 1)
    return int(ks[rng.choice(len(ks), p=ps / ps.sum())])


def sample_scene_spec(config, scene_index):
    """Draw the concrete parameters of scene ``scene_index``.

    Pure function of ``(config, scene_index)``.
    """
    rng = np.random.default_rng(derive_seed(config.seed, scene_index, "spec"))
    ob = config.objects
    en = config.environment
    lo, hi = ob.count_range
    count = int(rng.integers(lo, hi + 1))

    n_shapes = _choose_variety(rng, ob.shape_variety, len(SHAPES))
    shapes = [SHAPES[i] for i in sorted(rng.choice(len(SHAPES), size=n_shapes, replace=False))]
    n_colors = _choose_variety(rng, ob.color_variety, len(ob.color_palette))
    colors = [ob.color_palette[i] for i in sorted(rng.choice(len(ob.color_palette), size=n_colors, replace=False))]

    zone_p = np.array([ob.zone_probabilities[z] for z in ZONES], dtype=np.float64)
    zone_p = zone_p / zone_p.sum()
    specs = []
    for _ in range(count):
        shape = shapes[int(rng.integers(len(shapes)))]
        cname, rgb = colors[int(rng.integers(len(colors)))]
        size = _uniform(rng, ob.size_range_per_shape[shape])
        zone = ZONES[int(rng.choice(len(ZONES), p=zone_p))]
        specs.append(ObjectSpec(shape, cname, rgb, size, zone))

    room_dims = tuple(_uniform(rng, r) for r in en.room_dims)
    tb = config.table
    table_dims = (_uniform(rng, tb.width), _uniform(rng, tb.depth), _uniform(rng, tb.height))
    return SceneSpec(
        scene_id=f"scene_{scene_index:06d}",
        scene_index=scene_index,
        object_specs=tuple(specs),
        room_dims=room_dims,
        light_strength=_uniform(rng, en.light_strength),
        ambient=en.ambient,
        floor_texture=en.floor_texture_palette[int(rng.integers(len(en.floor_texture_palette)))],
        wall_texture=en.wall_texture_palette[int(rng.integers(len(en.wall_texture_palette)))],
        table_color=en.table_palette[int(rng.integers(len(en.table_palette)))],
        table_dims=table_dims,
        camera_count=config.image.cameras_per_scene,
        camera=config.camera,
        size_ranges=dict(ob.size_range_per_shape),
        rng_stream=derive_seed(config.seed, scene_index, "scene"),
        color_palette=ob.color_palette,
        floor_texture_palette=en.floor_texture_palette,
        wall_texture_palette=en.wall_texture_palette,
        table_palette=en.table_palette,
    )
