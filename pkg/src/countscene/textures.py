"""Procedural surface textures for floors and walls.

A texture id has the form ``kind[@scale]:color[/color]`` where ``kind`` is one
of ``solid``, ``checker``, ``stripes`` or ``value-noise``, ``scale`` is the
cell size in meters (default 1.0, 0.5 for noise) and the colors are names from
:data:`TEXTURE_COLORS`.  Examples: ``solid:beige``, ``checker@0.5:light_gray/dark_gray``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

TEXTURE_KINDS = ("solid", "checker", "stripes", "value-noise")

TEXTURE_COLORS = {
    "white": (235, 235, 230),
    "cream": (240, 230, 200),
    "beige": (215, 195, 160),
    "sand": (200, 180, 140),
    "light_gray": (190, 190, 190),
    "gray": (140, 140, 140),
    "dark_gray": (80, 80, 80),
    "charcoal": (50, 50, 55),
    "slate": (100, 110, 125),
    "brown": (120, 85, 55),
    "oak": (170, 125, 75),
    "walnut": (95, 65, 45),
    "terracotta": (180, 95, 70),
    "sage": (150, 165, 135),
    "sky": (170, 195, 220),
}

_DEFAULT_SCALE = {"solid": 1.0, "checker": 1.0, "stripes": 1.0, "value-noise": 0.5}


@dataclass(frozen=True)
class TextureSpec:
    kind: str
    scale: float
    colors: tuple  # one or two (name, rgb) pairs

    @property
    def color_names(self):
        return tuple(name for name, _ in self.colors)


def parse_texture_id(texture_id, extra_colors=None):
    """Parse a texture id into a :class:`TextureSpec`.

    ``extra_colors`` maps additional color names to sRGB triples.
    Raises :class:`ConfigError` for anything unrecognised.
    """
    if not isinstance(texture_id, str) or ":" not in texture_id:
        raise ConfigError(f"unknown texture id {texture_id!r}")
    head, _, tail = texture_id.partition(":")
    kind, _, scale_txt = head.partition("@")
    if kind not in TEXTURE_KINDS:
        raise ConfigError(f"unknown texture kind {kind!r} in {texture_id!r}")
    scale = _DEFAULT_SCALE[kind]
    if scale_txt:
        try:
            scale = float(scale_txt)
        except ValueError:
            raise ConfigError(f"bad texture scale in {texture_id!r}") from None
        if not scale > 0:
            raise ConfigError(f"texture scale must be positive in {texture_id!r}")
    names = tail.split("/")
    if not 1 <= len(names) <= 2 or not all(names):
        raise ConfigError(f"texture {texture_id!r} needs one or two colors")
    if kind == "solid" and len(names) != 1:
        raise ConfigError(f"solid texture takes one color: {texture_id!r}")
    if kind != "solid" and len(names) != 2:
        raise ConfigError(f"{kind} texture takes two colors: {texture_id!r}")
    table = dict(TEXTURE_COLORS)
    if extra_colors:
        table.update(extra_colors)
    colors = []
    for name in names:
        if name not in table:
            raise ConfigError(f"unknown texture color {name!r} in {texture_id!r}")
        colors.append((name, tuple(int(v) for v in table[name])))
    return TextureSpec(kind, scale, tuple(colors))


def _hash2(ix, iy):
    # integer lattice hash -> [0, 1)
    h = (ix.astype(np.int64) * 374761393 + iy.astype(np.int64) * 668265263) & 0xFFFFFFFF
    h = ((h ^ (h >> 13)) * 1274126177) & 0xFFFFFFFF
    h = h ^ (h >> 16)
    return h.astype(np.float64) / 4294967296.0


def _value_noise(u, v):
    iu = np.floor(u)
    iv = np.floor(v)
    fu = u - iu
    fv = v - iv
    iu = iu.astype(np.int64)
    iv = iv.astype(np.int64)
    su = fu * fu * (3.0 - 2.0 * fu)
    sv = fv * fv * (3.0 - 2.0 * fv)
    n00 = _hash2(iu, iv)
    n10 = _hash2(iu + 1, iv)
    n01 = _hash2(iu, iv + 1)
    n11 = _hash2(iu + 1, iv + 1)
    top = n00 + (n10 - n00) * su
    bottom = n01 + (n11 - n01) * su
    return top + (bottom - top) * sv


def procedural_texture(texture_id, points, extra_colors=None):
    """Evaluate a texture at surface points.

    ``points`` has shape ``(..., 2)`` or ``(..., 3)`` (surface coordinates in
    meters).  Returns sRGB ``uint8`` colors of shape ``(..., 3)``.
    """
    spec = texture_id if isinstance(texture_id, TextureSpec) else parse_texture_id(texture_id, extra_colors)
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-1] not in (2, 3):
        raise ValueError("points must have 2 or 3 components")
    c0 = np.array(spec.colors[0][1], dtype=np.float64)
    if spec.kind == "solid":
        out = np.broadcast_to(c0, pts.shape[:-1] + (3,))
        return np.array(out, dtype=np.uint8)
    c1 = np.array(spec.colors[1][1], dtype=np.float64)
    scaled = pts / spec.scale
    if spec.kind == "checker":
        parity = np.floor(scaled).astype(np.int64).sum(axis=-1) % 2
        w = parity.astype(np.float64)
    elif spec.kind == "stripes":
        w = (np.floor(scaled[..., 0]).astype(np.int64) % 2).astype(np.float64)
    else:
        w = _value_noise(scaled[..., 0], scaled[..., 1])
    out = c0 + (c1 - c0) * w[..., None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
