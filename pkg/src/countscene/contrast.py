"""Object/background contrast validation in CIELAB with repair by re-rendering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .colors import srgb_to_linear
from .errors import DegenerateRegionError, NotVisibleError, SceneRejected
from .seeding import derive_seed

# sRGB (D65) -> XYZ
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# D65 reference white, 2 degree observer
_WHITE = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class LabColor:
    L: float
    a: float
    b: float

    def as_tuple(self):
        return (self.L, self.a, self.b)


def srgb_to_lab_array(rgb):
    """Vectorised sRGB (0-255, shape ``(..., 3)``) to CIELAB."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    xyz = srgb_to_linear(c) @ _SRGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _DELTA**3, np.cbrt(t), t / (3 * _DELTA**2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def srgb_to_lab(c):
    """Convert one 8-bit sRGB triple to :class:`LabColor`."""
    L, a, b = srgb_to_lab_array(np.asarray(c, dtype=np.float64)[None, :])[0]
    return LabColor(float(L), float(a), float(b))


def _lab_tuple(x):
    return x.as_tuple() if isinstance(x, LabColor) else tuple(x)


def delta_e(obj, bg):
    """CIE76 color difference (Euclidean distance in Lab)."""
    (l1, a1, b1), (l2, a2, b2) = _lab_tuple(obj), _lab_tuple(bg)
    return math.sqrt((l1 - l2) ** 2 + (a1 - a2) ** 2 + (b1 - b2) ** 2)


def passes(value, threshold):
    return value >= threshold


def background_ring(instances, object_id, radius):
    """Object mask and its square-dilated ring restricted to background pixels."""
    mask = instances == object_id
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    dilated = ndimage.binary_dilation(mask, structure=structure)
    ring = dilated & ~mask & (instances == 0)
    return mask, ring


def object_contrast(output, object_id, dilation_radius, lab=None):
    """Mean Lab color of an object, of its background ring, and their ΔE.

    ``lab`` may carry a precomputed Lab image of ``output.rgb``.
    Raises :class:`NotVisibleError` when the object has no pixels in this view
    and :class:`DegenerateRegionError` when the ring is empty.
    """
    mask, ring = background_ring(output.instances, object_id, dilation_radius)
    if not mask.any():
        raise NotVisibleError(f"object {object_id} not visible in view {output.camera_index}")
    if not ring.any():
        raise DegenerateRegionError(f"object {object_id} has no background ring in view {output.camera_index}")
    if lab is None:
        lab = srgb_to_lab_array(output.rgb)
    obj = lab[mask].mean(axis=0)
    bg = lab[ring].mean(axis=0)
    o, b = LabColor(*map(float, obj)), LabColor(*map(float, bg))
    return o, b, delta_e(o, b)


@dataclass
class ContrastEntry:
    object_id: int
    camera_index: int
    object_lab: tuple
    background_lab: tuple
    delta_e: float
    passed: bool
    degenerate: bool = False

    def to_dict(self):
        return {
            "object_id": self.object_id,
            "camera_index": self.camera_index,
            "object_lab": [round(v, 6) for v in self.object_lab],
            "background_lab": [round(v, 6) for v in self.background_lab],
            "delta_e": round(self.delta_e, 6),
            "pass": self.passed,
            "degenerate": self.degenerate,
        }


@dataclass
class ContrastReport:
    threshold: float
    entries: list = field(default_factory=list)
    retries_used: int = 0
    history: list = field(default_factory=list)  # failing pair count per attempt

    @property
    def overall_pass(self):
        return all(e.passed for e in self.entries)

    @property
    def failures(self):
        return [e for e in self.entries if not e.passed]

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "overall_pass": self.overall_pass,
            "retries_used": self.retries_used,
            "failing_pairs_per_attempt": list(self.history),
            "entries": [e.to_dict() for e in self.entries],
        }


def evaluate_contrast(scene, outputs, threshold, dilation_radius):
    """ΔE for every (object, view) pair where the object is visible."""
    report = ContrastReport(threshold)
    for out in outputs:
        lab = srgb_to_lab_array(out.rgb)
        for obj in scene.objects:
            try:
                o, b, de = object_contrast(out, obj.object_id, dilation_radius, lab=lab)
            except NotVisibleError:
                continue
            except DegenerateRegionError:
                # fully surrounded by other objects: nothing to compare against
                report.entries.append(ContrastEntry(obj.object_id, out.camera_index, (0, 0, 0), (0, 0, 0), 0.0, False, True))
                continue
            report.entries.append(
                ContrastEntry(obj.object_id, out.camera_index, o.as_tuple(), b.as_tuple(), de, passes(de, threshold))
            )
    return report


def validate_and_repair(scene, outputs, config, render_views=None):
    """Check contrast and re-material + re-render until every pair passes.

    ``render_views(scene) -> outputs`` re-renders all views; by default the
    tracer is used with ``config.image`` settings.  Returns
    ``(scene, outputs, report)``; raises :class:`SceneRejected` once
    ``config.validation.max_retries`` repairs have failed.
    """
    from .render.raytracer import RenderSettings, render_scene_all_views
    from .scenegen import recolor

    val = config.validation
    if render_views is None:
        settings = RenderSettings.from_image(config.image)

        def render_views(s):
            return render_scene_all_views(s, settings)

    history = []
    attempt = 0
    while True:
        report = evaluate_contrast(scene, outputs, val.delta_e_threshold, val.dilation_radius)
        history.append(len(report.failures))
        report.retries_used = attempt
        report.history = list(history)
        if report.overall_pass:
            return scene, outputs, report
        if attempt >= val.max_retries:
            raise SceneRejected(
                f"{scene.scene_id}: {len(report.failures)} low-contrast pairs after {attempt} repairs", report
            )
        attempt += 1
        rng = np.random.default_rng(derive_seed(scene.seed, "repair", attempt))
        scene = recolor(scene, rng)
        outputs = render_views(scene)
