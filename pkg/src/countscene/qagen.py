"""Templated counting questions with numeric, short and verbose answers.

Six question types are produced per image: ``color``, ``shape``,
``location``, ``object``, ``composite`` and ``adversarial``.  Every answer is
read from :class:`~countscene.scenegen.SceneMetadata` of the final scene.
Phrasings live in ``data/templates.json`` (or any file of the same format
passed to :class:`TemplateSet`).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from itertools import combinations
from pathlib import Path

from .config import SHAPES, ZONES

QUESTION_TYPES = ("color", "shape", "location", "object", "composite", "adversarial")
ATTRS = ("shape", "color", "zone")
_SLOT = re.compile(r"\{(\w+)\}")

_TYPE_SLOTS = {
    "shape": [frozenset({"shape"})],
    "color": [frozenset({"color"})],
    "location": [frozenset({"zone"})],
    "object": [frozenset()],
    "composite": [frozenset(c) for k in (2, 3) for c in combinations(ATTRS, k)],
    "adversarial": [frozenset({"shape", "color"})],
}


@dataclass(frozen=True)
class CountFilter:
    shape: str = None
    color: str = None
    zone: str = None

    def matches(self, obj):
        return (
            (self.shape is None or obj.shape == self.shape)
            and (self.color is None or obj.color == self.color)
            and (self.zone is None or obj.zone == self.zone)
        )

    def attrs(self):
        return frozenset(a for a in ATTRS if getattr(self, a) is not None)

    def count(self, metadata):
        return metadata.count(self.shape, self.color, self.zone)

    def to_dict(self):
        return {"shape": self.shape, "color": self.color, "zone": self.zone}

    @classmethod
    def from_dict(cls, d):
        d = d or {}
        return cls(d.get("shape"), d.get("color"), d.get("zone"))


@dataclass(frozen=True)
class QAItem:
    item_id: str
    scene_id: str
    image_ref: str
    question_type: str
    question: str
    numeric_gt: int
    short_gt: str
    verbose_gt: str
    filter: CountFilter

    def to_dict(self):
        return {
            "item_id": self.item_id,
            "scene_id": self.scene_id,
            "image_ref": self.image_ref,
            "question_type": self.question_type,
            "question": self.question,
            "numeric_gt": self.numeric_gt,
            "short_gt": self.short_gt,
            "verbose_gt": self.verbose_gt,
            "filter": self.filter.to_dict(),
        }


class TemplateSet:
    """Question phrasings and answer patterns loaded from JSON."""

    def __init__(self, path=None):
        if path is None:
            text = resources.files("countscene").joinpath("data/templates.json").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        data = json.loads(text)
        self.zones = data["zones"]
        self.shapes = data["shapes"]
        self.object_noun = data["object_noun"]
        self.gt = data["ground_truth"]
        self.questions = {t: list(data["questions"][t]) for t in QUESTION_TYPES}
        self._check()

    @staticmethod
    def slots(template):
        return frozenset(_SLOT.findall(template))

    def _check(self):
        for qtype, allowed in _TYPE_SLOTS.items():
            templates = self.questions[qtype]
            if not templates:
                raise ValueError(f"no templates for question type {qtype!r}")
            for t in templates:
                if self.slots(t) not in allowed:
                    raise ValueError(f"template {t!r} has slots unusable for type {qtype!r}")
        for z in ZONES:
            if z not in self.zones:
                raise ValueError(f"missing zone phrasing for {z!r}")
        for s in SHAPES:
            if s not in self.shapes:
                raise ValueError(f"missing shape nouns for {s!r}")

    def for_filter(self, qtype, flt):
        want = flt.attrs()
        return [t for t in self.questions[qtype] if self.slots(t) == want]

    def noun(self, flt, count):
        form = "singular" if count == 1 else "plural"
        head = self.shapes[flt.shape][form] if flt.shape else self.object_noun[form]
        return f"{flt.color} {head}" if flt.color else head

    def fill_question(self, template, flt):
        values = {
            "shape": self.shapes[flt.shape]["plural"] if flt.shape else "",
            "color": flt.color or "",
            "zone": self.zones[flt.zone]["phrase"] if flt.zone else "",
        }
        return _SLOT.sub(lambda m: values[m.group(1)], template)


_DEFAULT_TEMPLATES = None


def default_templates():
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = TemplateSet()
    return _DEFAULT_TEMPLATES


def render_ground_truths(flt, metadata, style, templates=None):
    """Answer text for ``flt`` in the ``numeric``, ``short`` or ``verbose`` style."""
    tpl = templates or default_templates()
    total = flt.count(metadata)
    if style == "numeric":
        return str(total)
    where = tpl.zones[flt.zone]["phrase"] if flt.zone else tpl.gt["anywhere"]

    def fmt(pattern, count, **extra):
        return pattern.format(be="is" if count == 1 else "are", count=count, noun=tpl.noun(flt, count), where=where, **extra)

    if style == "short":
        return fmt(tpl.gt["short"], total)
    if style != "verbose":
        raise ValueError(f"unknown ground-truth style {style!r}")
    parts = [tpl.gt["verbose_preamble"]]
    for zone in ZONES:
        if flt.zone is not None and zone != flt.zone:
            continue
        n = metadata.count(flt.shape, flt.color, zone)
        if n > 0:
            parts.append(fmt(tpl.gt["verbose_zone"], n, Zone=tpl.zones[zone]["sentence"]))
    parts.append(fmt(tpl.gt["verbose_total"], total))
    return " ".join(parts)


def _informative(metadata, combo):
    n = metadata.count(**combo)
    for a in combo:
        coarser = {k: v for k, v in combo.items() if k != a}
        if metadata.count(**coarser) == n:
            return False
    return True


def composite_candidates(metadata):
    """Present 2- and 3-attribute combinations where every attribute narrows the count.

    Returns a dict from attribute set to a sorted list of filters.
    """
    out = {}
    keys = sorted(metadata.composite)
    for k in (2, 3):
        for attrs in combinations(ATTRS, k):
            seen = set()
            for shape, color, zone in keys:
                full = {"shape": shape, "color": color, "zone": zone}
                combo = {a: full[a] for a in attrs}
                key = tuple(sorted(combo.items()))
                if key in seen:
                    continue
                seen.add(key)
                if _informative(metadata, combo):
                    out.setdefault(frozenset(attrs), []).append(CountFilter(**combo))
    return out


def make_adversarial(metadata, rng, colors=None):
    """A (shape, color) filter with zero matches that is close to the scene.

    Prefers pairs whose shape and color both occur in the scene (on different
    objects); otherwise keeps one attribute of an existing object and swaps the
    other.  Returns ``None`` when no such filter exists (e.g. empty scene).
    """
    shapes = metadata.present_shapes
    present_colors = metadata.present_colors
    if not shapes:
        return None
    cross = [
        CountFilter(shape=s, color=c)
        for s in shapes
        for c in present_colors
        if metadata.count(shape=s, color=c) == 0
    ]
    if cross:
        return cross[int(rng.integers(len(cross)))]
    palette = sorted(set(colors or metadata.palette_colors) | set(present_colors))
    fallback = set()
    for s in shapes:
        for c in palette:
            if metadata.count(shape=s, color=c) == 0:
                fallback.add((s, c))
    for c in present_colors:
        for s in SHAPES:
            if metadata.count(shape=s, color=c) == 0:
                fallback.add((s, c))
    if not fallback:
        return None
    options = sorted(fallback)
    s, c = options[int(rng.integers(len(options)))]
    return CountFilter(shape=s, color=c)


def _choose_filter(qtype, metadata, rng, colors):
    if qtype == "object":
        return CountFilter(), None
    if qtype == "shape":
        opts = metadata.present_shapes
        return (CountFilter(shape=opts[int(rng.integers(len(opts)))]), None) if opts else (None, "no shapes present")
    if qtype == "color":
        opts = metadata.present_colors
        return (CountFilter(color=opts[int(rng.integers(len(opts)))]), None) if opts else (None, "no colors present")
    if qtype == "location":
        opts = metadata.present_zones
        return (CountFilter(zone=opts[int(rng.integers(len(opts)))]), None) if opts else (None, "no zones occupied")
    if qtype == "composite":
        cands = composite_candidates(metadata)
        if not cands:
            return None, "no informative attribute combination"
        sets = sorted(cands, key=lambda s: sorted(s))
        group = cands[sets[int(rng.integers(len(sets)))]]
        return group[int(rng.integers(len(group)))], None
    if qtype == "adversarial":
        flt = make_adversarial(metadata, rng, colors)
        return (flt, None) if flt else (None, "no near-miss combination")
    raise ValueError(qtype)


def generate_questions(metadata, scene, image_ref, rng, templates=None, skip_log=None, types=QUESTION_TYPES):
    """One :class:`QAItem` per applicable question type for one image.

    Types without an applicable filter are skipped; a line per skip is
    appended to ``skip_log`` when given.
    """
    tpl = templates or default_templates()
    colors = [name for name, _ in scene.color_palette] or None
    stem = Path(image_ref).stem
    items = []
    for qtype in types:
        flt, why = _choose_filter(qtype, metadata, rng, colors)
        if flt is None:
            if skip_log is not None:
                skip_log.append(f"{scene.scene_id}\t{image_ref}\t{qtype}\t{why}")
            continue
        options = tpl.for_filter(qtype, flt)
        question = tpl.fill_question(options[int(rng.integers(len(options)))], flt)
        items.append(
            QAItem(
                item_id=f"{scene.scene_id}:{stem}:{qtype}",
                scene_id=scene.scene_id,
                image_ref=str(image_ref),
                question_type=qtype,
                question=question,
                numeric_gt=flt.count(metadata),
                short_gt=render_ground_truths(flt, metadata, "short", tpl),
                verbose_gt=render_ground_truths(flt, metadata, "verbose", tpl),
                filter=flt,
            )
        )
    return items
