"""Dataset assembly: per-image budgeting, class balancing, test split, JSONL I/O."""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ManifestError, SplitError
from .qagen import QUESTION_TYPES, CountFilter, QAItem

# training-answer distribution of the reference dataset: class -> items
REFERENCE_PROFILE = {
    0: 3100, 1: 3100, 2: 3100, 3: 3100, 4: 3100, 5: 3100,
    6: 2277, 7: 1358, 8: 842, 9: 545, 10: 479,
    11: 470, 12: 441, 13: 442, 14: 453, 15: 445,
}

_FIELDS = {
    "item_id": str,
    "scene_id": str,
    "image_ref": str,
    "question_type": str,
    "question": str,
    "numeric_gt": int,
    "short_gt": str,
    "verbose_gt": str,
    "filter": dict,
}


@dataclass(frozen=True)
class BalanceProfile:
    targets: dict  # gt class -> max items

    def __post_init__(self):
        for k, v in self.targets.items():
            if v < 0:
                raise ValueError(f"negative target for class {k}")

    @classmethod
    def reference(cls):
        return cls(dict(REFERENCE_PROFILE))


@dataclass
class DatasetManifest:
    items: list = field(default_factory=list)
    split: str = "train"
    provenance: dict = field(default_factory=dict)
    shortfalls: dict = field(default_factory=dict)  # gt class -> missing items

    def __post_init__(self):
        ids = [it.item_id for it in self.items]
        if len(ids) != len(set(ids)):
            dup = next(i for i, c in Counter(ids).items() if c > 1)
            raise ValueError(f"duplicate item_id {dup!r}")

    @property
    def stats(self):
        return dict(sorted(Counter(it.numeric_gt for it in self.items).items()))

    def __len__(self):
        return len(self.items)

    def __eq__(self, other):
        return (
            isinstance(other, DatasetManifest)
            and self.items == other.items
            and self.split == other.split
            and self.provenance == other.provenance
        )


def _image_key(item):
    return item.image_ref


def assemble(items, per_image_budget, rng, adversarial_prob=0.5, provenance=None):
    """Keep at most ``per_image_budget`` items per image.

    Exact duplicates (same image, same question text) are dropped first.
    When an image has more items than the budget, its adversarial item is kept
    with probability ``adversarial_prob`` and the remaining slots are filled
    one question type at a time in random order, so the kept items cover as
    many types as the budget allows.  A dropped adversarial item is used only
    when too few other items remain.
    """
    by_image = defaultdict(list)
    seen = set()
    for it in items:
        key = (_image_key(it), it.question)
        if key in seen:
            continue
        seen.add(key)
        by_image[_image_key(it)].append(it)
    kept = []
    for image in sorted(by_image):
        group = sorted(by_image[image], key=lambda it: (QUESTION_TYPES.index(it.question_type), it.item_id))
        if len(group) <= per_image_budget:
            kept.extend(group)
            continue
        adversarial = [it for it in group if it.question_type == "adversarial"]
        others = [it for it in group if it.question_type != "adversarial"]
        chosen = []
        if adversarial and per_image_budget > 0 and rng.random() < adversarial_prob:
            chosen.append(adversarial.pop(int(rng.integers(len(adversarial)))))
        # round-robin over shuffled types, shuffled items within a type
        by_type = defaultdict(list)
        for it in others:
            by_type[it.question_type].append(it)
        queues = [[v[i] for i in rng.permutation(len(v))] for _, v in sorted(by_type.items())]
        queues = [queues[i] for i in rng.permutation(len(queues))]
        while len(chosen) < per_image_budget and any(queues):
            for q in queues:
                if q and len(chosen) < per_image_budget:
                    chosen.append(q.pop(0))
        chosen += adversarial[: per_image_budget - len(chosen)]
        chosen_ids = {it.item_id for it in chosen}
        kept.extend(it for it in group if it.item_id in chosen_ids)
    prov = dict(provenance or {})
    prov.setdefault("tool_version", __version__)
    prov["per_image_budget"] = per_image_budget
    prov["adversarial_prob"] = adversarial_prob
    return DatasetManifest(kept, "train", prov)


def balance(manifest, profile, rng):
    """Subsample each answer class down to its target; never duplicates.

    Classes missing from the profile have target 0.  Classes whose supply is
    below target are kept whole and listed in the result's ``shortfalls``.
    """
    by_class = defaultdict(list)
    for pos, it in enumerate(manifest.items):
        by_class[it.numeric_gt].append(pos)
    keep = set()
    shortfalls = {}
    for klass in sorted(set(by_class) | set(profile.targets)):
        positions = by_class.get(klass, [])
        target = profile.targets.get(klass, 0)
        if len(positions) > target:
            ordered = sorted(positions, key=lambda p: manifest.items[p].item_id)
            picks = rng.choice(len(ordered), size=target, replace=False) if target else []
            keep.update(ordered[int(i)] for i in picks)
        else:
            keep.update(positions)
            if len(positions) < target:
                shortfalls[klass] = target - len(positions)
    items = [it for pos, it in enumerate(manifest.items) if pos in keep]
    prov = dict(manifest.provenance)
    prov["balance_targets"] = {str(k): v for k, v in sorted(profile.targets.items())}
    prov["balance_shortfalls"] = {str(k): v for k, v in sorted(shortfalls.items())}
    return DatasetManifest(items, manifest.split, prov, shortfalls)


def build_test_split(pool, classes, per_class, rng):
    """Scene-disjoint test set with exactly ``per_class`` items per class.

    Whole scenes are moved to the test side; their items that are not needed
    are discarded so no scene feeds both sides.  Scenes are picked greedily,
    always serving the class with the fewest remaining candidates first.
    Returns ``(test, remaining_pool)``.
    """
    classes = list(classes)
    items = pool.items if isinstance(pool, DatasetManifest) else list(pool)
    if per_class == 0:
        test = DatasetManifest([], "test", {"per_class": 0})
        return test, DatasetManifest(list(items), "train", dict(getattr(pool, "provenance", {}) or {}))

    supply = Counter(it.numeric_gt for it in items)
    for c in classes:
        if supply[c] < per_class:
            raise SplitError(f"class {c} has {supply[c]} items, need {per_class}", klass=c)

    scene_items = defaultdict(list)
    for it in items:
        scene_items[it.scene_id].append(it)
    scenes = sorted(scene_items)
    scene_classes = {s: Counter(it.numeric_gt for it in scene_items[s]) for s in scenes}
    deficit = {c: per_class for c in classes}
    free = set(scenes)
    test_scenes = []
    chosen = []
    while any(deficit.values()):
        avail = {c: sum(scene_classes[s][c] for s in free) for c in classes if deficit[c] > 0}
        klass = min(avail, key=lambda c: (avail[c] - deficit[c], c))
        if avail[klass] < deficit[klass]:
            raise SplitError(
                f"class {klass}: only {avail[klass]} items left in unused scenes, need {deficit[klass]}", klass=klass
            )
        candidates = sorted(s for s in free if scene_classes[s][klass] > 0)
        scene = candidates[int(rng.integers(len(candidates)))]
        free.discard(scene)
        test_scenes.append(scene)
        group = sorted(scene_items[scene], key=lambda it: it.item_id)
        group = [group[i] for i in rng.permutation(len(group))]
        for it in group:
            c = it.numeric_gt
            if deficit.get(c, 0) > 0:
                chosen.append(it)
                deficit[c] -= 1
    chosen_ids = {it.item_id for it in chosen}
    test_items = [it for it in items if it.item_id in chosen_ids]
    taken = set(test_scenes)
    remaining = [it for it in items if it.scene_id not in taken]
    prov = dict(getattr(pool, "provenance", {}) or {})
    test = DatasetManifest(test_items, "test", {**prov, "per_class": per_class, "classes": classes})
    rest = DatasetManifest(remaining, "train", {**prov, "excluded_test_scenes": len(taken)})
    return test, rest


# -- serialisation -------------------------------------------------------------

def item_from_dict(d, path=None, line=None):
    if not isinstance(d, dict):
        raise ManifestError("expected a JSON object", path, line)
    for name, typ in _FIELDS.items():
        if name not in d:
            raise ManifestError(f"missing field {name!r}", path, line)
        v = d[name]
        if typ is int and (isinstance(v, bool) or not isinstance(v, int)):
            raise ManifestError(f"field {name!r} must be an integer", path, line)
        if not isinstance(v, typ):
            raise ManifestError(f"field {name!r} must be {typ.__name__}", path, line)
    extra = set(d) - set(_FIELDS)
    if extra:
        raise ManifestError(f"unknown field(s) {sorted(extra)}", path, line)
    if d["numeric_gt"] < 0:
        raise ManifestError("numeric_gt must be >= 0", path, line)
    if d["question_type"] not in QUESTION_TYPES:
        raise ManifestError(f"unknown question_type {d['question_type']!r}", path, line)
    return QAItem(
        item_id=d["item_id"],
        scene_id=d["scene_id"],
        image_ref=d["image_ref"],
        question_type=d["question_type"],
        question=d["question"],
        numeric_gt=d["numeric_gt"],
        short_gt=d["short_gt"],
        verbose_gt=d["verbose_gt"],
        filter=CountFilter.from_dict(d["filter"]),
    )


def meta_path(path):
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_manifest(manifest, path):
    """One QAItem per line (UTF-8 JSON) plus a ``.meta.json`` sidecar.

    I/O failures propagate as :class:`OSError`; schema problems on reading
    raise :class:`ManifestError` with the 1-based line number.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for it in manifest.items:
            fh.write(json.dumps(it.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    meta = {
        "split": manifest.split,
        "provenance": manifest.provenance,
        "count": len(manifest.items),
        "stats": {str(k): v for k, v in manifest.stats.items()},
    }
    meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path):
    path = Path(path)
    items = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", str(path), lineno) from None
            items.append(item_from_dict(d, str(path), lineno))
    split, provenance = "train", {}
    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text(encoding="utf-8"))
        split = meta.get("split", split)
        provenance = meta.get("provenance", {})
    shortfalls = {int(k): v for k, v in provenance.get("balance_shortfalls", {}).items()}
    try:
        return DatasetManifest(items, split, provenance, shortfalls)
    except ValueError as exc:
        raise ManifestError(str(exc), str(path)) from None


def stats(manifest):
    """Histogram of answers plus per-type and per-shape item counts."""
    items = manifest.items if isinstance(manifest, DatasetManifest) else list(manifest)
    return {
        "total": len(items),
        "histogram": dict(sorted(Counter(it.numeric_gt for it in items).items())),
        "per_type": {t: sum(1 for it in items if it.question_type == t) for t in QUESTION_TYPES},
        "per_shape": dict(sorted(Counter(it.filter.shape or "any" for it in items).items())),
    }


def format_stats(st):
    lines = [f"items: {st['total']}", "", f"{'gt':>4}  {'items':>7}"]
    for k, v in st["histogram"].items():
        lines.append(f"{k:>4}  {v:>7}")
    lines += ["", f"{'type':<12} {'items':>7}"]
    for k, v in st["per_type"].items():
        lines.append(f"{k:<12} {v:>7}")
    lines += ["", f"{'shape':<12} {'items':>7}"]
    for k, v in st["per_shape"].items():
        lines.append(f"{k:<12} {v:>7}")
    return "\n".join(lines)
