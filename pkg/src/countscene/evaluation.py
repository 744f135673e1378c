"""Scoring counting answers: number extraction, accuracy, RMSE, relative error, confusion."""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError

_TOTAL = re.compile(r"in\s+total\s+there\s+(?:are|is)\s+(\d+)", re.IGNORECASE)
_INT = re.compile(r"(?<![\w.])\d+(?!\w|\.\d)")
_WORDS = (
    "zero one two three four five six seven eight nine ten eleven twelve thirteen "
    "fourteen fifteen sixteen seventeen eighteen nineteen twenty"
).split()
_WORD = re.compile(r"\b(" + "|".join(_WORDS) + r")\b", re.IGNORECASE)
_WORD_VALUE = {w: i for i, w in enumerate(_WORDS)}


def extract_count(raw_answer):
    """Integer answer in free text, or ``None``.

    Precedence: the last "In total there are N", then the last standalone
    integer, then the last number word from zero to twenty.
    """
    if not raw_answer:
        return None
    m = _TOTAL.findall(raw_answer)
    if m:
        return int(m[-1])
    m = _INT.findall(raw_answer)
    if m:
        return int(m[-1])
    m = _WORD.findall(raw_answer)
    if m:
        return _WORD_VALUE[m[-1].lower()]
    return None


@dataclass(frozen=True)
class PredictionRecord:
    item_id: str
    raw_answer: str
    extracted: int = None

    @classmethod
    def from_answer(cls, item_id, raw_answer):
        return cls(item_id, raw_answer, extract_count(raw_answer))


def _gts(manifest):
    items = manifest.items if hasattr(manifest, "items") else manifest
    return {it.item_id: it.numeric_gt for it in items}


def _pairs(preds, manifest):
    gts = _gts(manifest)
    out = []
    for p in preds:
        if p.item_id not in gts:
            raise KeyError(f"prediction for unknown item {p.item_id!r}")
        out.append((p.extracted, gts[p.item_id]))
    return out


def accuracy(preds, manifest):
    pairs = _pairs(preds, manifest)
    if not pairs:
        return float("nan")
    return sum(1 for p, g in pairs if p is not None and p == g) / len(pairs)


def rmse(preds, manifest):
    """Root mean squared error over parsed predictions (NaN if none parsed)."""
    errs = [(p - g) ** 2 for p, g in _pairs(preds, manifest) if p is not None]
    return math.sqrt(sum(errs) / len(errs)) if errs else float("nan")


def relative_error(preds, manifest):
    """Mean |pred - gt| / gt over parsed items with gt > 0.

    Returns ``(value, excluded_zero_gt)``; ``value`` is NaN when nothing qualifies.
    """
    pairs = _pairs(preds, manifest)
    vals = [abs(p - g) / g for p, g in pairs if p is not None and g > 0]
    excluded = sum(1 for _, g in pairs if g == 0)
    return (sum(vals) / len(vals) if vals else float("nan")), excluded


@dataclass
class ConfusionMatrix:
    """Rows: gt 0..max_class plus one overflow row for larger gts.

    Columns: predicted 0..max_class, then ``>max`` and ``unparsed``.
    """

    max_class: int
    counts: list

    @property
    def row_labels(self):
        return [str(i) for i in range(self.max_class + 1)] + [f">{self.max_class}"]

    @property
    def col_labels(self):
        return [str(i) for i in range(self.max_class + 1)] + [f">{self.max_class}", "unparsed"]

    @property
    def total(self):
        return sum(map(sum, self.counts))

    def to_dict(self):
        return {"max_class": self.max_class, "rows": self.row_labels, "columns": self.col_labels, "counts": self.counts}

    def to_text(self):
        width = max(4, *(len(str(v)) for row in self.counts for v in row), *(len(c) for c in self.col_labels))
        head = "gt\\pred".ljust(8) + " ".join(c.rjust(width) for c in self.col_labels)
        lines = [head]
        for label, row in zip(self.row_labels, self.counts):
            lines.append(label.ljust(8) + " ".join(str(v).rjust(width) for v in row))
        return "\n".join(lines)


def confusion_matrix(preds, manifest, max_class=15):
    n = max_class + 1
    counts = [[0] * (n + 2) for _ in range(n + 1)]
    for p, g in _pairs(preds, manifest):
        row = min(g, n)
        col = n + 1 if p is None else min(p, n)
        counts[row][col] += 1
    return ConfusionMatrix(max_class, counts)


def _clean(x):
    return None if isinstance(x, float) and math.isnan(x) else x


@dataclass
class EvalReport:
    n: int
    accuracy: float
    rmse: float
    mean_relative_error: float
    relative_error_excluded: int
    per_class_accuracy: dict
    confusion: ConfusionMatrix
    unparsed_count: int
    per_type_accuracy: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n": self.n,
            "accuracy": _clean(self.accuracy),
            "rmse": _clean(self.rmse),
            "mean_relative_error": _clean(self.mean_relative_error),
            "relative_error_excluded_gt0": self.relative_error_excluded,
            "unparsed_count": self.unparsed_count,
            "per_class_accuracy": {str(k): v for k, v in self.per_class_accuracy.items()},
            "per_type_accuracy": self.per_type_accuracy,
            "confusion": self.confusion.to_dict(),
        }

    def to_text(self):
        def num(x):
            return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.4f}"

        lines = [
            f"items:            {self.n}",
            f"accuracy:         {num(self.accuracy)}",
            f"rmse:             {num(self.rmse)}  (unparsed excluded: {self.unparsed_count})",
            f"relative error:   {num(self.mean_relative_error)}  (gt=0 excluded: {self.relative_error_excluded})",
            "",
            "per-class accuracy:",
        ]
        lines += [f"  {k:>3}: {num(v)}" for k, v in self.per_class_accuracy.items()]
        if self.per_type_accuracy:
            lines += ["", "per-type accuracy:"]
            lines += [f"  {k:<12} {num(v)}" for k, v in self.per_type_accuracy.items()]
        lines += ["", "confusion matrix:", self.confusion.to_text()]
        return "\n".join(lines)


def evaluate(preds, manifest, max_class=15):
    preds = list(preds)
    items = manifest.items if hasattr(manifest, "items") else list(manifest)
    by_id = {it.item_id: it for it in items}
    pairs = _pairs(preds, manifest)
    per_class = {}
    for klass in sorted({g for _, g in pairs}):
        sub = [(p, g) for p, g in pairs if g == klass]
        per_class[klass] = sum(1 for p, g in sub if p == g) / len(sub)
    per_type = {}
    types = Counter(by_id[p.item_id].question_type for p in preds)
    for t in sorted(types):
        hits = sum(1 for p in preds if by_id[p.item_id].question_type == t and p.extracted == by_id[p.item_id].numeric_gt)
        per_type[t] = hits / types[t]
    rel, excluded = relative_error(preds, manifest)
    return EvalReport(
        n=len(preds),
        accuracy=accuracy(preds, manifest),
        rmse=rmse(preds, manifest),
        mean_relative_error=rel,
        relative_error_excluded=excluded,
        per_class_accuracy=per_class,
        confusion=confusion_matrix(preds, manifest, max_class),
        unparsed_count=sum(1 for p in preds if p.extracted is None),
        per_type_accuracy=per_type,
    )


def read_predictions(path):
    """Line-delimited JSON ``{"item_id": ..., "raw_answer": ...}``."""
    path = Path(path)
    out = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON: {exc.msg}", str(path), lineno) from None
        if not isinstance(d, dict) or not isinstance(d.get("item_id"), str):
            raise ManifestError("missing string field 'item_id'", str(path), lineno)
        raw = d.get("raw_answer")
        if not isinstance(raw, str):
            raise ManifestError("missing string field 'raw_answer'", str(path), lineno)
        out.append(PredictionRecord.from_answer(d["item_id"], raw))
    return out
