import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from countscene.dataset import DatasetManifest
from countscene.errors import ManifestError
from countscene.evaluation import (
    PredictionRecord,
    accuracy,
    confusion_matrix,
    evaluate,
    extract_count,
    read_predictions,
    relative_error,
    rmse,
)
from countscene.qagen import CountFilter, QAItem

TABLE2_VERBOSE = (
    "Let's analyze the scene! On top of the table, I can see 2 cones. "
    "On the ground to the right of the table, I can see 3 cones. "
    "On the ground in front of the table, I can see 1 cone. "
    "In total there are 6 cones in the image!"
)


def manifest(gts):
    return DatasetManifest([
        QAItem(f"i{k}", "s", "v.png", "object", "How many?", g, "", "", CountFilter()) for k, g in enumerate(gts)
    ])


def preds(values):
    return [PredictionRecord(f"i{k}", "" if v is None else str(v), v) for k, v in enumerate(values)]


@pytest.mark.parametrize(
    "text, expect",
    [
        ("There are 6 cones in the image.", 6),
        (TABLE2_VERBOSE, 6),
        ("I cannot tell.", None),
        ("", None),
        ("There are seven spheres.", 7),
        ("Twelve, or maybe 3.", 3),
        ("About 2.5 cubes", None),
        ("in total there is 1 cube, wait, 4", 1),
        ("The answer is 10", 10),
        ("abc12 then nothing", None),
        ("zero", 0),
    ],
)
def test_extract_count(text, expect):
    assert extract_count(text) == expect


def test_metric_golden_values():
    m = manifest([3, 7])
    assert rmse(preds([5, 5]), m) == 2.0
    assert accuracy(preds([3, 7]), m) == 1.0
    assert accuracy(preds([4, 8]), m) == 0.0
    assert accuracy(preds([3, 7, 1, 1]), manifest([3, 7, 2, 2])) == 0.5
    assert rmse(preds([3, 7]), m) == 0.0
    assert rmse(preds([6]), manifest([3])) == 3.0
    assert relative_error(preds([5]), manifest([4])) == (0.25, 0)


def test_relative_error_all_zero():
    val, excluded = relative_error(preds([1, 0, 2]), manifest([0, 0, 0]))
    assert math.isnan(val) and excluded == 3


def test_unparsed_handling():
    m = manifest([2, 3, 4])
    p = preds([2, None, 5])
    assert accuracy(p, m) == pytest.approx(1 / 3)
    assert rmse(p, m) == pytest.approx(math.sqrt(0.5))
    rep = evaluate(p, m)
    assert rep.unparsed_count == 1


def test_unknown_item_rejected():
    with pytest.raises(KeyError):
        accuracy([PredictionRecord("zzz", "1", 1)], manifest([1]))


def test_confusion_shapes():
    m = manifest([0, 1, 2, 20])
    perfect = confusion_matrix(preds([0, 1, 2, 20]), m, max_class=3)
    assert perfect.counts[0][0] == perfect.counts[1][1] == perfect.counts[2][2] == 1
    assert perfect.counts[4][4] == 1  # overflow row and column
    none = confusion_matrix(preds([None] * 4), m, max_class=3)
    assert [row[-1] for row in none.counts] == [1, 1, 1, 0, 1]
    assert none.total == 4
    text = perfect.to_text()
    assert "unparsed" in text and ">3" in text
    assert perfect.to_dict()["columns"][-1] == "unparsed"


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 100))
def test_confusion_conservation_and_bounds(seed, n):
    rng = np.random.default_rng(seed)
    gts = rng.integers(0, 18, n).tolist()
    vals = [None if rng.random() < 0.1 else int(v) for v in rng.integers(0, 20, n)]
    m, p = manifest(gts), preds(vals)
    cm = confusion_matrix(p, m, 15)
    assert cm.total == n
    for c in range(16):
        assert sum(cm.counts[c]) == gts.count(c)
    assert sum(cm.counts[16]) == sum(g > 15 for g in gts)
    acc = accuracy(p, m)
    assert 0 <= acc <= 1
    r = rmse(p, m)
    assert math.isnan(r) or r >= 0
    rel, _ = relative_error(p, m)
    assert math.isnan(rel) or rel >= 0
    rep = evaluate(p, m)
    assert rep.accuracy == acc and rep.confusion.total == n


def test_report_serialises(tmp_path):
    rep = evaluate(preds([1, 2]), manifest([1, 3]))
    d = rep.to_dict()
    assert d["accuracy"] == 0.5 and d["per_class_accuracy"] == {"1": 1.0, "3": 0.0}
    assert "accuracy:" in rep.to_text()


def test_read_predictions(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text('{"item_id": "a", "raw_answer": "There are 4 cubes."}\n\n{"item_id": "b", "raw_answer": "no idea"}\n')
    recs = read_predictions(path)
    assert [(r.item_id, r.extracted) for r in recs] == [("a", 4), ("b", None)]
    path.write_text('{"item_id": "a"}\n')
    with pytest.raises(ManifestError) as exc:
        read_predictions(path)
    assert exc.value.line == 1
