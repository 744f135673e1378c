"""Acceptance criteria 1-11.

Each test records one PASS/FAIL line; the lines are printed in the pytest
terminal summary (see conftest.py) and when the module is run directly.
"""
import hashlib
import json
import re
import time

import numpy as np
import pytest
from skimage.color import rgb2lab

from countscene.config import default_config, sample_scene_spec, toy_config
from countscene.contrast import delta_e, srgb_to_lab, validate_and_repair
from countscene.dataset import REFERENCE_PROFILE, BalanceProfile, DatasetManifest, balance, build_test_split
from countscene.errors import PlacementError
from countscene.evaluation import PredictionRecord, accuracy, confusion_matrix, extract_count, rmse
from countscene.pipeline import generate_scene, run_generate
from countscene.qagen import CountFilter, QAItem, generate_questions, render_ground_truths
from countscene.render.geometry import Box, Cone, Cylinder, Ray, Sphere, intersect_primitive
from countscene.render.pngio import read_png
from countscene.render.raytracer import RenderSettings, render, render_scene_all_views
from countscene.scenegen import build_scene, derive_metadata

RESULTS = []


def record(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# -- shared: >= 200 accepted toy scenes with QA items ---------------------------

@pytest.fixture(scope="module")
def toy_corpus():
    cfg = toy_config(seed=2024)
    scenes, items = [], []
    i = 0
    while len(scenes) < 200:
        oc = generate_scene(cfg, i)
        i += 1
        if oc.status != "accepted":
            continue
        md = derive_metadata(oc.scene)
        scenes.append(oc)
        for k in range(len(oc.scene.cameras)):
            rng = np.random.default_rng(i * 31 + k)
            items.extend((oc.scene, it) for it in generate_questions(md, oc.scene, f"{oc.scene_id}/view{k}.png", rng))
    return scenes, items


# -- 1 ---------------------------------------------------------------------------

def test_criterion_01_delta_e_golden():
    t0 = time.perf_counter()
    ok = delta_e((50, 3, 4), (50, 0, 0)) == 5.0
    rng = np.random.default_rng(0)
    labs = np.column_stack([rng.uniform(0, 100, 10_000), rng.uniform(-128, 127, (10_000, 2))])
    worst = 0.0
    for a, b, c in zip(labs, np.roll(labs, 1, axis=0), np.roll(labs, 2, axis=0)):
        ok &= delta_e(a, a) == 0.0
        ab, ba = delta_e(a, b), delta_e(b, a)
        ok &= ab >= 0 and abs(ab - ba) <= 1e-9
        slack = delta_e(a, b) + delta_e(b, c) - delta_e(a, c)
        worst = min(worst, slack)
    ok &= worst >= -1e-9
    dt = time.perf_counter() - t0
    ok &= dt < 1.0
    assert record(1, ok, f"dE((50,3,4),(50,0,0))=5, axioms on 10,000 triples, {dt:.2f} s")


# -- 2 ---------------------------------------------------------------------------

def test_criterion_02_colorimetry():
    w, k, r = srgb_to_lab((255, 255, 255)), srgb_to_lab((0, 0, 0)), srgb_to_lab((255, 0, 0))
    ref = rgb2lab(np.array([[[1.0, 0.0, 0.0]]]), illuminant="D65", observer="2")[0, 0]
    ok = abs(w.L - 100) <= 0.1 and abs(w.a) <= 0.1 and abs(w.b) <= 0.1
    ok &= max(abs(v) for v in k.as_tuple()) <= 0.1
    diff = max(abs(x - y) for x, y in zip(r.as_tuple(), ref))
    ok &= diff <= 0.5
    assert record(2, ok, f"white L={w.L:.3f}, black ~0, red vs reference max diff {diff:.4f}")


# -- 3 ---------------------------------------------------------------------------

def test_criterion_03_threshold_behavior(tmp_path):
    from dataclasses import replace

    from countscene.textures import TEXTURE_COLORS

    t0 = time.perf_counter()
    cfg = toy_config(seed=7)
    scene = None
    i = 0
    while scene is None:
        try:
            scene = build_scene(sample_scene_spec(cfg, i))
        except PlacementError:
            i += 1
    rgb = TEXTURE_COLORS["beige"]
    scene = replace(
        scene,
        objects=tuple(replace(o, color="beige", rgb=rgb) for o in scene.objects),
        floor_texture="solid:beige",
        wall_texture="solid:beige",
        table_color=("beige", rgb),
    )
    outputs = render_scene_all_views(scene, RenderSettings.from_image(cfg.image))
    _, _, report = validate_and_repair(scene, outputs, cfg)
    reassigned = report.retries_used

    runlog = run_generate(cfg, 20, tmp_path / "run")
    ok = reassigned >= 1 and len(runlog.accepted) == 20
    pairs = 0
    for sid in runlog.accepted:
        sdir = tmp_path / "run" / "scenes" / sid
        val = json.loads((sdir / "validation.json").read_text())
        seen = {(e["object_id"], e["camera_index"]) for e in val["entries"]}
        visible = set()
        for seg in sdir.glob("view*.seg.png"):
            k = int(re.match(r"view(\d+)", seg.name).group(1))
            visible |= {(int(v), k) for v in np.unique(read_png(seg)) if v}
        ok &= seen == visible
        ok &= all(e["delta_e"] >= 12.5 for e in val["entries"])
        pairs += len(val["entries"])
    dt = time.perf_counter() - t0
    ok &= dt < 300
    assert record(
        3, ok, f"camouflaged scene repaired after {reassigned} reassignment(s); 20 scenes, {pairs} visible pairs all dE>=12.5, {dt:.1f} s"
    )


# -- 4 ---------------------------------------------------------------------------

def test_criterion_04_ground_truth_soundness(toy_corpus):
    scenes, items = toy_corpus
    bad = 0
    adv = adv_ok = 0
    for scene, it in items:
        n = sum(1 for o in scene.objects if it.filter.matches(o))
        bad += n != it.numeric_gt
        if it.question_type == "adversarial":
            adv += 1
            near = any(o.shape == it.filter.shape for o in scene.objects) or any(
                o.color == it.filter.color for o in scene.objects
            )
            adv_ok += n == 0 and near
    ok = len(scenes) >= 200 and bad == 0 and adv > 0 and adv_ok == adv
    assert record(4, ok, f"{len(scenes)} scenes, {len(items)} items, {bad} recount mismatches, {adv_ok}/{adv} adversarial sound")


# -- 5 ---------------------------------------------------------------------------

def test_criterion_05_verbose_additivity(toy_corpus):
    _, items = toy_corpus
    comp = {("cone", "red", "on_table"): 2, ("cone", "red", "right_of_table"): 3, ("cone", "red", "front_of_table"): 1}
    from countscene.scenegen import SceneMetadata

    md = SceneMetadata({"cone": 6}, {"red": 6}, {"on_table": 2, "right_of_table": 3, "front_of_table": 1}, comp, 6)
    text = render_ground_truths(CountFilter(shape="cone"), md, "verbose")
    ok = text.endswith("In total there are 6 cones in the image!")
    ok &= re.findall(r"I can see (\d+) ", text) == ["2", "3", "1"]
    good = 0
    for _, it in items:
        zones = [int(x) for x in re.findall(r"I can see (\d+) ", it.verbose_gt)]
        total = int(re.search(r"In total there (?:is|are) (\d+) ", it.verbose_gt).group(1))
        good += sum(zones) == total
    ok &= good == len(items)
    assert record(5, ok, f"{good}/{len(items)} verbose answers additive; 2+3+1 example ends with the 6-cone total")


# -- 6 ---------------------------------------------------------------------------

def _brute_instances(scene, k, size):
    from countscene.render.raytracer import camera_rays, table_primitives

    cam = scene.cameras[k]
    prims = [(o.object_id, o) for o in scene.objects] + [(0, p) for p in table_primitives(scene.table)]
    out = np.zeros((size, size), np.uint16)
    for r in range(size):
        for c in range(size):
            pos, d = camera_rays(cam, size, size, np.array([float(r)]), np.array([float(c)]), 0.5, 0.5)
            ray = Ray(tuple(pos), tuple(d[0] / np.linalg.norm(d[0])))
            best, bid = np.inf, 0
            for oid, p in prims:
                h = intersect_primitive(ray, p)
                if h is not None and h.t < best:
                    best, bid = h.t, oid
            out[r, c] = bid
    return out


def test_criterion_06_segmentation_consistency(toy_corpus):
    scenes, _ = toy_corpus
    px = mismatched = 0
    for oc in scenes[:4]:
        for k in range(len(oc.scene.cameras)):
            got = render(oc.scene, k, RenderSettings(32, 32, 1)).instances
            exp = _brute_instances(oc.scene, k, 32)
            px += got.size
            mismatched += int((got != exp).sum())
    down = Ray((0.0, 0.0, -5.0), (0.0, 0.0, 1.0))
    side = Ray((-5.0, 0.0, 1.0), (1.0, 0.0, 0.0))
    cases = [
        (intersect_primitive(down, Sphere((0, 0, 0), 1)).t, 4.0),
        (intersect_primitive(down, Box((0, 0, 0), (1, 1, 1))).t, 4.0),
        (intersect_primitive(side, Cylinder((0, 0, 0), 1, 2)).t, 4.0),
        (intersect_primitive(side, Cone((0, 0, 0), 1, 2)).t, 4.5),
        (intersect_primitive(Ray((0.0, 0.0, 5.0), (0.0, 0.0, -1.0)), Cone((0, 0, 0), 1, 2)).t, 3.0),
    ]
    worst = max(abs(a - b) for a, b in cases)
    ok = mismatched == 0 and worst <= 1e-6
    assert record(6, ok, f"{px} pixels at 32x32, {mismatched} mismatches; analytic cases max error {worst:.1e}")


# -- 7 ---------------------------------------------------------------------------

def _item(i, gt, scene):
    return QAItem(f"{scene}:{i}", scene, f"{scene}/view0.png", "object", "How many?", gt, "", "", CountFilter())


def test_criterion_07_split_arithmetic():
    rng = np.random.default_rng(5)
    items = [_item(i, i % 16, f"s{int(rng.integers(300)):04d}") for i in range(16 * 60)]
    test, rest = build_test_split(DatasetManifest(items), range(16), 31, np.random.default_rng(0))
    disjoint = not {i.scene_id for i in test.items} & {i.scene_id for i in rest.items}
    ok = len(test) == 496 and test.stats == {c: 31 for c in range(16)} and disjoint
    assert record(7, ok, f"test split has {len(test)} items (31 x 16), scene-disjoint: {disjoint}")


# -- 8 ---------------------------------------------------------------------------

def test_criterion_08_balancing():
    supply = {c: REFERENCE_PROFILE[c] + 100 + 13 * c for c in range(16)}
    supply[15] = 300  # undersupplied
    items = [_item(f"{c}-{j}", c, f"s{j % 500}") for c in range(16) for j in range(supply[c])]
    out = balance(DatasetManifest(items), BalanceProfile.reference(), np.random.default_rng(1))
    ok = all(out.stats.get(c, 0) == min(supply[c], REFERENCE_PROFILE[c]) for c in range(16))
    ok &= out.stats[6] == 2277 and out.shortfalls == {15: REFERENCE_PROFILE[15] - 300}
    assert record(8, ok, f"class counts = min(supply, target) for 16 classes; class 6 -> {out.stats[6]}, shortfall {out.shortfalls}")


# -- 9 ---------------------------------------------------------------------------

def test_criterion_09_metrics(toy_corpus):
    _, pairs = toy_corpus
    m = DatasetManifest([_item(0, 3, "a"), _item(1, 7, "b")])
    r = rmse([PredictionRecord("a:0", "5", 5), PredictionRecord("b:1", "5", 5)], m)
    acc = accuracy([PredictionRecord("a:0", "3", 3), PredictionRecord("b:1", "7", 7)], m)
    rng = np.random.default_rng(3)
    gts = rng.integers(0, 20, 500)
    mm = DatasetManifest([_item(i, int(g), "s") for i, g in enumerate(gts)])
    preds = [PredictionRecord(f"s:{i}", "", None if rng.random() < 0.1 else int(rng.integers(0, 25))) for i in range(500)]
    cm = confusion_matrix(preds, mm, 15)
    rows_ok = all(sum(cm.counts[c]) == int((gts == c).sum()) for c in range(16))
    items = [it for _, it in pairs]
    short_ok = sum(extract_count(it.short_gt) == it.numeric_gt for it in items)
    verbose_ok = sum(extract_count(it.verbose_gt) == it.numeric_gt for it in items)
    ok = r == 2.0 and acc == 1.0 and cm.total == 500 and rows_ok
    ok &= short_ok == verbose_ok == len(items)
    assert record(
        9, ok, f"rmse={r}, accuracy={acc}, confusion mass {cm.total}/500; extraction short {short_ok}/{len(items)}, verbose {verbose_ok}/{len(items)}"
    )


# -- 10 --------------------------------------------------------------------------

def _pipeline(root, jobs):
    from countscene.cli import main

    gen = root / "gen"
    assert main(["generate", "--toy", "--seed", "99", "--scenes", "12", "--out", str(gen), "--jobs", str(jobs)]) == 0
    assert main(["qa", "--scenes", str(gen), "--out", str(root / "qa.jsonl"), "--seed", "1"]) == 0
    images = {
        str(p.relative_to(gen)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(gen.rglob("*.png"))
    }
    return (root / "qa.jsonl").read_bytes(), images


def test_criterion_10_determinism(tmp_path):
    a_manifest, a_images = _pipeline(tmp_path / "a", 1)
    b_manifest, b_images = _pipeline(tmp_path / "b", 8)
    ok = a_manifest == b_manifest and a_images == b_images and len(a_images) > 0
    assert record(10, ok, f"--jobs 1 vs --jobs 8: manifest bytes equal={a_manifest == b_manifest}, {len(a_images)} image hashes equal={a_images == b_images}")


# -- 11 --------------------------------------------------------------------------

def _first_scene(cfg):
    i = 0
    while True:
        try:
            return build_scene(sample_scene_spec(cfg, i))
        except PlacementError:
            i += 1


def test_criterion_11_performance():
    full = _first_scene(default_config())
    t0 = time.perf_counter()
    render(full, 0, RenderSettings(1024, 576, 16))
    t_full = time.perf_counter() - t0
    toy = _first_scene(toy_config())
    render(toy, 0, RenderSettings(128, 72, 1))  # warm-up
    t0 = time.perf_counter()
    render(toy, 0, RenderSettings(128, 72, 1))
    t_toy = time.perf_counter() - t0
    ok = t_full <= 60 and t_toy <= 0.5
    assert record(11, ok, f"1024x576 @16 spp: {t_full:.1f} s (<= 60), 128x72 @1 spp: {t_toy:.3f} s (<= 0.5), single thread")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
