import json
import shutil
import subprocess
import sys

import pytest

from countscene.cli import EXIT_CONFIG, EXIT_GENERATION, EXIT_IO, EXIT_SCHEMA, EXIT_SPLIT, main
from countscene.config import TOY_OVERRIDES, apply_overrides
from countscene.dataset import read_manifest
from countscene.qagen import QUESTION_TYPES


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen") / "run"
    assert main(["generate", "--toy", "--scenes", "3", "--out", str(out)]) == 0
    return out


def test_generate_layout(generated):
    scenes = sorted((generated / "scenes").iterdir())
    assert len(scenes) == 3
    for s in scenes:
        names = sorted(p.name for p in s.iterdir())
        assert names == ["scene.json", "validation.json", "view0.png", "view0.seg.png", "view1.png", "view1.seg.png"]
        val = json.loads((s / "validation.json").read_text())
        assert val["overall_pass"]
    log = json.loads((generated / "run_log.json").read_text())
    assert log["accepted"] == 3 and log["completed"]
    assert len(log["scenes"]) == log["attempted"]
    assert (generated / "config.json").exists()


def test_generate_five_views_at_toy_resolution(tmp_path):
    cfg = tmp_path / "c.json"
    doc = apply_overrides(TOY_OVERRIDES, {"image": {"cameras_per_scene": 5}})
    cfg.write_text(json.dumps(doc))
    assert main(["generate", "--config", str(cfg), "--scenes", "2", "--out", str(tmp_path / "o")]) == 0
    scenes = sorted((tmp_path / "o" / "scenes").iterdir())
    assert len(scenes) == 2
    for s in scenes:
        assert len(list(s.glob("view?.png"))) == 5


def test_generate_zero_scenes(tmp_path):
    assert main(["generate", "--toy", "--scenes", "0", "--out", str(tmp_path / "z")]) == 0
    assert not (tmp_path / "z" / "scenes").exists()


def test_generate_unwritable_out(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["generate", "--toy", "--scenes", "1", "--out", str(blocker / "sub")]) == EXIT_IO


def test_generate_attempt_cap(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(apply_overrides(TOY_OVERRIDES, {"validation": {"min_object_pixels": 10**6}})))
    code = main(["generate", "--config", str(cfg), "--scenes", "1", "--out", str(tmp_path / "o"), "--max-attempts", "2"])
    assert code == EXIT_GENERATION
    log = json.loads((tmp_path / "o" / "run_log.json").read_text())
    assert log["attempted"] == 2 and not log["completed"]


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"image": {"width": 3}}')
    assert main(["generate", "--config", str(bad), "--scenes", "1", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "image.width" in capsys.readouterr().err
    assert main(["config", "--toy"]) == 0
    assert json.loads(capsys.readouterr().out)["image"]["width"] == 128


def test_qa_budget_and_types(generated, tmp_path):
    m4 = tmp_path / "m4.jsonl"
    assert main(["qa", "--scenes", str(generated), "--out", str(m4), "--budget", "4"]) == 0
    man = read_manifest(m4)
    assert 0 < len(man) <= 3 * 2 * 4
    for it in man.items:
        assert (m4.parent / it.image_ref).exists()
    m6 = tmp_path / "m6.jsonl"
    assert main(["qa", "--scenes", str(generated), "--out", str(m6), "--budget", "6"]) == 0
    man6 = read_manifest(m6)
    skipped = (tmp_path / "m6.jsonl.skips.log").read_text().splitlines()
    assert len(man6) + len(skipped) == 3 * 2 * len(QUESTION_TYPES)
    assert json.loads((tmp_path / "m6.jsonl.meta.json").read_text())["provenance"]["config_hash"]


def test_qa_bad_scene_files(generated, tmp_path):
    broken = tmp_path / "broken"
    shutil.copytree(generated, broken)
    victim = sorted((broken / "scenes").iterdir())[1]
    (victim / "scene.json").write_text("{ nope")
    assert main(["qa", "--scenes", str(broken), "--out", str(tmp_path / "m.jsonl")]) == EXIT_SCHEMA
    (victim / "scene.json").unlink()
    assert main(["qa", "--scenes", str(broken), "--out", str(tmp_path / "m.jsonl")]) == EXIT_IO


def test_stats_eval_split_balance(generated, tmp_path, capsys):
    m = tmp_path / "m.jsonl"
    assert main(["qa", "--scenes", str(generated), "--out", str(m), "--budget", "6"]) == 0
    capsys.readouterr()

    assert main(["stats", str(m), "--json"]) == 0
    st = json.loads(capsys.readouterr().out)
    assert sum(st["per_type"].values()) == st["total"]

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["stats", str(empty)]) == 0
    assert "items: 0" in capsys.readouterr().out

    preds = tmp_path / "p.jsonl"
    lines = [json.dumps({"item_id": it.item_id, "raw_answer": it.short_gt}) for it in read_manifest(m).items]
    preds.write_text("\n".join(lines) + "\n")
    assert main(["eval", "--manifest", str(m), "--preds", str(preds), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["accuracy"] == 1.0

    preds.write_text('{"item_id": "nope", "raw_answer": "3"}\n')
    assert main(["eval", "--manifest", str(m), "--preds", str(preds)]) == EXIT_SCHEMA

    assert main(["split", "--manifest", str(m), "--test-out", str(tmp_path / "t.jsonl"), "--per-class", "31"]) == EXIT_SPLIT
    assert main(["split", "--manifest", str(m), "--test-out", str(tmp_path / "t.jsonl"),
                 "--train-out", str(tmp_path / "r.jsonl"), "--per-class", "1", "--classes", "0,1"]) == 0
    test, rest = read_manifest(tmp_path / "t.jsonl"), read_manifest(tmp_path / "r.jsonl")
    assert len(test) == 2
    assert not {i.scene_id for i in test.items} & {i.scene_id for i in rest.items}

    profile = tmp_path / "prof.json"
    profile.write_text(json.dumps({"0": 1, "1": 1}))
    assert main(["balance", "--manifest", str(m), "--out", str(tmp_path / "b.jsonl"), "--profile", str(profile)]) == 0
    assert len(read_manifest(tmp_path / "b.jsonl")) <= 2


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "countscene.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "countscene" in res.stdout
    res = subprocess.run([sys.executable, "-m", "countscene.cli", "frobnicate"], capture_output=True, text=True)
    assert res.returncode == 2
