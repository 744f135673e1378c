"""Scene generation pipeline: sample, build, render, validate, write.

Attempt ``i`` is a pure function of ``(config, i)``.  Accepted scenes are the
first ``N`` accepted attempt indices in index order, so the output is the same
for any number of worker processes.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import sample_scene_spec
from .contrast import validate_and_repair
from .errors import PlacementError, RenderIOError, SceneRejected
from .render.pngio import write_png
from .render.raytracer import RenderSettings, render_scene_all_views, visible_pixel_counts
from .scenegen import build_scene

log = logging.getLogger(__name__)


@dataclass
class SceneOutcome:
    index: int
    scene_id: str
    status: str  # "accepted" or "rejected"
    reason: str = ""
    retries: int = 0
    seconds: float = 0.0
    scene: object = None
    outputs: list = None
    report: object = None

    def log_entry(self):
        return {
            "index": self.index,
            "scene_id": self.scene_id,
            "status": self.status,
            "reason": self.reason,
            "retries": self.retries,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class RunLog:
    entries: list = field(default_factory=list)
    accepted: list = field(default_factory=list)  # scene ids
    output_paths: list = field(default_factory=list)
    seconds: float = 0.0
    completed: bool = True

    def to_dict(self):
        return {
            "attempted": len(self.entries),
            "accepted": len(self.accepted),
            "completed": self.completed,
            "seconds": round(self.seconds, 3),
            "scenes": self.entries,
            "outputs": self.output_paths,
        }


def visibility_problems(scene, outputs, validation):
    """Objects that fail the configured visibility policy."""
    ids = [o.object_id for o in scene.objects]
    counts = visible_pixel_counts(outputs, ids)
    need = validation.min_object_pixels
    bad = []
    for oid, per_view in counts.items():
        if validation.visibility == "every_view":
            if min(per_view) < need:
                bad.append(oid)
        elif sum(per_view) < need:
            bad.append(oid)
    return bad


def generate_scene(config, index, workers=1):
    """Run one attempt end to end; never raises for expected rejections."""
    t0 = time.perf_counter()
    spec = sample_scene_spec(config, index)
    outcome = SceneOutcome(index, spec.scene_id, "rejected")
    try:
        scene = build_scene(spec)
    except PlacementError as exc:
        outcome.reason = f"placement: {exc}"
        outcome.seconds = time.perf_counter() - t0
        return outcome
    settings = RenderSettings.from_image(config.image)

    def render_views(s):
        return render_scene_all_views(s, settings, workers=workers)

    outputs = render_views(scene)
    hidden = visibility_problems(scene, outputs, config.validation)
    if hidden:
        outcome.reason = f"visibility: objects {hidden} below {config.validation.min_object_pixels} px"
        outcome.seconds = time.perf_counter() - t0
        return outcome
    try:
        scene, outputs, report = validate_and_repair(scene, outputs, config, render_views)
    except SceneRejected as exc:
        outcome.reason = f"contrast: {exc}"
        outcome.retries = exc.report.retries_used if exc.report else 0
        outcome.report = exc.report
        outcome.seconds = time.perf_counter() - t0
        return outcome
    outcome.status = "accepted"
    outcome.scene = scene
    outcome.outputs = outputs
    outcome.report = report
    outcome.retries = report.retries_used
    outcome.seconds = time.perf_counter() - t0
    return outcome


def write_scene(outcome, out_dir):
    """Write ``scenes/<scene_id>/`` files; returns the paths written."""
    sdir = Path(out_dir) / "scenes" / outcome.scene_id
    try:
        sdir.mkdir(parents=True, exist_ok=True)
        paths = []
        for out in outcome.outputs:
            paths.extend(write_png(out, sdir / f"view{out.camera_index}.png"))
        (sdir / "scene.json").write_text(outcome.scene.to_json() + "\n", encoding="utf-8")
        (sdir / "validation.json").write_text(
            json.dumps(outcome.report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise RenderIOError(sdir, exc) from exc
    return [str(p) for p in paths] + [str(sdir / "scene.json"), str(sdir / "validation.json")]


def _attempt(args):
    config, index = args
    return generate_scene(config, index)


def run_generate(config, n_scenes, out_dir, jobs=1, max_attempts=None, start_index=0):
    """Generate ``n_scenes`` accepted scenes under ``out_dir``.

    Rejected attempts are replaced by fresh samples until enough scenes are
    accepted or ``max_attempts`` (default ``10 * n_scenes + 10``) is used up.
    """
    t0 = time.perf_counter()
    runlog = RunLog()
    if max_attempts is None:
        max_attempts = 10 * n_scenes + 10
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(config.to_json() + "\n", encoding="utf-8")
    if n_scenes == 0:
        runlog.seconds = time.perf_counter() - t0
        return runlog

    next_index = start_index
    end_index = start_index + max_attempts
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while len(runlog.accepted) < n_scenes and next_index < end_index:
            need = n_scenes - len(runlog.accepted)
            batch = max(need, jobs) if pool else 1
            indices = list(range(next_index, min(next_index + batch, end_index)))
            next_index = indices[-1] + 1
            args = [(config, i) for i in indices]
            results = list(pool.map(_attempt, args)) if pool else [_attempt(a) for a in args]
            for outcome in results:  # index order
                if len(runlog.accepted) >= n_scenes:
                    break
                runlog.entries.append(outcome.log_entry())
                if outcome.status == "accepted":
                    runlog.output_paths.extend(write_scene(outcome, out_dir))
                    runlog.accepted.append(outcome.scene_id)
                    log.info("accepted %s (retries %d)", outcome.scene_id, outcome.retries)
                else:
                    log.info("rejected %s: %s", outcome.scene_id, outcome.reason)
    finally:
        if pool:
            pool.shutdown()
    runlog.completed = len(runlog.accepted) >= n_scenes
    runlog.seconds = time.perf_counter() - t0
    (out_dir / "run_log.json").write_text(json.dumps(runlog.to_dict(), indent=2) + "\n", encoding="utf-8")
    return runlog
