"""Command-line entry point: ``countscene <command> [options]``.

Commands run the pipeline stage by stage::

    generate  scenes, renders, segmentation maps and validation reports
    qa        question/answer manifest for a generated scene directory
    balance   subsample a manifest toward a per-class target profile
    split     scene-disjoint test split with a fixed count per class
    stats     answer histogram and per-type / per-shape counts
    eval      score a predictions file against a manifest
    config    print the effective configuration

Exit codes: 0 ok, 2 usage, 3 config error, 4 generation failure,
5 I/O error, 6 manifest/predictions schema error, 7 split error.
Set ``COUNTSCENE_LOG`` (DEBUG, INFO, WARNING, ...) for log verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import TOY_OVERRIDES, apply_overrides, build_config, parse_document
from .errors import ConfigError, ManifestError, PlacementError, RenderIOError, SplitError
from .seeding import derive_seed

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_GENERATION = 4
EXIT_IO = 5
EXIT_SCHEMA = 6
EXIT_SPLIT = 7

log = logging.getLogger("countscene")


class CliError(Exception):
    def __init__(self, message, code):
        self.code = code
        super().__init__(message)


def _setup_logging():
    level = os.environ.get("COUNTSCENE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load_config(path, toy, seed):
    doc = {}
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}", EXIT_IO) from None
        doc = parse_document(text)
    if toy:
        doc = apply_overrides(doc, TOY_OVERRIDES)
    if seed is not None:
        doc = apply_overrides(doc, {"seed": seed})
    return build_config(doc)


def _classes(text):
    """``"0-15"`` or ``"0,1,2"`` to a list of ints."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _emit(obj, as_json, text):
    if as_json:
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        print(text)


# -- commands ------------------------------------------------------------------

def cmd_generate(args):
    from .pipeline import run_generate

    config = _load_config(args.config, args.toy, args.seed)
    out = Path(args.out)
    try:
        runlog = run_generate(config, args.scenes, out, jobs=args.jobs, max_attempts=args.max_attempts)
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc}", EXIT_IO) from None
    summary = {"accepted": len(runlog.accepted), "attempted": len(runlog.entries), "out": str(out)}
    _emit(summary, args.json, f"accepted {summary['accepted']} of {summary['attempted']} attempts -> {out}")
    if not runlog.completed:
        raise CliError(f"attempt cap reached with {len(runlog.accepted)} of {args.scenes} scenes accepted", EXIT_GENERATION)


def _scene_dirs(root):
    root = Path(root)
    base = root / "scenes" if (root / "scenes").is_dir() else root
    if not base.is_dir():
        raise CliError(f"scene directory not found: {root}", EXIT_IO)
    return root, sorted(p for p in base.iterdir() if p.is_dir())


def cmd_qa(args):
    from .dataset import assemble, write_manifest
    from .qagen import generate_questions
    from .scenegen import SceneGraph, derive_metadata

    root, dirs = _scene_dirs(args.scenes)
    out = Path(args.out)
    provenance = {"seed": args.seed, "tool_version": __version__}
    cfg_path = root / "config.json"
    if cfg_path.exists():
        try:
            provenance["config_hash"] = build_config(parse_document(cfg_path.read_text(encoding="utf-8"))).config_hash()
        except ConfigError as exc:
            raise CliError(f"{cfg_path}: {exc}", EXIT_CONFIG) from None
    items, skips = [], []
    for sdir in dirs:
        spath = sdir / "scene.json"
        if not spath.exists():
            raise CliError(f"scene {sdir.name}: missing {spath}", EXIT_IO)
        try:
            scene = SceneGraph.from_json(spath.read_text(encoding="utf-8"))
        except (ValueError, KeyError, TypeError, IndexError) as exc:
            raise CliError(f"scene {sdir.name}: corrupted {spath}: {exc!r}", EXIT_SCHEMA) from None
        metadata = derive_metadata(scene)
        for k in range(len(scene.cameras)):
            image = sdir / f"view{k}.png"
            if not image.exists():
                raise CliError(f"scene {sdir.name}: missing {image}", EXIT_IO)
            ref = Path(os.path.relpath(image.resolve(), out.resolve().parent)).as_posix()
            rng = np.random.default_rng(derive_seed(args.seed, scene.scene_id, k, "qa"))
            items.extend(generate_questions(metadata, scene, ref, rng, skip_log=skips))
    rng = np.random.default_rng(derive_seed(args.seed, "assemble"))
    manifest = assemble(items, args.budget, rng, args.adversarial_prob, provenance)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out)
    skip_path = Path(args.skip_log) if args.skip_log else out.with_name(out.name + ".skips.log")
    skip_path.write_text("".join(line + "\n" for line in skips), encoding="utf-8")
    summary = {"items": len(manifest), "images": len({it.image_ref for it in manifest.items}), "skipped": len(skips)}
    _emit(summary, args.json, f"{summary['items']} items over {summary['images']} images ({summary['skipped']} skipped types) -> {out}")


def _read_profile(path):
    from .dataset import BalanceProfile

    if not path:
        return BalanceProfile.reference()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return BalanceProfile({int(k): int(v) for k, v in doc.items()})
    except OSError as exc:
        raise CliError(f"cannot read profile {path}: {exc}", EXIT_IO) from None
    except (ValueError, AttributeError) as exc:
        raise CliError(f"bad profile {path}: {exc}", EXIT_SCHEMA) from None


def cmd_balance(args):
    from .dataset import balance, read_manifest, write_manifest

    manifest = read_manifest(args.manifest)
    profile = _read_profile(args.profile)
    rng = np.random.default_rng(derive_seed(args.seed, "balance"))
    out = balance(manifest, profile, rng)
    out.provenance["balance_seed"] = args.seed
    write_manifest(out, args.out)
    summary = {"items": len(out), "shortfalls": {str(k): v for k, v in out.shortfalls.items()}}
    text = f"{len(out)} items -> {args.out}"
    if out.shortfalls:
        text += "\nshortfalls: " + ", ".join(f"{k}: {v}" for k, v in out.shortfalls.items())
    _emit(summary, args.json, text)


def cmd_split(args):
    from .dataset import build_test_split, read_manifest, write_manifest

    pool = read_manifest(args.manifest)
    rng = np.random.default_rng(derive_seed(args.seed, "split"))
    test, rest = build_test_split(pool, _classes(args.classes), args.per_class, rng)
    test.provenance["split_seed"] = args.seed
    write_manifest(test, args.test_out)
    if args.train_out:
        write_manifest(rest, args.train_out)
    summary = {"test_items": len(test), "remaining_items": len(rest)}
    _emit(summary, args.json, f"test: {len(test)} items -> {args.test_out}; remaining pool: {len(rest)} items")


def cmd_stats(args):
    from .dataset import format_stats, read_manifest, stats

    st = stats(read_manifest(args.manifest))
    _emit({**st, "histogram": {str(k): v for k, v in st["histogram"].items()}}, args.json, format_stats(st))


def cmd_eval(args):
    from .dataset import read_manifest
    from .evaluation import evaluate, read_predictions

    manifest = read_manifest(args.manifest)
    preds = read_predictions(args.preds)
    try:
        report = evaluate(preds, manifest, args.max_class)
    except KeyError as exc:
        raise CliError(f"{args.preds}: {exc.args[0]}", EXIT_SCHEMA) from None
    _emit(report.to_dict(), args.json, report.to_text())


def cmd_config(args):
    config = _load_config(args.config, args.toy, args.seed)
    print(config.to_json())


# -- parser --------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="countscene", description="Synthetic object-counting VQA toolchain.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        return sp

    g = add("generate", cmd_generate, "generate and render scenes")
    g.add_argument("--config", help="JSON config (defaults are used for missing keys)")
    g.add_argument("--scenes", type=int, required=True, help="number of accepted scenes")
    g.add_argument("--out", required=True)
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--toy", action="store_true", help="128x72, 1 spp, 2 cameras")
    g.add_argument("--seed", type=int, help="override the config seed")
    g.add_argument("--max-attempts", type=int, help="attempt cap (default 10*N+10)")
    g.add_argument("--json", action="store_true")

    q = add("qa", cmd_qa, "build a question manifest from generated scenes")
    q.add_argument("--scenes", required=True, help="generate output directory")
    q.add_argument("--out", required=True, help="manifest path (.jsonl)")
    q.add_argument("--budget", type=int, default=4, help="max items per image")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--adversarial-prob", type=float, default=0.5)
    q.add_argument("--skip-log", help="default: <out>.skips.log")
    q.add_argument("--json", action="store_true")

    b = add("balance", cmd_balance, "subsample toward a per-class profile")
    b.add_argument("--manifest", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--profile", help='JSON {"class": target}; default is the reference profile')
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--json", action="store_true")

    s = add("split", cmd_split, "scene-disjoint test split")
    s.add_argument("--manifest", required=True, help="pool manifest")
    s.add_argument("--test-out", required=True)
    s.add_argument("--train-out", help="where to write the remaining pool")
    s.add_argument("--per-class", type=int, default=31)
    s.add_argument("--classes", default="0-15", help='e.g. "0-15" or "0,1,2"')
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json", action="store_true")

    st = add("stats", cmd_stats, "manifest statistics")
    st.add_argument("manifest")
    st.add_argument("--json", action="store_true")

    e = add("eval", cmd_eval, "score predictions")
    e.add_argument("--manifest", required=True)
    e.add_argument("--preds", required=True, help='JSONL of {"item_id", "raw_answer"}')
    e.add_argument("--max-class", type=int, default=15)
    e.add_argument("--json", action="store_true")

    c = add("config", cmd_config, "print the effective config")
    c.add_argument("--config")
    c.add_argument("--toy", action="store_true")
    c.add_argument("--seed", type=int)
    return p


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ManifestError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SplitError as exc:
        print(f"split error: {exc}", file=sys.stderr)
        return EXIT_SPLIT
    except PlacementError as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (RenderIOError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
