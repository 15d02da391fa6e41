"""Command-line front end.

Subcommands: synth, train, prescreen, prefilter, evaluate, pipeline.
Exit codes: 0 ok, 2 usage/config, 3 I/O, 4 data.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import report
from .bayes import (
    ClassLabel,
    ModelFormatError,
    TrainingError,
    TrainingSet,
    load_model,
    predict_many,
    save_model,
    train,
)
from .config import ConfigError, RunConfig, load_config
from .evaluation import confusion, metrics, tally
from .features import extract_features, split_subimages
from .image import green_plane
from .manifest import DatasetManifest, ManifestError, ManifestRow, read_manifest
from .netpbm import NetpbmError, load_image, save_pgm
from .prefilter import AnatomyMasks, prefilter_image
from .preprocess import PRESCREEN_SIZE, prescreen_preprocess
from .selection import backward_elimination
from .synth import LesionKind, generate_corpus

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- image I/O


def _load_rgb(path: Path) -> np.ndarray:
    img = load_image(path)
    return np.repeat(img[..., None], 3, axis=2) if img.ndim == 2 else img


def _load_mask(path: Path | None, shape) -> np.ndarray | None:
    if path is None:
        return None
    m = load_image(path)
    if m.ndim == 3:
        m = m.max(axis=2)
    if m.shape != tuple(shape):
        raise ValueError(f"mask {path} has shape {m.shape}, image is {tuple(shape)}")
    return m > 0


# ------------------------------------------------------------ per-image work
# Top-level functions so they can run in worker processes.


def _features_job(args) -> tuple[str, object]:
    path, cfg = args
    try:
        rgb = _load_rgb(path)
    except (OSError, NetpbmError) as exc:
        return "error", str(exc)
    pre = prescreen_preprocess(rgb, cfg.ahe_params, cfg.fov_threshold, PRESCREEN_SIZE)
    return "ok", extract_features(pre, cfg.feature_spec)


def _prefilter_job(args) -> tuple[str, object]:
    row, base, cfg, crops_dir = args
    try:
        rgb = _load_rgb(base / row.image)
        shape = rgb.shape[:2]
        resolve = lambda rel: base / rel if rel else None  # noqa: E731
        fov = _load_mask(resolve(row.fov), shape)
        anat = AnatomyMasks(*(_load_mask(resolve(getattr(row, k)), shape) for k in ("vessels", "optic_disc", "macula")))
    except (OSError, NetpbmError) as exc:
        return "error", str(exc)
    res = prefilter_image(rgb, anat, cfg.prefilter_preprocess_params, cfg.prefilter_params, cfg.fov_threshold, fov)
    if crops_dir is not None:
        green = green_plane(rgb)
        stem = Path(row.image).stem
        for k, c in enumerate(res.candidates):
            x, y, w, h = c.bbox
            save_pgm(crops_dir / f"{stem}_c{k:03d}.pgm", green[y : y + h, x : x + w])
    return "ok", (res.candidates, res.retained_fraction)


def _run_pool(fn: Callable, jobs: list, workers: int) -> list:
    """Apply ``fn`` to every job; results come back in job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------- helpers


def _read_manifest(path: str) -> DatasetManifest:
    try:
        return read_manifest(path)
    except OSError as exc:
        raise CliError(f"cannot read manifest: {exc}", EXIT_IO) from None
    except (ManifestError, UnicodeDecodeError) as exc:
        raise CliError(f"bad manifest: {exc}", EXIT_DATA) from None


def _config(args) -> RunConfig:
    try:
        cfg = load_config(args.config)
        overrides = {
            f.name: getattr(args, f"cfg_{f.name}")
            for f in fields(RunConfig)
            if getattr(args, f"cfg_{f.name}", None) is not None
        }
        return cfg.with_overrides(overrides) if overrides else cfg
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO) from None
    except (ConfigError, ValueError, TypeError) as exc:
        raise CliError(f"bad config: {exc}", EXIT_USAGE) from None


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None


def _load_model_file(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read model: {exc}", EXIT_IO) from None
    try:
        return load_model(data)
    except ModelFormatError as exc:
        raise CliError(f"bad model file: {exc}", EXIT_DATA) from None


# ------------------------------------------------------------- operations


def _train_model(manifest: DatasetManifest, cfg: RunConfig):
    rows = [r for r in manifest if r.label != "unlabeled"]
    if not rows:
        raise CliError("manifest has no labelled rows", EXIT_DATA)
    counts = {lbl.value: sum(r.label == lbl.value for r in rows) for lbl in ClassLabel}
    if min(counts.values()) == 0:
        raise CliError(f"training needs both classes, got {counts}", EXIT_DATA)
    out = _run_pool(_features_job, [(manifest.base_dir / r.image, cfg) for r in rows], cfg.workers)
    failed = [(r.image, msg) for r, (status, msg) in zip(rows, out) if status == "error"]
    if failed:
        raise CliError("; ".join(f"{img}: {msg}" for img, msg in failed), EXIT_IO)
    spec = cfg.feature_spec
    data = TrainingSet(np.vstack([v for _, v in out]), [r.label for r in rows], spec.kinds(_n_tiles(cfg)))
    n_tiles = _n_tiles(cfg)
    if cfg.keep == 0:
        model = train(data, spec)
        subset = None
    else:
        if cfg.keep > n_tiles:
            raise CliError(f"keep={cfg.keep} exceeds the {n_tiles} available tiles", EXIT_USAGE)
        subset = backward_elimination(data, spec, cfg.keep)
        model = train(data.subset_columns(spec.columns(subset)), spec, subset, n_tiles)
    return model, counts, subset


def _n_tiles(cfg: RunConfig) -> int:
    return len(split_subimages((PRESCREEN_SIZE, PRESCREEN_SIZE), cfg.s_prescreen))


def _prescreen_rows(manifest: DatasetManifest, model, cfg: RunConfig, rows: Sequence[ManifestRow]):
    out = _run_pool(_features_job, [(manifest.base_dir / r.image, cfg) for r in rows], cfg.workers)
    ok = [i for i, (status, _) in enumerate(out) if status == "ok"]
    preds = predict_many(model, np.vstack([out[i][1] for i in ok])) if ok else []
    by_index = dict(zip(ok, preds))
    result = []
    for i, r in enumerate(rows):
        if i in by_index:
            result.append(report.prescreen_row(r.image, by_index[i]))
        else:
            result.append(report.error_row(r.image, out[i][1]))
    return result


def _prefilter_rows(manifest: DatasetManifest, cfg: RunConfig, rows: Sequence[ManifestRow], crops: str | None):
    crops_dir = None
    if crops:
        crops_dir = Path(crops)
        try:
            crops_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(f"cannot create crops directory: {exc}", EXIT_IO) from None
    jobs = [(r, manifest.base_dir, cfg, crops_dir) for r in rows]
    out = _run_pool(_prefilter_job, jobs, cfg.workers)
    result = []
    for r, (status, payload) in zip(rows, out):
        if status == "ok":
            result.append(report.prefilter_row(r.image, *payload))
        else:
            result.append(report.error_row(r.image, payload))
    return result


def _failures(rows) -> int:
    return sum("error" in r for r in rows)


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    try:
        path = generate_corpus(
            args.out,
            args.seed,
            normal=args.normal,
            abnormal=args.abnormal,
            lesioned=args.lesioned,
            width=args.width,
            height=args.height,
            lesion_kind=LesionKind(args.lesion_kind),
        )
    except OSError as exc:
        raise CliError(f"cannot write corpus: {exc}", EXIT_IO) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    print(path)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    manifest = _read_manifest(args.manifest)
    try:
        model, counts, subset = _train_model(manifest, cfg)
    except TrainingError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    try:
        Path(args.model).write_bytes(save_model(model))
    except OSError as exc:
        raise CliError(f"cannot write model: {exc}", EXIT_IO) from None
    print(f"trained on {sum(counts.values())} images: " + " ".join(f"{k}={v}" for k, v in counts.items()))
    print("selected tiles: " + ("all" if subset is None else " ".join(map(str, subset))))
    print(f"model written to {args.model}")
    return EXIT_OK


def cmd_prescreen(args) -> int:
    cfg = _config(args)
    manifest = _read_manifest(args.manifest)
    model = _load_model_file(args.model)
    rows = _prescreen_rows(manifest, model, cfg, manifest.rows)
    further = [r["image"] for r in rows if r.get("label") == ClassLabel.PROCESS_FURTHER.value]
    _write_text(args.report, report.dumps({"command": "prescreen", "rows": rows, "process_further": further}))
    bad = _failures(rows)
    print(f"{len(rows) - bad} images screened, {len(further)} to process further, {bad} failed")
    return EXIT_IO if bad else EXIT_OK


def cmd_prefilter(args) -> int:
    cfg = _config(args)
    manifest = _read_manifest(args.manifest)
    rows = _prefilter_rows(manifest, cfg, manifest.rows, args.crops)
    _write_text(args.report, report.dumps({"command": "prefilter", "rows": rows}))
    bad = _failures(rows)
    total = sum(len(r.get("candidates", ())) for r in rows)
    print(f"{len(rows) - bad} images filtered, {total} candidates, {bad} failed")
    return EXIT_IO if bad else EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    manifest = _read_manifest(args.manifest)
    if args.train:
        train_args = argparse.Namespace(**{**vars(args), "manifest": args.train})
        code = cmd_train(train_args)
        if code:
            return code
    model = _load_model_file(args.model)
    phase1 = _prescreen_rows(manifest, model, cfg, manifest.rows)
    # obviously abnormal images are not analysed further
    passed = [r for r, p in zip(manifest.rows, phase1) if p.get("label") == ClassLabel.PROCESS_FURTHER.value]
    phase2 = _prefilter_rows(manifest, cfg, passed, args.crops)
    _write_text(args.report, report.dumps({"command": "pipeline", "prescreen": phase1, "prefilter": phase2}))
    bad = _failures(phase1) + _failures(phase2)
    print(f"{len(phase1)} images screened, {len(passed)} passed to candidate extraction, {bad} failed")
    return EXIT_IO if bad else EXIT_OK


def _evaluate_prescreen(rows, truth: dict[str, ManifestRow]) -> dict:
    scored = [r for r in rows if "error" not in r]
    if not scored:
        raise CliError("prescreen report has no scored rows", EXIT_DATA)
    labels = []
    for r in scored:
        t = truth.get(r["image"])
        if t is None or t.label == "unlabeled":
            raise CliError(f"no truth label for {r['image']}", EXIT_DATA)
        labels.append(t.label)
    c = confusion(labels, [r["label"] for r in scored])
    m = metrics(c)
    return {
        "accuracy": m.accuracy,
        "sensitivity": m.sensitivity,
        "specificity": m.specificity,
        "confusion": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn},
    }


def _evaluate_prefilter(rows, truth: dict[str, ManifestRow], manifest: DatasetManifest, region_size: int) -> dict:
    scored = [r for r in rows if "error" not in r]
    if not scored:
        raise CliError("prefilter report has no scored rows", EXIT_DATA)
    per_image = []
    for r in scored:
        t = truth.get(r["image"])
        if t is None or not t.lesions:
            raise CliError(f"no lesion ground truth for {r['image']}", EXIT_DATA)
        try:
            lesions = load_image(manifest.resolve(t.lesions))
        except (OSError, NetpbmError) as exc:
            raise CliError(f"cannot read lesion mask: {exc}", EXIT_IO) from None
        cands = [report.candidate_from_json(c) for c in r["candidates"]]
        per_image.append((cands, lesions > 0, r["retained_fraction"]))
    t = tally(region_size, per_image)
    return {
        "size": t.size,
        "true": t.true,
        "false": t.false,
        "misclassified": t.misclassified,
        "percentage": t.percentage,
    }


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    manifest = _read_manifest(args.manifest)
    truth = {r.image: r for r in manifest}
    if not (args.prescreen or args.prefilter):
        raise CliError("give at least one of --prescreen / --prefilter", EXIT_USAGE)
    result: dict = {"command": "evaluate"}

    def rows_of(path: str, section: str):
        try:
            data = report.loads(_read_text(path))
        except ValueError as exc:
            raise CliError(f"bad report {path}: {exc}", EXIT_DATA) from None
        # pipeline reports carry both phases
        return data[section] if section in data else data["rows"]

    if args.prescreen:
        result["prescreen"] = _evaluate_prescreen(rows_of(args.prescreen, "prescreen"), truth)
        p = result["prescreen"]
        print(
            "prescreen: accuracy={} sensitivity={} specificity={}".format(
                *(_fmt(p[k]) for k in ("accuracy", "sensitivity", "specificity"))
            )
        )
    if args.prefilter:
        result["prefilter"] = _evaluate_prefilter(
            rows_of(args.prefilter, "prefilter"), truth, manifest, cfg.s_prefilter
        )
        p = result["prefilter"]
        print("size\ttrue\tfalse\tmisclassified\tpercentage")
        print(f"{p['size']}\t{p['true']}\t{p['false']}\t{p['misclassified']}\t{p['percentage']:.4f}")
    if args.out:
        _write_text(args.out, report.dumps(result))
    return EXIT_OK


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.4f}"


# ------------------------------------------------------------------ parser


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration", "file values are overridden by these flags")
    g.add_argument("--config", help="key = value config file")
    for f in fields(RunConfig):
        g.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar="V", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fundusgate", description="Two-phase fundus image screening.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--normal", type=int, default=0)
    p.add_argument("--abnormal", type=int, default=0)
    p.add_argument("--lesioned", type=int, default=0)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--lesion-kind", choices=[k.value for k in LesionKind], default=LesionKind.DARK_BLOB.value)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the pre-screening classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="model file to write")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prescreen", help="classify images as abnormal / process further")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report", required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_prescreen)

    p = sub.add_parser("prefilter", help="extract lesion candidate regions")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--crops", help="directory for candidate crops (PGM)")
    _add_config_args(p)
    p.set_defaults(func=cmd_prefilter)

    p = sub.add_parser("evaluate", help="score reports against manifest truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--prescreen", help="prescreen or pipeline report")
    p.add_argument("--prefilter", help="prefilter or pipeline report")
    p.add_argument("--out", help="write the scores as JSON")
    _add_config_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="pre-screen, then extract candidates from the images that pass")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="model to use (written first when --train is given)")
    p.add_argument("--train", metavar="MANIFEST", help="train on this manifest before screening")
    p.add_argument("--report", required=True)
    p.add_argument("--crops", help="directory for candidate crops (PGM)")
    _add_config_args(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"fundusgate: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, KeyError) as exc:
        print(f"fundusgate: {exc}", file=sys.stderr)
        return EXIT_DATA


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
