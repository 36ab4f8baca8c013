"""Command-line pipeline: localize, analyze, sweep, gen-synth, stats.

Outputs are CSV plus a JSON report/index, written atomically and byte-stable:
rows are emitted in (scene, image_id, concept) order, floats via repr, and no
timestamps, so reruns (at any thread count) produce identical bytes.

Exit codes: 0 success, 2 input/validation errors, 3 runtime errors,
4 completed with per-record failures (partial results). Log level comes from
the CONCEPT_COVER_LOG environment variable.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .analysis import RecognitionAnalysis, ScoredInstance, threshold_grid
from .errors import (
    ConceptCoverError,
    EmptyConceptMaskError,
    EmptyInputError,
    TooFewPointsError,
    ZeroVarianceError,
)
from .ingest import (
    DatasetManifest,
    atomic_write,
    load_concept_masks,
    load_manifest,
    load_stack,
)
from .recognition import GreedyConfig, greedy_selection
from .stats import distribution_stats, pearson
from .synth import generate, load_synth_spec

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_PARTIAL = 4

RESULTS_CSV = "recognition.csv"
RESULTS_INDEX = "index.json"

log = logging.getLogger("conceptcover")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with atomic_write(path, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload) -> None:
    with atomic_write(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest_path(dataset: str) -> Path:
    path = Path(dataset)
    return path / "manifest.json" if path.is_dir() else path


# ---------------------------------------------------------------------------
# localize

def _localize_image(manifest: DatasetManifest, rec, cfg: GreedyConfig) -> list[dict]:
    stack = load_stack(manifest, rec)
    masks = load_concept_masks(manifest, rec)
    rows = []
    for concept in sorted(masks):
        base = {
            "image_id": rec.image_id,
            "scene_label": rec.scene_label,
            "concept": concept,
        }
        try:
            result = greedy_selection(stack, masks[concept], cfg,
                                      concept_name=concept, image_id=rec.image_id)
        except EmptyConceptMaskError as exc:
            log.warning("%s/%s: %s", rec.image_id, concept, exc)
            rows.append({**base, "score": None, "selected_maps": [],
                         "score_trace": [], "error": exc.code})
            continue
        rows.append({**base, "score": result.score,
                     "selected_maps": result.selected_maps,
                     "score_trace": result.score_trace, "error": None})
    return rows


def cmd_localize(args) -> int:
    manifest = load_manifest(_manifest_path(args.dataset))
    cfg = GreedyConfig(delta=args.delta)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    images = sorted(manifest.images, key=lambda r: (r.scene_label, r.image_id))
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            per_image = list(pool.map(
                lambda rec: _localize_image(manifest, rec, cfg), images
            ))
    else:
        per_image = [_localize_image(manifest, rec, cfg) for rec in images]

    rows = [row for group in per_image for row in group]
    error_count = sum(1 for r in rows if r["error"])
    _write_csv(
        out_dir / RESULTS_CSV,
        ["image_id", "scene_label", "concept", "score",
         "selected_maps", "score_trace", "error"],
        [[r["image_id"], r["scene_label"], r["concept"], r["score"],
          " ".join(str(i) for i in r["selected_maps"]),
          " ".join(repr(s) for s in r["score_trace"]),
          r["error"]] for r in rows],
    )
    _write_json(out_dir / RESULTS_INDEX, {
        "format": "conceptcover-recognition",
        "version": 1,
        "csv": RESULTS_CSV,
        "dataset": str(args.dataset),
        "delta": args.delta,
        "record_count": len(rows),
        "error_count": error_count,
    })
    log.info("localized %d instances (%d errors)", len(rows), error_count)
    return EXIT_PARTIAL if error_count else EXIT_OK


def read_recognition_results(path: Path | str) -> tuple[list[ScoredInstance], set]:
    """Load a localize output (directory or CSV) back into memory."""
    path = Path(path)
    if path.is_dir():
        path = path / RESULTS_CSV
    instances = []
    unscored = set()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["error"]:
                unscored.add((row["image_id"], row["concept"]))
                continue
            instances.append(ScoredInstance(
                image_id=row["image_id"],
                scene_label=int(row["scene_label"]),
                concept=row["concept"],
                score=float(row["score"]),
            ))
    return instances, unscored


# ---------------------------------------------------------------------------
# analyze

def _correlation_entry(pairs: list[tuple[float, float]]) -> dict:
    if len(pairs) < 3:
        return {"rho": None, "p": None, "n": len(pairs),
                "reason": "insufficient scenes"}
    xs = [x for x, _ in pairs]
    ys = [y for _, y in pairs]
    try:
        result = pearson(xs, ys)
    except ZeroVarianceError:
        return {"rho": None, "p": None, "n": len(pairs), "reason": "zero variance"}
    except TooFewPointsError:
        return {"rho": None, "p": None, "n": len(pairs),
                "reason": "insufficient scenes"}
    return {"rho": result.rho, "p": result.p_two_sided, "n": len(pairs)}


def cmd_analyze(args) -> int:
    manifest = load_manifest(_manifest_path(args.dataset))
    instances, unscored = read_recognition_results(args.results)
    analysis = RecognitionAnalysis(manifest, instances, unscored)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    scene_stats = analysis.concept_scene_stats()
    _write_csv(
        out_dir / "concept_scene_stats.csv",
        ["scene_label", "scene_name", "concept", "occurrence_count",
         "popularity", "mean_score"],
        [[s.scene_label, manifest.scene_name(s.scene_label), s.concept_name,
          s.occurrence_count, s.popularity, s.mean_score] for s in scene_stats],
    )

    global_stats = analysis.concept_global_stats()
    _write_csv(
        out_dir / "concept_global_stats.csv",
        ["concept", "scene_presence_count", "uniqueness"],
        [[g.concept_name, g.scene_presence_count, g.uniqueness]
         for g in global_stats],
    )

    reports = analysis.scene_reports(args.alpha, args.beta)
    _write_csv(
        out_dir / "scene_reports.csv",
        ["scene_label", "scene_name", "accuracy", "mean_recognition",
         "slope", "s_unique", "s_mislead", "s_syn"],
        [[r.scene_label, manifest.scene_name(r.scene_label), r.accuracy,
          r.mean_recognition, r.slope, r.s_unique, r.s_mislead, r.s_syn]
         for r in reports],
    )

    if analysis.all_scores:
        dist = distribution_stats(analysis.all_scores)
        distribution = {"mean": dist.mean, "median": dist.median,
                        "q1": dist.q1, "q3": dist.q3,
                        "count": len(analysis.all_scores)}
    else:
        distribution = None

    recognition_pairs = [
        (r.mean_recognition, r.accuracy) for r in reports
        if r.mean_recognition is not None
    ]
    slope_pairs = [(r.slope, r.accuracy) for r in reports if r.slope is not None]
    report = {
        "distribution": distribution,
        "correlations": {
            "recognition_vs_accuracy": _correlation_entry(recognition_pairs),
            "slope_vs_accuracy": _correlation_entry(slope_pairs),
        },
        "counts": {
            "scenes": len(manifest.scene_classes),
            "images": len(manifest.images),
            "concepts": len(global_stats),
            "scored_instances": len(instances),
            "unscored_instances": len(unscored),
        },
        "thresholds": {"alpha": args.alpha, "beta": args.beta},
        "files": {
            "concept_scene_stats": "concept_scene_stats.csv",
            "concept_global_stats": "concept_global_stats.csv",
            "scene_reports": "scene_reports.csv",
        },
    }
    _write_json(out_dir / "report.json", report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"expected START:STOP, got {text!r}")
    return float(parts[0]), float(parts[1])


def cmd_sweep(args) -> int:
    manifest = load_manifest(_manifest_path(args.dataset))
    instances, unscored = read_recognition_results(args.results)
    analysis = RecognitionAnalysis(manifest, instances, unscored)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    alphas = threshold_grid(*_parse_range(args.alpha_range), args.step)
    betas = threshold_grid(*_parse_range(args.beta_range), args.step)
    cells = analysis.sweep(alphas, betas)

    _write_csv(
        out_dir / "sweep.csv",
        ["alpha", "beta", "rho_unique", "p_unique", "rho_mislead",
         "p_mislead", "rho_syn", "scenes_counted"],
        [[c.alpha, c.beta, c.rho_unique, c.p_unique, c.rho_mislead,
          c.p_mislead, c.rho_syn, c.scenes_counted] for c in cells],
    )

    best = None
    for cell in cells:
        if cell.rho_syn is not None and (best is None or cell.rho_syn > best.rho_syn):
            best = cell
    if best is None:
        argmax = {"argmax": None, "reason": "no cell has a defined rho_syn"}
    else:
        argmax = {"argmax": dataclasses.asdict(best)}
    _write_json(out_dir / "sweep_argmax.json", argmax)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen-synth / stats

def cmd_gen_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    generate(spec, args.out)
    log.info("generated synthetic dataset at %s", args.out)
    return EXIT_OK


def cmd_stats(args) -> int:
    instances, _unscored = read_recognition_results(args.results)
    if not instances:
        raise EmptyInputError(f"{args.results}: no scored records")
    dist = distribution_stats([inst.score for inst in instances])
    print(json.dumps({
        "count": len(instances),
        "mean": dist.mean,
        "median": dist.median,
        "q1": dist.q1,
        "q3": dist.q3,
    }, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conceptcover",
        description="Concept-recognition coverage scoring and analysis pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("localize", help="greedy-select feature maps for every (image, concept)")
    p.add_argument("--dataset", required=True, help="dataset directory or manifest.json")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--delta", type=float, default=0.01,
                   help="minimum score improvement to keep selecting (default 0.01)")
    p.add_argument("--threads", type=int, default=1, help="worker threads over images")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("analyze", help="distribution, per-scene, and per-concept statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--results", required=True, help="localize output directory or CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=None,
                   help="uniqueness threshold for the per-scene threshold scores")
    p.add_argument("--beta", type=float, default=None,
                   help="popularity threshold for the per-scene threshold scores")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="correlation grid over (alpha, beta) thresholds")
    p.add_argument("--dataset", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha-range", default="0:1", help="START:STOP (default 0:1)")
    p.add_argument("--beta-range", default="0:1", help="START:STOP (default 0:1)")
    p.add_argument("--step", type=float, default=0.05, help="grid step (default 0.05)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-synth", help="generate a planted synthetic dataset")
    p.add_argument("--spec", required=True, help="synth spec JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("stats", help="summarize the score distribution of a results file")
    p.add_argument("--results", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def _configure_logging() -> None:
    level = os.environ.get("CONCEPT_COVER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "delta", 0.0) < 0:
        parser.error("--delta must be >= 0")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    if getattr(args, "step", 0.05) is not None and getattr(args, "step", 0.05) <= 0:
        parser.error("--step must be > 0")
    try:
        return args.func(args)
    except ConceptCoverError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error[invalid-argument]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - boundary: report and exit nonzero
        log.exception("unhandled failure")
        print(f"error[runtime]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
