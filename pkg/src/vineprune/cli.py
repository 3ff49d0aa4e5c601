"""Command-line driver: ``run`` one scene, ``bench`` a synthetic grid, ``synth`` a scene."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, kernels
from .config import PipelineConfig, load_config, parse_config
from .errors import UsageError, VinePruneError
from .io_ingest import CameraIntrinsics, load_annotations, load_depth
from .overlay import render_overlay
from .pipeline import run_pipeline
from .serialize import dumps_json, model_to_dict, points_to_dict

log = logging.getLogger("vineprune")

EXIT_OK, EXIT_FATAL, EXIT_DEGRADED = 0, 1, 2


def _atomic_write(path, data):
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _png_bytes(img):
    import io

    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def cmd_run(annotations, depth, config, out_dir, overlay=True, image=None, image_id=None):
    """Full pipeline on one scene. Returns 0 (clean), 2 (degraded) or 1 (fatal)."""
    timings = {}
    t0 = time.perf_counter()
    try:
        cfg = load_config(config) if config else PipelineConfig()
        scene = load_annotations(annotations, image_id=image_id)
        dep = load_depth(depth, cfg.depth_scale, (scene.height, scene.width))
        intr = CameraIntrinsics.from_config(cfg, scene.width, scene.height)
        timings["ingest"] = time.perf_counter() - t0

        t = time.perf_counter()
        result = run_pipeline(scene.records, dep, intr, cfg)
        timings["pipeline"] = time.perf_counter() - t
    except (VinePruneError, OSError, ValueError) as exc:
        print(f"vineprune: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    files = ["model.json", "pruning_points.json"]
    _atomic_write(out / "model.json", dumps_json(model_to_dict(result.model, result.assessments)))
    _atomic_write(out / "pruning_points.json", dumps_json(points_to_dict(result.points)))
    if overlay:
        from PIL import Image

        bg = Image.open(image) if image else None
        img = render_overlay(bg, result.model, result.points, scene.width, scene.height)
        _atomic_write(out / "overlay.png", _png_bytes(img))
        files.append("overlay.png")
    timings["write"] = time.perf_counter() - t

    warnings = result.warnings()
    for w in warnings:
        log.warning(w)
    manifest = {
        "tool": "vineprune",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "inputs": {"annotations": str(annotations), "depth": str(depth), "config": str(config) if config else None},
        "output_dir": str(out),
        "outputs": files,
        "config_sha256": cfg.digest(),
        "timings_s": {k: round(v, 4) for k, v in timings.items()},
        "n_items": len(result.model.items),
        "n_regions": len(result.assessments),
        "n_points": len(result.points),
        "warning_count": len(warnings),
        "warnings": warnings,
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return EXIT_DEGRADED if warnings else EXIT_OK


# --- bench ---------------------------------------------------------------------


def _load_grid(path):
    try:
        grid = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read grid {path}: {exc}") from None
    cells = grid.get("cells") if isinstance(grid, dict) else None
    if not cells:
        raise UsageError(f"grid {path} defines no cells")
    jobs = []
    for i, cell in enumerate(cells):
        name = str(cell.get("name", f"cell{i}"))
        if "seeds" in cell:
            seeds = [int(s) for s in cell["seeds"]]
        elif "seed_range" in cell:
            seeds = list(range(*[int(v) for v in cell["seed_range"]]))
        else:
            raise UsageError(f"cell {name!r} needs 'seeds' or 'seed_range'")
        jobs.append((name, seeds, cell.get("spec", {}), cell.get("perturb", [])))
    overrides = "\n".join(f"{k} = {v}" for k, v in (grid.get("config") or {}).items())
    return jobs, overrides


def _match_error(points, truth_points):
    truth = {(t["region_id"], t["role"]): t["position_px"] for t in truth_points}
    errs = [
        math.dist(p.position_px, truth[(p.region_id, p.role)])
        for p in points
        if (p.region_id, p.role) in truth
    ]
    return sum(errs) / len(errs) if errs else float("nan")


def run_cell(name, seeds, spec_overrides, ops, config_text=""):
    """Generate -> perturb -> assemble -> score for every seed of one cell."""
    from .synthetic import generate_scene, perturb, random_spec, score_model

    cfg = parse_config(config_text)
    rows = []
    for seed in seeds:
        row = {"cell": name, "seed": seed, "status": "ok", "error": ""}
        t = time.perf_counter()
        try:
            spec = dataclasses.replace(random_spec(seed), **spec_overrides)
            bundle = perturb(generate_scene(spec), ops, seed)
            result = run_pipeline(bundle.records, bundle.depth, bundle.intrinsics, cfg)
            score = score_model(result.model, bundle.truth_tree, strict=not ops)
            on_mask = [
                bool(result.model.items[p.target_item_id].mask[p.position_px[1], p.position_px[0]])
                for p in result.points
            ]
            row.update(score)
            row.update(
                n_points=len(result.points),
                on_mask_fraction=sum(on_mask) / len(on_mask) if on_mask else 1.0,
                correction_errors=sum("correction_error" in p.flags for p in result.points),
                mean_point_error_px=_match_error(result.points, bundle.truth_points),
            )
        except Exception as exc:  # a broken cell is data, the sweep goes on
            row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        row["runtime_s"] = round(time.perf_counter() - t, 4)
        rows.append(row)
    return name, rows


CSV_FIELDS = [
    "cell", "seed", "status", "edge_precision", "edge_recall", "tree_isomorphic", "n_points",
    "on_mask_fraction", "correction_errors", "mean_point_error_px", "runtime_s", "error",
]


def cmd_bench(grid, out_dir, jobs=1):
    try:
        cells, overrides = _load_grid(grid)
        parse_config(overrides)
    except VinePruneError as exc:
        print(f"vineprune: error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    out = Path(out_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_cell, n, s, sp, ops, overrides) for n, s, sp, ops in cells]
            results = [f.result() for f in futures]
    else:
        results = [run_cell(n, s, sp, ops, overrides) for n, s, sp, ops in cells]

    all_rows = []
    for name, rows in results:
        _atomic_write(out / "cells" / f"{name}.json", dumps_json(rows))
        all_rows.extend(rows)
        ok = [r for r in rows if r["status"] == "ok"]
        iso = sum(bool(r.get("tree_isomorphic")) for r in ok)
        rec = sum(r["edge_recall"] for r in ok) / len(ok) if ok else float("nan")
        print(f"{name}: {len(ok)}/{len(rows)} ok, isomorphic {iso}/{len(rows)}, mean recall {rec:.3f}")

    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in all_rows:
        writer.writerow({k: (round(v, 6) if isinstance(v, float) else v) for k, v in row.items()})
    _atomic_write(out / "results.csv", buf.getvalue())
    return EXIT_OK


def cmd_synth(seed, out_dir, uniform=False):
    from .synthetic import SceneSpec, generate_scene, random_spec, write_bundle

    spec = SceneSpec.uniform(seed=seed) if uniform else random_spec(seed)
    write_bundle(generate_scene(spec), out_dir)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="vineprune", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="model one scene and emit pruning points")
    run.add_argument("--annotations", required=True, help="COCO instance-segmentation JSON")
    run.add_argument("--depth", required=True, help="16-bit single-channel depth PNG")
    run.add_argument("--config", help="key = value pipeline config (intrinsics live here)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--image", help="colour image to draw the overlay on")
    run.add_argument("--image-id", type=int, help="image to select from a multi-image COCO file")
    run.add_argument("--no-overlay", action="store_true", help="skip overlay.png")

    bench = sub.add_parser("bench", help="score the pipeline over a synthetic scene grid")
    bench.add_argument("--grid", required=True, help="grid JSON")
    bench.add_argument("--out", required=True, help="output directory")
    bench.add_argument("--jobs", type=int, default=1, help="worker processes")

    synth = sub.add_parser("synth", help="write one synthetic scene to disk")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--uniform", action="store_true", help="5 spurs x 1 cane x 3 nodes")
    synth.add_argument("--out", required=True)
    return parser


def main(argv=None):
    level = os.environ.get("VINEPRUNE_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.annotations, args.depth, args.config, args.out, not args.no_overlay, args.image, args.image_id)
    if args.command == "bench":
        return cmd_bench(args.grid, args.out, args.jobs)
    return cmd_synth(args.seed, args.out, args.uniform)


if __name__ == "__main__":
    sys.exit(main())
