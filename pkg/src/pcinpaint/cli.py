"""Command-line front end: ``pcinpaint <command> ...``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from .cloud import estimate_normals
from .config import PipelineConfig, load_config
from .errors import CapacityError, ConfigError, PlyFormatError, SolverError
from .holes import AXES, detect_holes, hole_from_cells, principal_projection_axis, \
    read_manifest, write_manifest
from .inpaint import inpaint_all, write_report
from .metrics import evaluate
from .ply import load_ply, save_ply
from .synth import HoleSynthesisSpec, punch_hole
from .voxel import NormalizationRecord, VoxelGrid, normalize_coordinates, to_cloud, voxelize

EXIT_OK, EXIT_INPUT, EXIT_SPEC, EXIT_NUMERIC = 0, 2, 3, 4


class StageError(Exception):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


def _exit_code(exc):
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_SPEC
    if isinstance(exc, (SolverError, CapacityError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    return EXIT_INPUT


def _emit(args, text, payload):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    return cfg.with_overrides(seed=args.seed, threads=args.threads)


def _load_grid(path) -> VoxelGrid:
    cloud = load_ply(path)
    if not cloud.has_normals:
        raise PlyFormatError(f"{path}: voxel grid file needs nx ny nz properties")
    return VoxelGrid.from_cloud(cloud)


def _is_unit_grid(cloud):
    """True when points already sit on distinct unit-cell centres."""
    frac = cloud.positions - np.floor(cloud.positions)
    if not np.allclose(frac, 0.5, atol=1e-9):
        return False
    cells = np.floor(cloud.positions).astype(np.int64)
    return len(np.unique(cells, axis=0)) == len(cells)


def voxelize_cloud(cloud, cfg: PipelineConfig) -> VoxelGrid:
    cloud = estimate_normals(cloud, cfg.normal_k)
    if _is_unit_grid(cloud):
        return VoxelGrid.from_cloud(cloud, NormalizationRecord.identity())
    normed, rec = normalize_coordinates(cloud, cfg.normalize_k)
    return voxelize(normed, cfg.sigma, rec)


def _save_grid(grid, path):
    save_ply(to_cloud(grid), path)


# commands ------------------------------------------------------------------

def cmd_voxelize(args):
    cfg = _config(args)
    grid = voxelize_cloud(load_ply(args.input), cfg)
    sidecar = args.sidecar or args.output + ".norm"
    _save_grid(grid, args.output)
    grid.record.save(sidecar)
    _emit(args, f"{len(grid)} cells written to {args.output}",
          {"cells": len(grid), "output": args.output, "sidecar": sidecar,
           "scale": grid.record.scale, "shift": list(grid.record.shift)})
    return EXIT_OK


def _detect(grid, cfg, axis=None):
    return detect_holes(grid, cfg.min_hole_pixels, cfg.all_axes, axis)


def cmd_detect(args):
    cfg = _config(args)
    if args.all_axes:
        cfg = cfg.with_overrides(all_axes=True)
    if args.min_pixels is not None:
        cfg = cfg.with_overrides(min_hole_pixels=args.min_pixels)
    grid = _load_grid(args.input)
    holes = _detect(grid, cfg, args.axis)
    write_manifest(holes, args.manifest)
    _emit(args, f"{len(holes)} holes detected",
          {"holes": len(holes), "manifest": args.manifest,
           "pixel_counts": [h.pixel_count for h in holes]})
    return EXIT_OK


def cmd_synth_hole(args):
    try:
        spec = HoleSynthesisSpec.parse(args.spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = _load_grid(args.input)
    punched, removed = punch_hole(grid, spec)
    if len(removed) == 0:
        raise ConfigError("hole spec removes no cells")
    if len(punched) == 0:
        raise ConfigError("hole spec removes every cell")
    _save_grid(punched, args.output)
    _save_grid(removed, args.truth)
    if args.manifest:
        axis = args.axis or principal_projection_axis(grid)
        write_manifest([hole_from_cells(removed.cells, axis)], args.manifest)
    _emit(args, f"{len(removed)} cells removed",
          {"removed": len(removed), "output": args.output, "truth": args.truth})
    return EXIT_OK


def _inpaint(grid, holes, cfg, output, report_path):
    out, reports = inpaint_all(grid, holes, cfg)
    _save_grid(out, output)
    write_report(reports, report_path)
    return out, reports


def cmd_inpaint(args):
    cfg = _config(args)
    grid = _load_grid(args.input)
    holes = read_manifest(args.manifest)
    report = args.report or args.output + ".report"
    _, reports = _inpaint(grid, holes, cfg, args.output, report)
    filled = sum(r.filled_cells for r in reports)
    _emit(args, f"{len(holes)} holes, {filled} cells filled",
          {"holes": len(holes), "filled_cells": filled, "output": args.output, "report": report,
           "status": [r.status for r in reports]})
    return EXIT_OK


def cmd_evaluate(args):
    ref = load_ply(args.ref)
    test = load_ply(args.test)
    rep = evaluate(test, ref)
    g = "inf" if math.isinf(rep.gpsnr) else f"{rep.gpsnr:.6f}"
    _emit(args, f"{g} {rep.nshd:.9g} {rep.ohd_ab:.9g} {rep.ohd_ba:.9g} {rep.peak:.9g} "
                f"{rep.volume:.9g}",
          {"gpsnr_db": g if g == "inf" else rep.gpsnr, "nshd": rep.nshd,
           "ohd_fwd": rep.ohd_ab, "ohd_bwd": rep.ohd_ba, "p": rep.peak, "V": rep.volume})
    return EXIT_OK


def _preserve_partial(paths):
    for p in paths:
        if os.path.exists(p):
            os.replace(p, p + ".partial")


def cmd_pipeline(args):
    cfg = _config(args)
    manifest = args.manifest or args.output + ".holes"
    report = args.report or args.output + ".report"
    sidecar = args.output + ".norm"
    written = []
    stage = "load"
    try:
        cloud = load_ply(args.input)
        stage = "voxelize"
        grid = voxelize_cloud(cloud, cfg)
        grid.record.save(sidecar)
        written.append(sidecar)
        stage = "detect"
        holes = _detect(grid, cfg)
        write_manifest(holes, manifest)
        written.append(manifest)
        if not args.json:
            print(f"{len(holes)} holes detected")
        stage = "inpaint"
        out, reports = inpaint_all(grid, holes, cfg)
        _save_grid(out, args.output)
        written.append(args.output)
        write_report(reports, report)
        written.append(report)
    except (OSError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        if stage in ("detect", "inpaint"):
            _save_grid(grid, args.output)
            written.append(args.output)
        _preserve_partial(written)
        raise StageError(stage, exc) from exc
    filled = sum(r.filled_cells for r in reports)
    payload = {"holes": len(holes), "filled_cells": filled, "output": args.output,
               "report": report, "manifest": manifest}
    _emit(args, f"{filled} cells filled", payload)
    return EXIT_OK


# parser --------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--threads", type=int, help="worker threads for scoring (0 = auto)")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    parser = argparse.ArgumentParser(prog="pcinpaint",
                                     description="Voxelized point-cloud hole detection and inpainting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("voxelize", parents=[common], help="normalize and voxelize a cloud")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--sidecar", help="normalization record path (default OUTPUT.norm)")
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("detect", parents=[common], help="write a hole manifest")
    p.add_argument("input")
    p.add_argument("manifest")
    p.add_argument("--axis", choices=AXES, help="projection axis (default: principal axis)")
    p.add_argument("--all-axes", action="store_true")
    p.add_argument("--min-pixels", type=int)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth-hole", parents=[common], help="punch a synthetic hole")
    p.add_argument("input")
    p.add_argument("spec", help="sphere:cx,cy,cz:r or box:cx,cy,cz:hx,hy,hz")
    p.add_argument("output")
    p.add_argument("truth")
    p.add_argument("--manifest", help="also write a manifest describing the punched cells")
    p.add_argument("--axis", choices=AXES, help="manifest projection axis")
    p.set_defaults(func=cmd_synth_hole)

    p = sub.add_parser("inpaint", parents=[common], help="fill the holes of a manifest")
    p.add_argument("input")
    p.add_argument("manifest")
    p.add_argument("output")
    p.add_argument("--report", help="per-hole report path (default OUTPUT.report)")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("evaluate", parents=[common], help="compare a cloud against a reference")
    p.add_argument("ref")
    p.add_argument("test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", parents=[common], help="voxelize, detect and inpaint")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--manifest")
    p.add_argument("--report")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore" if args.json else "default")
            return args.func(args)
    except (OSError, ValueError, RuntimeError, np.linalg.LinAlgError, StageError) as exc:
        print(f"pcinpaint {args.command}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
