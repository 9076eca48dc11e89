"""Command-line entry point: simulate, groundtruth, warp, risk, evaluate.

Exit codes: 0 success, 2 configuration or usage error, 3 degenerate camera
geometry, 4 raster dimension or frame mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import io
from .errors import (
    DegenerateGeometryError,
    DegeneratePlaneError,
    DimensionMismatchError,
    FrameMismatchError,
    InfeasibleConfigError,
    KernelTooLargeError,
)
from .geometry import make_bev_grid, world_from_bev
from .metrics import evaluate_batch
from .raster import Frame, KeypointSet, RasterConfig, rasterize
from .risk import RiskConfig, global_risk, individual_risks, risk_map, risk_mask
from .simulator import Annotations, SceneConfig, annotate, ground_truth_bundle, sample_scene
from .warp import AttentionWeights, PlaneStack, group_warp_heads, warp_to_bev

logger = logging.getLogger("bevkit")

EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_MISMATCH = 4


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _map(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _raster_cfg(args) -> RasterConfig:
    return RasterConfig(sigma_px=args.sigma)


def _risk_cfg(args) -> RiskConfig:
    return RiskConfig(d0_m=args.d0, r0=args.r0)


def cmd_simulate(args) -> None:
    if args.config is not None:
        try:
            cfg = io.load_scene_config(args.config)
        except FileNotFoundError:
            raise CliError(EXIT_CONFIG, f"config file not found: {args.config}")
        except (ValueError, TypeError) as exc:
            raise CliError(EXIT_CONFIG, f"invalid config {args.config}: {exc}")
    else:
        cfg = SceneConfig()
    if args.n is not None:
        try:
            cfg = SceneConfig(**{**cfg.__dict__, "n_persons": (args.n, args.n)})
        except ValueError as exc:
            raise CliError(EXIT_CONFIG, str(exc))
    seeds = [args.seed + k for k in range(args.count)]
    out = Path(args.out)
    if args.count > 1:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"scene_{k:04d}.json" for k in range(args.count)]
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        paths = [out]

    def one(item):
        seed, path = item
        scene = sample_scene(cfg, seed)
        io.write_scene(scene, path, None if args.no_annotations else annotate(scene))
        logger.info("wrote %s (%d persons)", path, len(scene.persons))

    try:
        _map(one, list(zip(seeds, paths)), args.jobs)
    except InfeasibleConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc))


def _groundtruth_one(path: Path, out_dir: Path, args) -> dict:
    scene, records = io.read_scene(path)
    ann = Annotations.from_records(records) if records else None
    grid = make_bev_grid(scene.intr, scene.pose, args.grid_size, args.grid_size)
    risk_cfg = _risk_cfg(args)
    gt = ground_truth_bundle(scene, grid, _raster_cfg(args), risk_cfg, annotations=ann)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_grid(gt.m_head, out_dir / "M_head.bevg")
    io.write_grid(gt.m_feet, out_dir / "M_feet.bevg")
    io.write_grid(gt.m_bev, out_dir / "M_bev.bevg")
    io.write_grid(gt.risk, out_dir / "risk.bevg")
    io.save_png(gt.risk.values, out_dir / "risk.png")
    io.save_png(gt.mask, out_dir / "mask.png")
    inside = gt.bev_points.inside()
    report = {
        "scene": path.name,
        "scale_m_per_px": grid.scale_m_per_px,
        "grid": {
            "height_px": grid.height_px,
            "width_px": grid.width_px,
            "x_c": grid.x_c,
            "y_c": grid.y_c,
            "x_bc": grid.x_bc,
        },
        "person_count": len(scene.persons),
        "in_roi_count": gt.count,
        "bev_mass": float(np.sum(gt.m_bev.values)),
        "global_risk": gt.global_risk,
        "d0_m": risk_cfg.d0_m,
        "r0": risk_cfg.r0,
        "mask_area_px": int(np.count_nonzero(gt.mask)),
        "world_locations": gt.world_locations.tolist(),
        "individual_risks": individual_risks(inside, gt.risk).tolist(),
    }
    io.write_json(report, out_dir / "report.json")
    return report


def cmd_groundtruth(args) -> None:
    paths = [Path(p) for p in args.scenes]
    for p in paths:
        if not p.exists():
            raise CliError(EXIT_CONFIG, f"scene file not found: {p}")
    out = Path(args.out)
    dirs = [out] if len(paths) == 1 else [out / p.stem for p in paths]
    try:
        _map(lambda pd: _groundtruth_one(pd[0], pd[1], args), list(zip(paths, dirs)), args.jobs)
    except jsonschema.ValidationError as exc:
        raise CliError(EXIT_CONFIG, f"invalid scene file: {exc.message}")


def cmd_warp(args) -> None:
    hm = io.read_grid(args.input)
    scene, _ = io.read_scene(args.scene)
    grid = make_bev_grid(scene.intr, scene.pose, args.grid_size, args.grid_size)
    if args.planes:
        planes = PlaneStack(tuple(args.planes))
        out = group_warp_heads(hm, scene.intr, scene.pose, grid, planes, AttentionWeights.uniform(len(planes), grid.shape))
    else:
        out = warp_to_bev(hm, scene.intr, scene.pose, grid, args.plane_height)
    io.write_grid(out, args.out)


def cmd_risk(args) -> None:
    bev = io.read_grid(args.input)
    cfg = _risk_cfg(args)
    risk = risk_map(bev, cfg)
    mask = risk_mask(risk, cfg)
    if args.out:
        io.write_grid(risk, args.out)
    if args.mask_png:
        io.save_png(mask, args.mask_png)
    if args.risk_png:
        io.save_png(risk.values, args.risk_png)
    summary = {
        "global_risk": global_risk(bev, cfg, risk),
        "radius_px": cfg.radius_px(bev.grid.scale_m_per_px),
        "mask_area_px": int(np.count_nonzero(mask)),
    }
    sys.stdout.write(io.dumps(summary))


def _pair_files(pred: Path, gt: Path, pattern: str) -> list[tuple[str, Path, Path]]:
    if gt.is_file():
        return [(gt.name, pred, gt)]
    pairs = []
    for g in sorted(gt.glob(pattern)):
        rel = g.relative_to(gt)
        p = pred / rel
        if not p.exists() and p.with_suffix(".json").exists():
            p = p.with_suffix(".json")
        if not p.exists():
            raise CliError(EXIT_CONFIG, f"no prediction for {rel}")
        pairs.append((str(rel), p, g))
    if not pairs:
        raise CliError(EXIT_CONFIG, f"no ground-truth files match {pattern!r} under {gt}")
    return pairs


def _load_pred(path: Path, gt_map, raster_cfg):
    """A predicted BEV grid, or world locations rasterized onto the ground-truth grid."""
    if path.suffix != ".json":
        return io.read_grid(path), None
    obj = json.loads(path.read_text())
    locs = np.asarray(obj["locations"], dtype=np.float64).reshape(-1, 2)
    grid = gt_map.grid
    px = world_from_bev(grid).inverse().apply(locs) if len(locs) else np.zeros((0, 2))
    pred = rasterize(KeypointSet(px, Frame.BEV), grid.shape, raster_cfg, grid=grid)
    return pred, KeypointSet(locs, Frame.WORLD)


def cmd_evaluate(args) -> None:
    pred_root, gt_root = Path(args.pred), Path(args.gt)
    for p in (pred_root, gt_root):
        if not p.exists():
            raise CliError(EXIT_CONFIG, f"path not found: {p}")
    items = []
    for name, p, g in _pair_files(pred_root, gt_root, args.pattern):
        gt_map = io.read_grid(g)
        pred_map, locs = _load_pred(p, gt_map, _raster_cfg(args))
        if pred_map.frame is not Frame.BEV or gt_map.frame is not Frame.BEV:
            raise FrameMismatchError(f"{name}: evaluation needs BEV grids")
        if pred_map.grid.scale_m_per_px != gt_map.grid.scale_m_per_px:
            raise DimensionMismatchError(f"{name}: prediction and ground truth scales differ")
        # share the anchor so world coordinates of both maps coincide
        pred_map = type(pred_map)(pred_map.values, Frame.BEV, gt_map.grid) if pred_map.shape == gt_map.shape else pred_map
        items.append((name, pred_map, gt_map, locs))
    report = evaluate_batch(items, _risk_cfg(args), jobs=args.jobs)
    report["config"] = {"d0_m": args.d0, "r0": args.r0}
    text = io.dumps(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bevkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, raster=True, risk=True, grid=True):
        if grid:
            p.add_argument("--grid-size", type=int, default=512, help="BEV raster side in pixels")
        if raster:
            p.add_argument("--sigma", type=float, default=5.0, help="Gaussian std in pixels")
        if risk:
            p.add_argument("--d0", type=float, default=1.5, help="safe distance in meters")
            p.add_argument("--r0", type=float, default=2.0, help="risk threshold (people count)")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p = sub.add_parser("simulate", help="sample synthetic scenes")
    p.add_argument("--config", help="JSON file of SceneConfig fields")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, help="exact person count")
    p.add_argument("--count", type=int, default=1, help="number of scenes (seeds seed..seed+count-1)")
    p.add_argument("--no-annotations", action="store_true")
    p.add_argument("--out", required=True, help="scene file, or directory when --count > 1")
    common(p, raster=False, risk=False, grid=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("groundtruth", help="ground-truth maps and risk report for scenes")
    p.add_argument("scenes", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="accepted for interface symmetry; unused")
    common(p)
    p.set_defaults(func=cmd_groundtruth)

    p = sub.add_parser("warp", help="warp an image-view grid into BEV")
    p.add_argument("input")
    p.add_argument("--scene", required=True)
    p.add_argument("--plane-height", type=float, default=0.0)
    p.add_argument("--planes", type=float, nargs="+", help="head plane heights for a grouped warp")
    p.add_argument("--out", required=True)
    common(p, raster=False, risk=False)
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("risk", help="local risk map and global risk of a BEV grid")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--mask-png")
    p.add_argument("--risk-png")
    common(p, raster=False, grid=False)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("evaluate", help="score predicted BEV maps against ground truth")
    p.add_argument("--pred", required=True, help="grid file, locations JSON, or directory")
    p.add_argument("--gt", required=True, help="grid file or directory")
    p.add_argument("--pattern", default="**/M_bev.bevg", help="ground-truth glob in directory mode")
    p.add_argument("--out")
    common(p, grid=False)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("BEVKIT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("bevkit: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except CliError as exc:
        print(f"bevkit: {exc}", file=sys.stderr)
        return exc.code
    except (DegenerateGeometryError, DegeneratePlaneError, KernelTooLargeError) as exc:
        print(f"bevkit: degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (DimensionMismatchError, FrameMismatchError) as exc:
        print(f"bevkit: mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (io.GridFormatError, FileNotFoundError, jsonschema.ValidationError) as exc:
        print(f"bevkit: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
