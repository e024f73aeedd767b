"""Command-line interface: each pipeline stage is a subcommand.

All subcommands take `--config <path>` plus optional `--seed` / `--out`
overrides; stage errors exit nonzero with the failing stage named.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .cameras import load_camera
from .config import load_config
from .errors import CalibrationError
from .images import load_gray, save_rgb
from .overlay import render_overlay
from .pointcloud import load_cloud


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the config output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lccalib",
        description="Target-less single-shot LiDAR-camera extrinsic calibration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, descr in [
        ("preprocess", "densify point clouds and equalize intensities"),
        ("fov", "estimate the LiDAR field of view and pick the virtual camera model"),
        ("render", "render LiDAR intensity images and index maps"),
        ("init-guess", "estimate an initial transform from correspondences"),
        ("calibrate", "fine registration by information-distance minimization"),
        ("run", "run every stage in order"),
    ]:
        p = sub.add_parser(name, help=descr)
        _add_common(p)
        if name == "preprocess":
            p.add_argument("--voxel-size", type=float, default=None)
            p.add_argument("--max-points-per-voxel", type=int, default=None)
            p.add_argument("--deskew", choices=["on", "off"], default=None)

    p = sub.add_parser("overlay", help="render the camera image with projected points")
    _add_common(p)
    p.add_argument(
        "--transform",
        default=None,
        help="transform JSON to visualize (default: calibration result, then init guess)",
    )
    p.add_argument("--output", default=None, help="output PNG path")

    p = sub.add_parser("serve", help="serve the manual annotation UI and HTTP API")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _load(args) -> "pipeline.PipelineConfig":
    config = load_config(args.config, seed=args.seed, output_dir=args.out)
    ivox = dict(config.ivox)
    if getattr(args, "voxel_size", None) is not None:
        ivox["voxel_size"] = args.voxel_size
    if getattr(args, "max_points_per_voxel", None) is not None:
        ivox["max_points_per_voxel"] = args.max_points_per_voxel
    ct_icp = config.ct_icp
    if getattr(args, "deskew", None) is not None:
        ct_icp = replace(ct_icp, deskew=args.deskew == "on")
    return replace(config, ivox=ivox, ct_icp=ct_icp)


def _run_stage(name: str, fn, *args):
    try:
        return fn(*args)
    except CalibrationError as exc:
        print(f"[{name}] failed: {exc}", file=sys.stderr)
        raise SystemExit(1)


def _overlay_command(args) -> None:
    config = _load(args)
    if args.transform is not None:
        data = json.loads(Path(args.transform).read_text())
    else:
        for candidate in ("calibration/result.json", "init_guess/transform.json"):
            path = config.output_dir / candidate
            if path.is_file():
                data = json.loads(path.read_text())
                break
        else:
            print("[overlay] failed: no transform available; run init-guess or calibrate",
                  file=sys.stderr)
            raise SystemExit(1)
    transform = pipeline.transform_from_dict(data["T_camera_lidar"])
    camera = load_camera(config.camera_path)
    cloud = load_cloud(config.output_dir / "preprocess" / "pair_00" / "cloud.ply")
    image = load_gray(config.output_dir / "preprocess" / "pair_00" / "image.png")
    out = Path(args.output) if args.output else config.output_dir / "overlay.png"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_rgb(render_overlay(cloud, image, camera, transform), out)
    print(out)


def main(argv=None) -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        config = _run_stage("serve", _load, args)
        from .server import serve

        serve(config, host=args.host, port=args.port)
        return
    if args.command == "overlay":
        _run_stage("overlay", _overlay_command, args)
        return

    config = _run_stage(args.command, _load, args)
    if args.command == "preprocess":
        _run_stage("preprocess", pipeline.stage_preprocess, config)
    elif args.command == "fov":
        fov = _run_stage("fov", pipeline.stage_fov, config)
        print(f"estimated FoV: {fov:.1f} deg")
    elif args.command == "render":
        _run_stage("render", pipeline.stage_render, config)
    elif args.command == "init-guess":
        transform = _run_stage("init-guess", pipeline.stage_init_guess, config)
        print(transform)
    elif args.command == "calibrate":
        result = _run_stage("calibrate", pipeline.stage_calibrate, config)
        print(result)
    elif args.command == "run":
        result = _run_stage("run", pipeline.run_pipeline, config)
        print(result)


if __name__ == "__main__":
    main()
