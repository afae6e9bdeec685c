"""Command-line surface.

Subcommands: extract (full pipeline), fetch (panoramas only), project (render
one view from a panorama file), locate (triangulate a rays file), simulate
(render a synthetic scene into a provider fixture).

stdout carries only produced file paths, one per line; diagnostics go to
stderr. Exit codes: 0 success, 2 pipeline finished with no detection,
64 usage error, 65 bad input data, 69 provider unavailable.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from . import imageio, synthcam
from .detector import DetectorSpec
from .errors import (
    EmptyCoverage,
    MalformedExif,
    MissingGeotag,
    PanoExtractError,
    ProviderUnavailable,
)
from .geodesy import EnuPoint, GeoPoint, Ray2D, triangulate_rays
from .panosphere import Panorama, PanoramaMeta
from .pipeline import PipelineConfig, read_geotag, run_extraction
from .projector import ViewSpec, render_view
from .provider import ProviderConfig, make_provider

EXIT_OK = 0
EXIT_NO_DETECTION = 2
EXIT_USAGE = 64
EXIT_BAD_INPUT = 65
EXIT_PROVIDER = 69


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_provider(value: str, zoom: int, api_key_env: str, cache_dir: str) -> ProviderConfig:
    if value == "streetview":
        return ProviderConfig(kind="streetview", zoom=zoom,
                              api_key_env=api_key_env, cache_dir=cache_dir)
    if value.startswith("fixture:"):
        return ProviderConfig(kind="fixture", zoom=zoom, cache_dir=cache_dir,
                              fixture_dir=value[len("fixture:"):])
    raise _UsageError(f"bad --provider {value!r}; use streetview or fixture:DIR")


def _parse_detector(value: str) -> DetectorSpec:
    if value.startswith("chroma:"):
        hexrgb = value[len("chroma:"):]
        if len(hexrgb) != 6:
            raise _UsageError(f"bad --detector {value!r}; chroma wants RRGGBB hex")
        try:
            rgb = tuple(int(hexrgb[i:i + 2], 16) for i in (0, 2, 4))
        except ValueError:
            raise _UsageError(f"bad --detector {value!r}; chroma wants RRGGBB hex")
        return DetectorSpec(kind="chroma", chroma_rgb=rgb)
    if value.startswith("exec:"):
        command = tuple(shlex.split(value[len("exec:"):]))
        if not command:
            raise _UsageError("exec detector needs a command")
        return DetectorSpec(kind="external", command=command)
    raise _UsageError(f"bad --detector {value!r}; use chroma:RRGGBB or exec:CMD")


def _build_parser() -> _Parser:
    parser = _Parser(prog="panoextract")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="run the full extraction pipeline")
    ex.add_argument("--photo", required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--panos", type=int, default=3)
    ex.add_argument("--provider", default="streetview")
    ex.add_argument("--detector", default="chroma:DC143C")
    ex.add_argument("--zoom", type=int, default=3)
    ex.add_argument("--hfov", type=float, default=90.0)
    ex.add_argument("--api-key-env", default="GSV_API_KEY")
    ex.add_argument("--cache-dir", default=".panoextract-cache")
    ex.add_argument("--keep-intermediates", action="store_true")

    fe = sub.add_parser("fetch", help="discover and cache nearby panoramas")
    fe.add_argument("--photo")
    fe.add_argument("--lat", type=float)
    fe.add_argument("--lon", type=float)
    fe.add_argument("--panos", type=int, default=3)
    fe.add_argument("--provider", default="streetview")
    fe.add_argument("--zoom", type=int, default=3)
    fe.add_argument("--api-key-env", default="GSV_API_KEY")
    fe.add_argument("--cache-dir", default=".panoextract-cache")

    pr = sub.add_parser("project", help="render one rectilinear view from a panorama image")
    pr.add_argument("--pano", required=True, help="equirectangular image file")
    pr.add_argument("--heading", type=float, default=0.0)
    pr.add_argument("--yaw", type=float, required=True)
    pr.add_argument("--pitch", type=float, default=0.0)
    pr.add_argument("--hfov", type=float, default=90.0)
    pr.add_argument("--width", type=int, default=640)
    pr.add_argument("--height", type=int, default=640)
    pr.add_argument("--out", required=True)

    lo = sub.add_parser("locate", help="triangulate a JSON rays file")
    lo.add_argument("--rays", required=True,
                    help='JSON array of {"origin": [east, north], "bearing_deg": b}')
    lo.add_argument("--out", required=True)

    si = sub.add_parser("simulate", help="render a synthetic scene into a provider fixture")
    si.add_argument("--scene", required=True)
    si.add_argument("--out", required=True)
    si.add_argument("--width", type=int, default=1024)
    si.add_argument("--height", type=int, default=512)
    return parser


def _cmd_extract(args) -> int:
    config = PipelineConfig(
        photo_path=args.photo,
        provider=_parse_provider(args.provider, args.zoom, args.api_key_env,
                                 args.cache_dir),
        detector=_parse_detector(args.detector),
        out_dir=args.out,
        k_panos=args.panos,
        first_pass_hfov_deg=args.hfov,
        keep_intermediates=args.keep_intermediates,
    )
    report = run_extraction(config)
    print(str(Path(args.out) / "report.json"))
    return EXIT_NO_DETECTION if report.status == "no_detection" else EXIT_OK


def _cmd_fetch(args) -> int:
    if args.photo is not None:
        center = read_geotag(args.photo)
    elif args.lat is not None and args.lon is not None:
        center = GeoPoint(args.lat, args.lon)
    else:
        raise _UsageError("fetch needs --photo or both --lat and --lon")
    config = _parse_provider(args.provider, args.zoom, args.api_key_env, args.cache_dir)
    provider = make_provider(config)
    result = provider.nearest_panoramas(center, args.panos)
    if result.short_count:
        print(f"warning: only {len(result.panos)} panoramas available", file=sys.stderr)
    for meta in result.panos:
        provider.fetch_panorama(meta)
        print(provider.cache.image_path(meta.pano_id, config.zoom))
    return EXIT_OK


def _cmd_project(args) -> int:
    pixels = imageio.read_image(args.pano)
    h, w = pixels.shape[:2]
    meta = PanoramaMeta(pano_id="cli", location=GeoPoint(0.0, 0.0),
                        heading_deg=args.heading % 360.0, capture_date="",
                        width_px=w, height_px=h)
    view = ViewSpec(yaw_deg=args.yaw, pitch_deg=args.pitch, hfov_deg=args.hfov,
                    width_px=args.width, height_px=args.height)
    projected = render_view(Panorama(meta=meta, pixels=pixels), view)
    imageio.write_png(args.out, projected.pixels)
    print(args.out)
    return EXIT_OK


def _cmd_locate(args) -> int:
    try:
        entries = json.loads(Path(args.rays).read_text())
        rays = [Ray2D(origin=EnuPoint(*e["origin"]), bearing_deg=e["bearing_deg"])
                for e in entries]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: bad rays file: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    result = triangulate_rays(rays)
    Path(args.out).write_text(json.dumps({
        "east_m": result.point.east_m,
        "north_m": result.point.north_m,
        "rms_residual_m": result.rms_residual_m,
        "ray_count": result.ray_count,
    }, indent=2))
    print(args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    try:
        scene, cameras = synthcam.load_scene(args.scene)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: bad scene file: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    synthcam.write_fixture(scene, cameras, args.out,
                           width_px=args.width, height_px=args.height)
    print(str(Path(args.out) / "index.json"))
    return EXIT_OK


_COMMANDS = {
    "extract": _cmd_extract,
    "fetch": _cmd_fetch,
    "project": _cmd_project,
    "locate": _cmd_locate,
    "simulate": _cmd_simulate,
}


def run_cli(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (MissingGeotag, MalformedExif) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (ProviderUnavailable, EmptyCoverage) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except PanoExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
