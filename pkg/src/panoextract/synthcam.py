"""Synthetic street scenes: flat ground, sky, and vertical colored walls,
rendered to equirectangular panoramas with exact, closed-form geometry.

Gives the rest of the pipeline a ground truth to verify against without any
live imagery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, InvalidDimensions
from .geodesy import EnuPoint, GeoPoint, geo_to_enu, wrap360
from .panosphere import Panorama, PanoramaMeta

DEFAULT_CAMERA_HEIGHT_M = 2.5


@dataclass(frozen=True)
class Wall:
    """Vertical billboard: base segment p0-p1 at ground level, extruded up."""

    p0: EnuPoint
    p1: EnuPoint
    height_m: float
    rgb: tuple[int, int, int]

    def __post_init__(self):
        if (self.p0.east_m, self.p0.north_m) == (self.p1.east_m, self.p1.north_m):
            raise ValueError("wall base segment is degenerate")
        if self.height_m <= 0:
            raise ValueError("wall height must be positive")

    def base_midpoint(self) -> EnuPoint:
        return EnuPoint((self.p0.east_m + self.p1.east_m) / 2.0,
                        (self.p0.north_m + self.p1.north_m) / 2.0)


@dataclass(frozen=True)
class Scene:
    origin: GeoPoint
    ground_rgb: tuple[int, int, int]
    sky_rgb: tuple[int, int, int]
    walls: tuple[Wall, ...] = ()

    def __post_init__(self):
        if tuple(self.ground_rgb) == tuple(self.sky_rgb):
            raise ValueError("ground and sky colors must differ")
        object.__setattr__(self, "walls", tuple(self.walls))


def render_synthetic_pano(
    scene: Scene,
    camera: GeoPoint,
    camera_height_m: float = DEFAULT_CAMERA_HEIGHT_M,
    heading_deg: float = 0.0,
    width_px: int = 1024,
    height_px: int = 512,
    pano_id: str = "synth",
    capture_date: str = "",
) -> Panorama:
    """Ray-cast the scene from the camera into an equirectangular raster.

    Per pixel: nearest wall hit wins, then the ground plane for downward rays,
    then sky.
    """
    if width_px != 2 * height_px:
        raise InvalidDimensions(f"panorama must be 2:1, got {width_px}x{height_px}")
    if camera_height_m <= 0:
        raise ValueError("camera height must be positive")

    cam = geo_to_enu(scene.origin, camera)

    # Per-pixel directions, computed directly from the equirectangular mapping.
    u = np.arange(width_px, dtype=np.float64) + 0.5
    v = np.arange(height_px, dtype=np.float64) + 0.5
    bearing = np.mod(heading_deg + (u / width_px) * 360.0 - 180.0, 360.0)
    pitch = 90.0 - (v / height_px) * 180.0

    br = np.radians(bearing)[None, :]
    pr = np.radians(pitch)[:, None]
    de = np.sin(br) * np.cos(pr)   # east
    dn = np.cos(br) * np.cos(pr)   # north
    du = np.broadcast_to(np.sin(pr), de.shape)  # up

    hit_t = np.full(de.shape, np.inf)
    color = np.empty((height_px, width_px, 3), dtype=np.uint8)
    color[:] = scene.sky_rgb

    # Ground plane z = 0 for downward rays.
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = np.where(du < 0, -camera_height_m / du, np.inf)
    ground_hit = np.isfinite(t_ground)
    hit_t = np.where(ground_hit, t_ground, hit_t)
    color[ground_hit] = scene.ground_rgb

    for wall in scene.walls:
        we = wall.p1.east_m - wall.p0.east_m
        wn = wall.p1.north_m - wall.p0.north_m
        # Solve cam + t * d_horizontal = p0 + s * w  (2x2 per pixel).
        det = de * (-wn) - dn * (-we)
        rhs_e = wall.p0.east_m - cam.east_m
        rhs_n = wall.p0.north_m - cam.north_m
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rhs_e * (-wn) - rhs_n * (-we)) / det
            s = (de * rhs_n - dn * rhs_e) / det
        z = camera_height_m + t * du
        valid = (
            (np.abs(det) > 1e-15)
            & (t > 1e-9)
            & (s >= 0.0) & (s <= 1.0)
            & (z >= 0.0) & (z <= wall.height_m)
            & (t < hit_t)
        )
        hit_t = np.where(valid, t, hit_t)
        color[valid] = wall.rgb

    location = camera
    meta = PanoramaMeta(
        pano_id=pano_id,
        location=location,
        heading_deg=wrap360(heading_deg),
        capture_date=capture_date,
        width_px=width_px,
        height_px=height_px,
    )
    return Panorama(meta=meta, pixels=color)


def load_scene(path) -> tuple[Scene, list[tuple[GeoPoint, float]]]:
    """Parse a scene JSON file: Scene/Wall fields plus a cameras array of
    {lat, lon, heading_deg} capture positions."""
    import json
    from pathlib import Path

    doc = json.loads(Path(path).read_text())
    origin = GeoPoint(doc["origin"]["lat"], doc["origin"]["lon"])
    walls = tuple(
        Wall(
            p0=EnuPoint(*w["p0"]),
            p1=EnuPoint(*w["p1"]),
            height_m=w["height_m"],
            rgb=tuple(w["rgb"]),
        )
        for w in doc.get("walls", [])
    )
    scene = Scene(
        origin=origin,
        ground_rgb=tuple(doc["ground_rgb"]),
        sky_rgb=tuple(doc["sky_rgb"]),
        walls=walls,
    )
    cameras = [
        (GeoPoint(c["lat"], c["lon"]), float(c.get("heading_deg", 0.0)))
        for c in doc.get("cameras", [])
    ]
    return scene, cameras


def write_fixture(
    scene: Scene,
    cameras: list[tuple[GeoPoint, float]],
    out_dir,
    width_px: int = 1024,
    height_px: int = 512,
    camera_height_m: float = DEFAULT_CAMERA_HEIGHT_M,
) -> list[Panorama]:
    """Render one panorama per camera and emit a provider-compatible fixture
    directory (PNGs + index.json)."""
    import json
    from pathlib import Path

    from . import imageio

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    panoramas = []
    index = []
    for i, (camera, heading) in enumerate(cameras):
        pano_id = f"synth_{i:03d}"
        pano = render_synthetic_pano(
            scene, camera,
            camera_height_m=camera_height_m,
            heading_deg=heading,
            width_px=width_px, height_px=height_px,
            pano_id=pano_id,
        )
        image_name = f"{pano_id}.png"
        imageio.write_png(out_dir / image_name, pano.pixels)
        meta = pano.meta
        index.append({
            "pano_id": meta.pano_id,
            "lat": meta.location.lat_deg,
            "lon": meta.location.lon_deg,
            "heading_deg": meta.heading_deg,
            "date": meta.capture_date,
            "width_px": meta.width_px,
            "height_px": meta.height_px,
            "image": image_name,
        })
        panoramas.append(pano)
    (out_dir / "index.json").write_text(json.dumps(index, indent=2))
    return panoramas


def ground_truth_bearing(scene_wall: Wall, camera: GeoPoint, origin: GeoPoint) -> float:
    """Bearing from the camera to the wall-base midpoint, the triangulation oracle."""
    cam = geo_to_enu(origin, camera)
    mid = scene_wall.base_midpoint()
    de = mid.east_m - cam.east_m
    dn = mid.north_m - cam.north_m
    if math.hypot(de, dn) < 1e-9:
        raise DegenerateGeometry("camera sits on the wall midpoint")
    return wrap360(math.degrees(math.atan2(de, dn)))
