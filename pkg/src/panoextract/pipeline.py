"""End-to-end extraction: geotagged photo in, centered building crops out.

Two-pass structure: pass 1 aims a wide view from each panorama at the photo's
GPS position and detects the building to get one bearing per panorama; the
bearings are triangulated to the building's true position; pass 2 re-aims a
tightened view at that position, re-detects, and crops.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import imageio
from .detector import Detection, DetectorSpec, ExternalDetector, detect, select_primary
from .errors import (
    DegenerateGeometry,
    MalformedExif,
    MissingGeotag,
    OutOfTangentRange,
    PanoExtractError,
    ProviderUnavailable,
)
from .geodesy import (
    EnuPoint,
    GeoPoint,
    Ray2D,
    enu_to_geo,
    geo_to_enu,
    haversine_distance,
    triangulate_rays,
    wrap360,
)
from .panosphere import Panorama, PanoramaMeta
from .projector import ViewSpec, pixel_to_world_bearing, plan_optimal_view, render_view
from .provider import ProviderConfig, make_provider

GPS_IFD_TAG = 34853


@dataclass
class PipelineConfig:
    photo_path: str | Path
    provider: ProviderConfig
    detector: DetectorSpec
    out_dir: str | Path
    k_panos: int = 3
    first_pass_hfov_deg: float = 90.0
    crop_pad_fraction: float = 0.10
    min_rays_for_triangulation: int = 2
    view_width_px: int = 640
    view_height_px: int = 640
    keep_intermediates: bool = False

    def __post_init__(self):
        if self.k_panos < 1:
            raise ValueError("k_panos must be >= 1")
        if not (0.0 <= self.crop_pad_fraction <= 1.0):
            raise ValueError("crop_pad_fraction must be in [0, 1]")


@dataclass(frozen=True)
class PassRecord:
    view: ViewSpec
    detection: Detection | None


@dataclass(frozen=True)
class PanoRecord:
    pano_id: str
    distance_m: float
    pass1: PassRecord | None
    ray_bearing_deg: float | None
    pass2: PassRecord | None
    crop_path: str | None


@dataclass(frozen=True)
class ExtractionReport:
    photo_gps: GeoPoint
    panos: tuple[PanoRecord, ...]
    building_location: GeoPoint
    location_source: str  # "triangulated" or "fallback_photo_gps"
    rms_residual_m: float | None
    status: str  # "ok", "fallback_photo_gps", "no_detection"

    def to_dict(self) -> dict:
        def geo(p: GeoPoint) -> dict:
            return {"lat_deg": p.lat_deg, "lon_deg": p.lon_deg}

        def view(v: ViewSpec) -> dict:
            return {"yaw_deg": v.yaw_deg, "pitch_deg": v.pitch_deg,
                    "hfov_deg": v.hfov_deg, "width_px": v.width_px,
                    "height_px": v.height_px}

        def det(d: Detection | None) -> dict | None:
            if d is None:
                return None
            return {"bbox_xywh": list(d.bbox_xywh), "score": d.score, "label": d.label}

        def pr(p: PassRecord | None) -> dict | None:
            if p is None:
                return None
            return {"view": view(p.view), "detection": det(p.detection)}

        return {
            "photo_gps": geo(self.photo_gps),
            "panos": [
                {
                    "pano_id": r.pano_id,
                    "distance_m": r.distance_m,
                    "pass1": pr(r.pass1),
                    "ray_bearing_deg": r.ray_bearing_deg,
                    "pass2": pr(r.pass2),
                    "crop_path": r.crop_path,
                }
                for r in self.panos
            ],
            "building_location": geo(self.building_location),
            "location_source": self.location_source,
            "rms_residual_m": self.rms_residual_m,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExtractionReport":
        def geo(d: dict) -> GeoPoint:
            return GeoPoint(d["lat_deg"], d["lon_deg"])

        def view(d: dict) -> ViewSpec:
            return ViewSpec(yaw_deg=d["yaw_deg"], pitch_deg=d["pitch_deg"],
                            hfov_deg=d["hfov_deg"], width_px=d["width_px"],
                            height_px=d["height_px"])

        def det(d: dict | None) -> Detection | None:
            if d is None:
                return None
            return Detection(bbox_xywh=tuple(d["bbox_xywh"]), score=d["score"],
                             label=d["label"])

        def pr(d: dict | None) -> PassRecord | None:
            if d is None:
                return None
            return PassRecord(view=view(d["view"]), detection=det(d["detection"]))

        return cls(
            photo_gps=geo(doc["photo_gps"]),
            panos=tuple(
                PanoRecord(
                    pano_id=r["pano_id"],
                    distance_m=r["distance_m"],
                    pass1=pr(r["pass1"]),
                    ray_bearing_deg=r["ray_bearing_deg"],
                    pass2=pr(r["pass2"]),
                    crop_path=r["crop_path"],
                )
                for r in doc["panos"]
            ),
            building_location=geo(doc["building_location"]),
            location_source=doc["location_source"],
            rms_residual_m=doc["rms_residual_m"],
            status=doc["status"],
        )


def _dms_to_degrees(dms, ref: str, negative_refs: str) -> float:
    deg, minutes, seconds = (float(x) for x in dms)
    value = deg + minutes / 60.0 + seconds / 3600.0
    if ref in negative_refs:
        value = -value
    return value


def read_geotag(photo_path: str | Path) -> GeoPoint:
    """Decode the EXIF GPS IFD of a JPEG into a GeoPoint."""
    try:
        with Image.open(photo_path) as img:
            exif = img.getexif()
            gps = exif.get_ifd(GPS_IFD_TAG)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise MalformedExif(str(exc)) from exc
    if not gps or 2 not in gps or 4 not in gps:
        raise MissingGeotag(f"{photo_path} has no EXIF GPS position")
    try:
        lat = _dms_to_degrees(gps[2], str(gps.get(1, "N")).strip(), "S")
        lon = _dms_to_degrees(gps[4], str(gps.get(3, "E")).strip(), "W")
        return GeoPoint(lat, lon)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise MalformedExif(f"bad GPS rationals in {photo_path}: {exc}") from exc


def detection_to_ray(view: ViewSpec, det: Detection, pano_meta: PanoramaMeta,
                     origin: GeoPoint) -> Ray2D:
    """Bearing ray from the panorama position through the detection center."""
    cu, cv = det.center
    bearing = pixel_to_world_bearing(view, cu, cv)
    return Ray2D(origin=geo_to_enu(origin, pano_meta.location), bearing_deg=bearing)


def crop_detection(image: np.ndarray, det: Detection, pad_fraction: float) -> np.ndarray:
    """Cut out the bbox expanded by pad_fraction on every side, clamped to bounds."""
    x, y, w, h = det.bbox_xywh
    pad_x = int(round(pad_fraction * w))
    pad_y = int(round(pad_fraction * h))
    img_h, img_w = image.shape[:2]
    x0 = max(0, x - pad_x)
    y0 = max(0, y - pad_y)
    x1 = min(img_w, x + w + pad_x)
    y1 = min(img_h, y + h + pad_y)
    return image[y0:y1, x0:x1].copy()


def _bbox_angular_width_deg(view: ViewSpec, det: Detection) -> float:
    """Apparent angular width of the bbox through the view's pinhole model."""
    x, y, w, h = det.bbox_xywh
    cy = y + h / 2.0
    left = pixel_to_world_bearing(view, max(0.0, float(x)), cy)
    right = pixel_to_world_bearing(view, min(float(view.width_px), float(x + w)), cy)
    span = wrap360(right - left)
    return span if span <= 180.0 else 360.0 - span


def run_extraction(config: PipelineConfig, provider=None, transport=None) -> ExtractionReport:
    """Run the full photo-to-crops pipeline; writes crops and report.json to
    out_dir and returns the parsed report."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    photo_gps = read_geotag(config.photo_path)
    if provider is None:
        provider = make_provider(config.provider, transport=transport)

    result = provider.nearest_panoramas(photo_gps, config.k_panos)

    external = None
    if config.detector.kind == "external":
        external = ExternalDetector(config.detector.command,
                                    timeout_s=config.detector.timeout_s)
    try:
        panoramas: dict[str, Panorama] = {}
        pass1: dict[str, PassRecord] = {}
        rays: dict[str, Ray2D] = {}

        for meta in result.panos:
            try:
                pano = provider.fetch_panorama(meta)
                view = plan_optimal_view(
                    meta, photo_gps,
                    width_px=config.view_width_px, height_px=config.view_height_px,
                )
                view = ViewSpec(yaw_deg=view.yaw_deg, pitch_deg=view.pitch_deg,
                                hfov_deg=config.first_pass_hfov_deg,
                                width_px=view.width_px, height_px=view.height_px)
                projected = render_view(pano, view)
                if config.keep_intermediates:
                    imageio.write_png(out_dir / f"view1_{meta.pano_id}.png",
                                      projected.pixels)
                primary = select_primary(
                    detect(projected.pixels, config.detector, external=external),
                    view.width_px,
                )
            except ProviderUnavailable:
                raise
            except PanoExtractError:
                continue  # degrade this panorama only
            panoramas[meta.pano_id] = pano
            pass1[meta.pano_id] = PassRecord(view=view, detection=primary)
            if primary is not None:
                rays[meta.pano_id] = detection_to_ray(view, primary, meta, photo_gps)

        building_location = photo_gps
        location_source = "fallback_photo_gps"
        rms_residual_m = None
        if len(rays) >= config.min_rays_for_triangulation:
            try:
                tri = triangulate_rays(list(rays.values()))
                building_location = enu_to_geo(photo_gps, tri.point)
                location_source = "triangulated"
                rms_residual_m = tri.rms_residual_m
            except (DegenerateGeometry, OutOfTangentRange):
                pass  # keep the photo-GPS fallback

        records = []
        any_pass2 = False
        for meta in result.panos:
            p1 = pass1.get(meta.pano_id)
            distance = haversine_distance(photo_gps, meta.location)
            ray = rays.get(meta.pano_id)
            if p1 is None or meta.pano_id not in panoramas:
                records.append(PanoRecord(
                    pano_id=meta.pano_id, distance_m=distance, pass1=p1,
                    ray_bearing_deg=None, pass2=None, crop_path=None,
                ))
                continue

            prior_width = None
            if p1.detection is not None:
                prior_width = _bbox_angular_width_deg(p1.view, p1.detection)
            p2 = None
            crop_path = None
            try:
                view2 = plan_optimal_view(
                    meta, building_location, prior_bbox_angular_width_deg=prior_width,
                    width_px=config.view_width_px, height_px=config.view_height_px,
                )
                projected2 = render_view(panoramas[meta.pano_id], view2)
                if config.keep_intermediates:
                    imageio.write_png(out_dir / f"view2_{meta.pano_id}.png",
                                      projected2.pixels)
                primary2 = select_primary(
                    detect(projected2.pixels, config.detector, external=external),
                    view2.width_px,
                )
                p2 = PassRecord(view=view2, detection=primary2)
                if primary2 is not None:
                    any_pass2 = True
                    crop = crop_detection(projected2.pixels, primary2,
                                          config.crop_pad_fraction)
                    crop_path = f"crop_{meta.pano_id}.png"
                    imageio.write_png(out_dir / crop_path, crop)
            except PanoExtractError:
                pass

            records.append(PanoRecord(
                pano_id=meta.pano_id, distance_m=distance, pass1=p1,
                ray_bearing_deg=ray.bearing_deg if ray is not None else None,
                pass2=p2, crop_path=crop_path,
            ))
    finally:
        if external is not None:
            external.close()

    if not any_pass2:
        status = "no_detection"
    elif location_source == "triangulated":
        status = "ok"
    else:
        status = "fallback_photo_gps"

    report = ExtractionReport(
        photo_gps=photo_gps,
        panos=tuple(records),
        building_location=building_location,
        location_source=location_source,
        rms_residual_m=rms_residual_m,
        status=status,
    )
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    return report
