"""Gnomonic (rectilinear) rendering of virtual camera views from a panorama,
and planning of the view that points a camera at the building.

Camera model: pinhole, roll fixed at 0 (gravity-aligned street imagery).
World frame is East-North-Up; bearings are degrees clockwise from north.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidFov, OutOfRaster
from .geodesy import GeoPoint, haversine_distance, initial_bearing, wrap360
from .panosphere import Panorama, PanoramaMeta, bilinear_sample

DEFAULT_HFOV_DEG = 90.0
DEFAULT_VIEW_SIZE = (640, 640)
REFINE_HFOV_MIN_DEG = 40.0
REFINE_HFOV_MAX_DEG = 100.0
REFINE_HFOV_FACTOR = 2.0
MIN_SUBJECT_DISTANCE_M = 1.0


@dataclass(frozen=True)
class ViewSpec:
    """Virtual rectilinear camera: optical-axis bearing, pitch, hfov, output size."""

    yaw_deg: float
    pitch_deg: float
    hfov_deg: float
    width_px: int
    height_px: int

    def __post_init__(self):
        object.__setattr__(self, "yaw_deg", wrap360(self.yaw_deg))
        if not (-89.0 <= self.pitch_deg <= 89.0):
            raise ValueError(f"pitch_deg {self.pitch_deg} outside [-89, 89]")
        if not (0.0 < self.hfov_deg < 180.0):
            raise InvalidFov(f"hfov_deg {self.hfov_deg} outside (0, 180)")
        if self.width_px < 8 or self.height_px < 8:
            raise ValueError("output size must be at least 8x8")


@dataclass(frozen=True)
class ProjectedImage:
    pixels: np.ndarray  # (H, W, 3) uint8
    view: ViewSpec
    source_pano_id: str

    def __post_init__(self):
        h, w = self.pixels.shape[:2]
        if (w, h) != (self.view.width_px, self.view.height_px):
            raise ValueError("raster does not match view dimensions")


def focal_length_px(width_px: int, hfov_deg: float) -> float:
    """Pinhole focal length in pixels for the given horizontal field of view."""
    if not (0.0 < hfov_deg < 180.0):
        raise InvalidFov(f"hfov_deg {hfov_deg} outside (0, 180)")
    return (width_px / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)


def _camera_basis(yaw_deg: float, pitch_deg: float):
    """Forward, right, up unit vectors of the camera in the ENU frame."""
    beta = math.radians(yaw_deg)
    phi = math.radians(pitch_deg)
    fwd = np.array([math.sin(beta) * math.cos(phi),
                    math.cos(beta) * math.cos(phi),
                    math.sin(phi)])
    right = np.array([math.cos(beta), -math.sin(beta), 0.0])
    up = np.cross(right, fwd)
    return fwd, right, up


def _world_directions(view: ViewSpec, x, y):
    """Unit ENU direction(s) through continuous image-plane offsets (x, y)."""
    f = focal_length_px(view.width_px, view.hfov_deg)
    fwd, right, up = _camera_basis(view.yaw_deg, view.pitch_deg)
    x = np.asarray(x, dtype=np.float64)[..., None]
    y = np.asarray(y, dtype=np.float64)[..., None]
    d = fwd * f + right * x - up * y
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def render_view(pano: Panorama, view: ViewSpec) -> ProjectedImage:
    """Render a rectilinear view by inverse mapping every output pixel onto the
    panorama sphere and bilinearly sampling it."""
    w, h = view.width_px, view.height_px
    cols = np.arange(w, dtype=np.float64) + 0.5 - w / 2.0
    rows = np.arange(h, dtype=np.float64) + 0.5 - h / 2.0
    x, y = np.meshgrid(cols, rows)

    d = _world_directions(view, x, y)
    bearing = np.degrees(np.arctan2(d[..., 0], d[..., 1]))
    pitch = np.degrees(np.arcsin(np.clip(d[..., 2], -1.0, 1.0)))

    meta = pano.meta
    u = np.mod(bearing - meta.heading_deg + 180.0, 360.0) / 360.0 * meta.width_px
    v = (90.0 - pitch) / 180.0 * meta.height_px

    sampled = bilinear_sample(pano, u, v)
    pixels = np.clip(np.rint(sampled), 0, 255).astype(np.uint8)
    return ProjectedImage(pixels=pixels, view=view, source_pano_id=meta.pano_id)


def pixel_to_world_bearing(view: ViewSpec, u: float, v: float) -> float:
    """Absolute bearing of the ray through continuous view coordinate (u, v)."""
    if not (0.0 <= u <= view.width_px and 0.0 <= v <= view.height_px):
        raise OutOfRaster(f"({u}, {v}) outside {view.width_px}x{view.height_px}")
    d = _world_directions(view, u - view.width_px / 2.0, v - view.height_px / 2.0)
    return wrap360(math.degrees(math.atan2(float(d[..., 0]), float(d[..., 1]))))


def plan_optimal_view(
    pano_meta: PanoramaMeta,
    building: GeoPoint,
    prior_bbox_angular_width_deg: float | None = None,
    width_px: int = DEFAULT_VIEW_SIZE[0],
    height_px: int = DEFAULT_VIEW_SIZE[1],
) -> ViewSpec:
    """Aim a horizon-level view from the panorama toward the building.

    With a prior detection, the field of view is tightened to about twice the
    building's apparent angular width (clamped to a sane range).
    """
    if haversine_distance(pano_meta.location, building) < MIN_SUBJECT_DISTANCE_M:
        raise DegenerateGeometry("building within 1 m of the panorama position")
    yaw = initial_bearing(pano_meta.location, building)
    if prior_bbox_angular_width_deg is None:
        hfov = DEFAULT_HFOV_DEG
    else:
        hfov = min(max(REFINE_HFOV_FACTOR * prior_bbox_angular_width_deg,
                       REFINE_HFOV_MIN_DEG), REFINE_HFOV_MAX_DEG)
    return ViewSpec(yaw_deg=yaw, pitch_deg=0.0, hfov_deg=hfov,
                    width_px=width_px, height_px=height_px)
