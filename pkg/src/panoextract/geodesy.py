"""Spherical-earth geodesy and bearing-ray triangulation.

All global math assumes a sphere of radius 6 371 000 m; bearings are degrees
clockwise from true north. Local geometry lives in a flat East-North tangent
plane anchored at an explicit origin, valid out to 10 km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, InsufficientRays, OutOfTangentRange

EARTH_RADIUS_M = 6371000.0
TANGENT_RANGE_M = 10000.0

# Degenerate unless bearings spread by at least this much (degrees, mod 180).
MIN_BEARING_SPREAD_DEG = 0.5
MIN_NORMAL_DET = 1e-9


def wrap360(deg: float) -> float:
    """Normalize an angle to [0, 360)."""
    w = math.fmod(deg, 360.0)
    return w + 360.0 if w < 0 else w


def _wrap_lon(lon: float) -> float:
    """Normalize longitude to [-180, +180)."""
    w = math.fmod(lon + 180.0, 360.0)
    if w < 0:
        w += 360.0
    return w - 180.0


@dataclass(frozen=True)
class GeoPoint:
    """Geographic position in decimal degrees; longitude stored in [-180, 180)."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not (-90.0 <= self.lat_deg <= 90.0):
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not math.isfinite(self.lon_deg):
            raise ValueError("longitude must be finite")
        object.__setattr__(self, "lon_deg", _wrap_lon(self.lon_deg))


@dataclass(frozen=True)
class EnuPoint:
    """East/north offset in meters from a reference GeoPoint origin."""

    east_m: float
    north_m: float

    def __post_init__(self):
        if not (math.isfinite(self.east_m) and math.isfinite(self.north_m)):
            raise ValueError("ENU coordinates must be finite")


@dataclass(frozen=True)
class Ray2D:
    """Half-line in the tangent plane: origin plus bearing clockwise from north."""

    origin: EnuPoint
    bearing_deg: float

    def __post_init__(self):
        object.__setattr__(self, "bearing_deg", wrap360(self.bearing_deg))


@dataclass(frozen=True)
class TriangulationResult:
    point: EnuPoint
    rms_residual_m: float
    ray_count: int


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points."""
    la1, la2 = math.radians(a.lat_deg), math.radians(b.lat_deg)
    dlat = la2 - la1
    dlon = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dlat / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


def initial_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Forward azimuth from a toward b, degrees in [0, 360)."""
    if haversine_distance(a, b) <= 1e-9:
        raise DegenerateGeometry("bearing undefined for coincident points")
    la1, la2 = math.radians(a.lat_deg), math.radians(b.lat_deg)
    dlon = math.radians(b.lon_deg - a.lon_deg)
    y = math.sin(dlon) * math.cos(la2)
    x = math.cos(la1) * math.sin(la2) - math.sin(la1) * math.cos(la2) * math.cos(dlon)
    return wrap360(math.degrees(math.atan2(y, x)))


def geo_to_enu(origin: GeoPoint, p: GeoPoint) -> EnuPoint:
    """Project p onto the local tangent plane at origin (equirectangular approximation)."""
    if haversine_distance(origin, p) >= TANGENT_RANGE_M:
        raise OutOfTangentRange(f"{p} farther than {TANGENT_RANGE_M} m from origin")
    dlon = p.lon_deg - origin.lon_deg
    if dlon >= 180.0:
        dlon -= 360.0
    elif dlon < -180.0:
        dlon += 360.0
    east = math.radians(dlon) * EARTH_RADIUS_M * math.cos(math.radians(origin.lat_deg))
    north = math.radians(p.lat_deg - origin.lat_deg) * EARTH_RADIUS_M
    return EnuPoint(east, north)


def enu_to_geo(origin: GeoPoint, e: EnuPoint) -> GeoPoint:
    """Exact inverse of geo_to_enu for offsets within tangent range."""
    if math.hypot(e.east_m, e.north_m) >= TANGENT_RANGE_M:
        raise OutOfTangentRange(f"{e} farther than {TANGENT_RANGE_M} m from origin")
    lat = origin.lat_deg + math.degrees(e.north_m / EARTH_RADIUS_M)
    lon = origin.lon_deg + math.degrees(
        e.east_m / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat_deg)))
    )
    return GeoPoint(lat, lon)


def triangulate_rays(rays: list[Ray2D]) -> TriangulationResult:
    """Least-squares intersection of bearing rays in the tangent plane.

    Minimizes the sum of squared perpendicular distances from the solution
    point to each ray's supporting line via the 2x2 normal equations.
    """
    if len(rays) < 2:
        raise InsufficientRays(f"need at least 2 rays, got {len(rays)}")

    bearings = [r.bearing_deg for r in rays]
    spread = max(
        min(abs(b1 - b2) % 180.0, 180.0 - abs(b1 - b2) % 180.0)
        for i, b1 in enumerate(bearings)
        for b2 in bearings[i + 1:]
    )
    if spread < MIN_BEARING_SPREAD_DEG:
        raise DegenerateGeometry(
            f"bearing spread {spread:.4f} deg below {MIN_BEARING_SPREAD_DEG} deg"
        )

    a_mat = np.zeros((2, 2))
    b_vec = np.zeros(2)
    projs = []
    for ray in rays:
        beta = math.radians(ray.bearing_deg)
        d = np.array([math.sin(beta), math.cos(beta)])  # (east, north)
        p = np.array([ray.origin.east_m, ray.origin.north_m])
        proj = np.eye(2) - np.outer(d, d)
        a_mat += proj
        b_vec += proj @ p
        projs.append((proj, p))

    if abs(np.linalg.det(a_mat)) < MIN_NORMAL_DET:
        raise DegenerateGeometry("normal equations singular (parallel rays)")

    x = np.linalg.solve(a_mat, b_vec)
    sq_sum = sum(float((x - p) @ proj @ (x - p)) for proj, p in projs)
    rms = math.sqrt(max(sq_sum, 0.0) / len(rays))
    return TriangulationResult(
        point=EnuPoint(float(x[0]), float(x[1])),
        rms_residual_m=rms,
        ray_count=len(rays),
    )
