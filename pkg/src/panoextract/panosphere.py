"""Equirectangular panorama model: pixel/direction mapping, tile assembly,
seam-aware bilinear sampling.

Convention: integer pixel (i, j) has continuous center (i + 0.5, j + 0.5).
heading_deg is the absolute bearing of the panorama's center column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidDimensions, MissingTile, OutOfRaster
from .geodesy import GeoPoint, wrap360


@dataclass(frozen=True)
class PanoramaMeta:
    pano_id: str
    location: GeoPoint
    heading_deg: float
    capture_date: str  # "YYYY-MM", may be empty
    width_px: int
    height_px: int

    def __post_init__(self):
        if not self.pano_id:
            raise ValueError("pano_id must be non-empty")
        if self.width_px != 2 * self.height_px:
            raise InvalidDimensions(
                f"equirectangular raster must be 2:1, got {self.width_px}x{self.height_px}"
            )
        if not (0.0 <= self.heading_deg < 360.0):
            raise ValueError(f"heading_deg {self.heading_deg} outside [0, 360)")


@dataclass(frozen=True)
class Panorama:
    meta: PanoramaMeta
    pixels: np.ndarray  # (H, W, 3) uint8, row-major RGB

    def __post_init__(self):
        h, w = self.pixels.shape[:2]
        if (w, h) != (self.meta.width_px, self.meta.height_px):
            raise InvalidDimensions(
                f"raster {w}x{h} does not match declared {self.meta.width_px}x{self.meta.height_px}"
            )


@dataclass(frozen=True)
class SphereDir:
    """Viewing direction: bearing clockwise from north, pitch above horizon."""

    bearing_deg: float
    pitch_deg: float

    def __post_init__(self):
        object.__setattr__(self, "bearing_deg", wrap360(self.bearing_deg))
        if not (-90.0 <= self.pitch_deg <= 90.0):
            raise ValueError(f"pitch_deg {self.pitch_deg} outside [-90, 90]")


def pixel_to_direction(u: float, v: float, meta: PanoramaMeta) -> SphereDir:
    """Map a continuous raster coordinate to a sphere direction."""
    w, h = meta.width_px, meta.height_px
    if not (0.0 <= u <= w and 0.0 <= v <= h):
        raise OutOfRaster(f"({u}, {v}) outside {w}x{h}")
    bearing = wrap360(meta.heading_deg + (u / w) * 360.0 - 180.0)
    pitch = 90.0 - (v / h) * 180.0
    return SphereDir(bearing, pitch)


def direction_to_pixel(direction: SphereDir, meta: PanoramaMeta) -> tuple[float, float]:
    """Inverse of pixel_to_direction; returns a continuous (u, v)."""
    w, h = meta.width_px, meta.height_px
    u = wrap360(direction.bearing_deg - meta.heading_deg + 180.0) / 360.0 * w
    v = (90.0 - direction.pitch_deg) / 180.0 * h
    return u, v


def assemble_tiles(
    tiles: dict[tuple[int, int], np.ndarray],
    tile_size: int,
    grid_cols: int,
    grid_rows: int,
    declared_width: int,
    declared_height: int,
) -> np.ndarray:
    """Place square tiles on a grid and crop to the declared panorama size.

    tiles maps (col, row) to a (tile_size, tile_size, 3) raster.
    """
    if tile_size * grid_cols < declared_width or tile_size * grid_rows < declared_height:
        raise DimensionMismatch(
            f"{grid_cols}x{grid_rows} grid of {tile_size} px tiles cannot cover "
            f"{declared_width}x{declared_height}"
        )
    canvas = np.zeros((grid_rows * tile_size, grid_cols * tile_size, 3), dtype=np.uint8)
    for row in range(grid_rows):
        for col in range(grid_cols):
            tile = tiles.get((col, row))
            if tile is None:
                raise MissingTile(col, row)
            if tile.shape[:2] != (tile_size, tile_size):
                raise DimensionMismatch(
                    f"tile ({col}, {row}) is {tile.shape[1]}x{tile.shape[0]}, "
                    f"expected {tile_size}x{tile_size}"
                )
            canvas[
                row * tile_size:(row + 1) * tile_size,
                col * tile_size:(col + 1) * tile_size,
            ] = tile[..., :3]
    return canvas[:declared_height, :declared_width].copy()


def bilinear_sample(pano: Panorama, u, v) -> np.ndarray:
    """Bilinear sample at continuous coordinates; u wraps across the 360 deg
    seam, v clamps at the poles.

    u and v may be scalars or equally-shaped arrays; returns float RGB with
    matching leading shape.
    """
    pixels = pano.pixels
    h, w = pixels.shape[:2]

    uf = np.asarray(u, dtype=np.float64) - 0.5
    vf = np.asarray(v, dtype=np.float64) - 0.5

    i0 = np.floor(uf).astype(np.int64)
    j0 = np.floor(vf).astype(np.int64)
    fu = uf - i0
    fv = vf - j0

    i0w = np.mod(i0, w)
    i1w = np.mod(i0 + 1, w)
    j0c = np.clip(j0, 0, h - 1)
    j1c = np.clip(j0 + 1, 0, h - 1)

    p00 = pixels[j0c, i0w].astype(np.float64)
    p10 = pixels[j0c, i1w].astype(np.float64)
    p01 = pixels[j1c, i0w].astype(np.float64)
    p11 = pixels[j1c, i1w].astype(np.float64)

    fu = fu[..., None]
    fv = fv[..., None]
    top = p00 * (1.0 - fu) + p10 * fu
    bot = p01 * (1.0 - fu) + p11 * fu
    return top * (1.0 - fv) + bot * fv
