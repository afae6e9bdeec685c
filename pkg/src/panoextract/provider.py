"""Panorama acquisition: K-nearest discovery and pixel fetch.

Two providers share one interface: a live street-imagery HTTP client with a
disk cache, and an offline fixture provider backed by a directory of PNGs
plus index.json. The cache's meta.json uses exactly the fixture entry schema,
so a populated cache and a fixture directory are interchangeable formats.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imageio
from .errors import (
    CacheWriteError,
    EmptyCoverage,
    HeadingUnavailable,
    ImageFileMissing,
    IndexMalformed,
    IndexMissing,
    PanoNotFound,
    ProviderUnavailable,
    TileFetchError,
)
from .geodesy import EnuPoint, GeoPoint, enu_to_geo, haversine_distance
from .panosphere import Panorama, PanoramaMeta, assemble_tiles

DEFAULT_METADATA_URL = "https://maps.googleapis.com/maps/api/streetview/metadata"
DEFAULT_TILE_URL = "https://streetviewpixels-pa.googleapis.com/v1/tile"
TILE_SIZE = 512


@dataclass
class ProviderConfig:
    kind: str = "fixture"  # "streetview" or "fixture"
    api_key_env: str = "GSV_API_KEY"
    cache_dir: str | Path = ".panoextract-cache"
    zoom: int = 3
    probe_radius_m: tuple[float, ...] = (0.0, 15.0, 30.0)
    max_parallel_fetches: int = 4
    fixture_dir: str | Path | None = None
    metadata_url: str = DEFAULT_METADATA_URL
    tile_url: str = DEFAULT_TILE_URL
    rate_limit_s: float = 0.1

    def __post_init__(self):
        if self.kind not in ("streetview", "fixture"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if not (0 <= self.zoom <= 5):
            raise ValueError(f"zoom {self.zoom} outside [0, 5]")
        if self.max_parallel_fetches < 1:
            raise ValueError("max_parallel_fetches must be >= 1")


@dataclass(frozen=True)
class NearestResult:
    """K-nearest query result; short_count is set when coverage ran out."""

    panos: tuple[PanoramaMeta, ...]
    short_count: bool


def _meta_to_entry(meta: PanoramaMeta, image: str) -> dict:
    return {
        "pano_id": meta.pano_id,
        "lat": meta.location.lat_deg,
        "lon": meta.location.lon_deg,
        "heading_deg": meta.heading_deg,
        "date": meta.capture_date,
        "width_px": meta.width_px,
        "height_px": meta.height_px,
        "image": image,
    }


def _entry_to_meta(entry: dict, where: str) -> tuple[PanoramaMeta, str]:
    required = ("pano_id", "lat", "lon", "heading_deg", "date",
                "width_px", "height_px", "image")
    for key in required:
        if key not in entry:
            raise IndexMalformed(f"{where}: missing field {key!r}")
    heading = entry["heading_deg"]
    if not (0 <= heading < 360):
        raise IndexMalformed(f"{where}: heading_deg {heading} outside [0, 360)")
    try:
        meta = PanoramaMeta(
            pano_id=entry["pano_id"],
            location=GeoPoint(entry["lat"], entry["lon"]),
            heading_deg=float(heading),
            capture_date=entry["date"],
            width_px=int(entry["width_px"]),
            height_px=int(entry["height_px"]),
        )
    except (ValueError, TypeError) as exc:
        raise IndexMalformed(f"{where}: {exc}") from exc
    return meta, entry["image"]


def load_fixture_index(fixture_dir: str | Path) -> list[PanoramaMeta]:
    """Parse index.json; validates metadata invariants and image existence."""
    return [meta for meta, _ in _load_fixture_entries(fixture_dir)]


def _load_fixture_entries(fixture_dir: str | Path) -> list[tuple[PanoramaMeta, Path]]:
    fixture_dir = Path(fixture_dir)
    index_path = fixture_dir / "index.json"
    if not index_path.is_file():
        raise IndexMissing(f"no index.json in {fixture_dir}")
    try:
        entries = json.loads(index_path.read_text())
    except json.JSONDecodeError as exc:
        raise IndexMalformed(f"{index_path}: {exc}") from exc
    if not isinstance(entries, list):
        raise IndexMalformed(f"{index_path}: top level must be a JSON array")
    out = []
    for i, entry in enumerate(entries):
        meta, image = _entry_to_meta(entry, f"{index_path} entry {i}")
        image_path = fixture_dir / image
        if not image_path.is_file():
            raise ImageFileMissing(meta.pano_id)
        out.append((meta, image_path))
    return out


class PanoCache:
    """Disk cache: cache_dir/panos/{pano_id}/meta.json + zoom{z}.png.

    Publication is atomic (temp file + rename), so readers never observe a
    partial raster.
    """

    def __init__(self, cache_dir: str | Path):
        self.root = Path(cache_dir) / "panos"

    def _dir(self, pano_id: str) -> Path:
        return self.root / pano_id

    def image_path(self, pano_id: str, zoom: int) -> Path:
        return self._dir(pano_id) / f"zoom{zoom}.png"

    def get(self, pano_id: str, zoom: int) -> np.ndarray | None:
        path = self.image_path(pano_id, zoom)
        if not path.is_file():
            return None
        return imageio.read_image(path)

    def put(self, meta: PanoramaMeta, zoom: int, pixels: np.ndarray) -> None:
        pano_dir = self._dir(meta.pano_id)
        try:
            pano_dir.mkdir(parents=True, exist_ok=True)
            image_name = f"zoom{zoom}.png"
            self._publish(pano_dir / "meta.json",
                          json.dumps(_meta_to_entry(meta, image_name), indent=2).encode())
            self._publish(pano_dir / image_name, imageio.encode_png(pixels))
        except OSError as exc:
            raise CacheWriteError(str(exc)) from exc

    @staticmethod
    def _publish(path: Path, data: bytes) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)


class FixtureProvider:
    """Offline provider over a directory of equirectangular PNGs."""

    def __init__(self, config: ProviderConfig):
        if config.fixture_dir is None:
            raise ValueError("fixture provider requires fixture_dir")
        self.config = config
        self.cache = PanoCache(config.cache_dir)
        self._entries = _load_fixture_entries(config.fixture_dir)
        self._images = {meta.pano_id: path for meta, path in self._entries}

    def nearest_panoramas(self, center: GeoPoint, k: int) -> NearestResult:
        if k < 1:
            raise ValueError("k must be >= 1")
        metas = [meta for meta, _ in self._entries]
        if not metas:
            raise EmptyCoverage("fixture index is empty")
        # Dedupe by pano_id, keeping the first occurrence.
        seen: dict[str, PanoramaMeta] = {}
        for meta in metas:
            seen.setdefault(meta.pano_id, meta)
        ranked = sorted(seen.values(),
                        key=lambda m: haversine_distance(center, m.location))
        return NearestResult(panos=tuple(ranked[:k]), short_count=len(ranked) < k)

    def fetch_panorama(self, meta: PanoramaMeta) -> Panorama:
        if meta.pano_id not in self._images:
            raise PanoNotFound(meta.pano_id)
        cached = self.cache.get(meta.pano_id, self.config.zoom)
        if cached is not None:
            return Panorama(meta=meta, pixels=cached)
        pixels = imageio.read_image(self._images[meta.pano_id])
        self.cache.put(meta, self.config.zoom, pixels)
        return Panorama(meta=meta, pixels=pixels)


class HttpTransport:
    """Thin requests wrapper; get returns (status_code, body bytes)."""

    def __init__(self):
        import requests

        self._session = requests.Session()

    def get(self, url: str, params: dict) -> tuple[int, bytes]:
        import requests

        try:
            resp = self._session.get(url, params=params, timeout=30)
        except requests.RequestException as exc:
            raise ProviderUnavailable(str(exc)) from exc
        return resp.status_code, resp.content


def tile_grid(zoom: int) -> tuple[int, int]:
    """Tile grid (cols, rows) of 512 px tiles at a given zoom."""
    if zoom == 0:
        return 1, 1
    return 2 ** zoom, 2 ** (zoom - 1)


def pano_dimensions(zoom: int) -> tuple[int, int]:
    """Declared equirectangular size at a given zoom (2:1, cropped from grid)."""
    if zoom == 0:
        return 512, 256
    return TILE_SIZE * 2 ** zoom, TILE_SIZE * 2 ** (zoom - 1)


class StreetViewProvider:
    """Live street-imagery client: ring-probe discovery, tiled fetch, disk cache."""

    COMPASS_BEARINGS = tuple(range(0, 360, 45))

    def __init__(self, config: ProviderConfig, transport=None):
        self.config = config
        self.transport = transport if transport is not None else HttpTransport()
        self.cache = PanoCache(config.cache_dir)
        self._discovered: dict[str, PanoramaMeta] = {}
        self._last_metadata_query = 0.0
        self._lock = threading.Lock()

    def _api_key(self) -> str:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise ProviderUnavailable(
                f"environment variable {self.config.api_key_env} is not set"
            )
        return key

    def _throttle(self) -> None:
        with self._lock:
            wait = self.config.rate_limit_s - (time.monotonic() - self._last_metadata_query)
            if wait > 0:
                time.sleep(wait)
            self._last_metadata_query = time.monotonic()

    def _query_metadata(self, point: GeoPoint) -> PanoramaMeta | None:
        self._throttle()
        status, body = self.transport.get(
            self.config.metadata_url,
            {"location": f"{point.lat_deg},{point.lon_deg}", "key": self._api_key()},
        )
        if status != 200:
            raise ProviderUnavailable(f"metadata endpoint returned HTTP {status}")
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            raise ProviderUnavailable(f"unparseable metadata response: {exc}") from exc
        api_status = doc.get("status")
        if api_status == "ZERO_RESULTS":
            return None
        if api_status != "OK":
            raise ProviderUnavailable(f"metadata status {api_status}")
        if "heading" not in doc:
            raise HeadingUnavailable(doc.get("pano_id", "<unknown>"))
        width, height = pano_dimensions(self.config.zoom)
        return PanoramaMeta(
            pano_id=doc["pano_id"],
            location=GeoPoint(doc["location"]["lat"], doc["location"]["lng"]),
            heading_deg=float(doc["heading"]) % 360.0,
            capture_date=doc.get("date", ""),
            width_px=width,
            height_px=height,
        )

    def _probe_points(self, center: GeoPoint) -> list[GeoPoint]:
        points = []
        for radius in self.config.probe_radius_m:
            if radius == 0:
                points.append(center)
                continue
            for bearing in self.COMPASS_BEARINGS:
                b = math.radians(bearing)
                offset = EnuPoint(radius * math.sin(b), radius * math.cos(b))
                points.append(enu_to_geo(center, offset))
        return points

    def nearest_panoramas(self, center: GeoPoint, k: int) -> NearestResult:
        if k < 1:
            raise ValueError("k must be >= 1")
        found: dict[str, PanoramaMeta] = {}
        for point in self._probe_points(center):
            try:
                meta = self._query_metadata(point)
            except HeadingUnavailable:
                continue  # unusable without a trustworthy heading
            if meta is not None:
                found.setdefault(meta.pano_id, meta)
        if not found:
            raise EmptyCoverage(f"no panoramas near {center}")
        self._discovered.update(found)
        ranked = sorted(found.values(),
                        key=lambda m: haversine_distance(center, m.location))
        return NearestResult(panos=tuple(ranked[:k]), short_count=len(ranked) < k)

    def _fetch_tile(self, pano_id: str, col: int, row: int) -> np.ndarray:
        status, body = self.transport.get(
            self.config.tile_url,
            {
                "cb_client": "maps_sv.tactile",
                "panoid": pano_id,
                "x": col,
                "y": row,
                "zoom": self.config.zoom,
            },
        )
        if status != 200:
            raise TileFetchError(col, row, status)
        return imageio.decode_image(body)

    def fetch_panorama(self, meta: PanoramaMeta) -> Panorama:
        if meta.pano_id not in self._discovered:
            raise PanoNotFound(meta.pano_id)
        cached = self.cache.get(meta.pano_id, self.config.zoom)
        if cached is not None:
            return Panorama(meta=meta, pixels=cached)

        cols, rows = tile_grid(self.config.zoom)
        coords = [(c, r) for r in range(rows) for c in range(cols)]
        with ThreadPoolExecutor(max_workers=self.config.max_parallel_fetches) as pool:
            rasters = list(pool.map(
                lambda cr: self._fetch_tile(meta.pano_id, cr[0], cr[1]), coords
            ))
        tiles = dict(zip(coords, rasters))
        pixels = assemble_tiles(tiles, TILE_SIZE, cols, rows,
                                meta.width_px, meta.height_px)
        self.cache.put(meta, self.config.zoom, pixels)
        return Panorama(meta=meta, pixels=pixels)


def make_provider(config: ProviderConfig, transport=None):
    if config.kind == "fixture":
        return FixtureProvider(config)
    return StreetViewProvider(config, transport=transport)
