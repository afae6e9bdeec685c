import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image
from PIL.TiffImagePlugin import IFDRational

from panoextract.geodesy import EnuPoint, GeoPoint, enu_to_geo
from panoextract.synthcam import Scene, Wall, write_fixture

CRIMSON = (220, 20, 60)
GROUND = (60, 140, 60)
SKY = (110, 160, 230)

GPS_IFD_TAG = 34853


def dms_rationals(value: float):
    """Decimal degrees -> (deg, min, sec) EXIF rationals (microsecond precision)."""
    value = abs(value)
    deg = int(value)
    rem = (value - deg) * 60.0
    minutes = int(rem)
    seconds = (rem - minutes) * 60.0
    return (IFDRational(deg, 1), IFDRational(minutes, 1),
            IFDRational(round(seconds * 1_000_000), 1_000_000))


def write_geotagged_jpeg(path, lat: float, lon: float, size=(48, 48)):
    img = Image.new("RGB", size, (180, 170, 160))
    exif = Image.Exif()
    exif[GPS_IFD_TAG] = {
        1: "N" if lat >= 0 else "S",
        2: dms_rationals(lat),
        3: "E" if lon >= 0 else "W",
        4: dms_rationals(lon),
    }
    img.save(path, "JPEG", exif=exif)
    return Path(path)


@pytest.fixture
def geotagged_jpeg(tmp_path):
    def make(lat, lon, name="photo.jpg"):
        return write_geotagged_jpeg(tmp_path / name, lat, lon)

    return make


def build_wall_scene(origin=GeoPoint(29.0, -97.0)):
    """One crimson wall 6 m wide at north offset 30 m, three cameras around it."""
    wall = Wall(p0=EnuPoint(-3.0, 30.0), p1=EnuPoint(3.0, 30.0),
                height_m=8.0, rgb=CRIMSON)
    scene = Scene(origin=origin, ground_rgb=GROUND, sky_rgb=SKY, walls=(wall,))
    camera_enu = [EnuPoint(-14.0, 12.0), EnuPoint(0.0, 8.0), EnuPoint(14.0, 12.0)]
    cameras = [(enu_to_geo(origin, e), 0.0) for e in camera_enu]
    return scene, wall, cameras


@pytest.fixture
def wall_scene_fixture(tmp_path):
    """Synthetic 3-pano fixture directory plus its scene/wall/camera objects."""
    scene, wall, cameras = build_wall_scene()
    fixture_dir = tmp_path / "fixture"
    write_fixture(scene, cameras, fixture_dir, width_px=2048, height_px=1024)
    return {"scene": scene, "wall": wall, "cameras": cameras,
            "fixture_dir": fixture_dir}


def random_pano_meta(rng, width=None):
    """Random but valid PanoramaMeta for property tests."""
    if width is None:
        width = int(rng.choice([256, 512, 1024, 2048]))
    return_meta_kwargs = dict(
        pano_id="rand",
        location=GeoPoint(float(rng.uniform(-60, 60)), float(rng.uniform(-180, 180))),
        heading_deg=float(rng.uniform(0, 360)) % 360.0,
        capture_date="2017-08",
        width_px=width,
        height_px=width // 2,
    )
    from panoextract.panosphere import PanoramaMeta

    return PanoramaMeta(**return_meta_kwargs)


def random_panorama(rng, width=64):
    from panoextract.panosphere import Panorama

    meta = random_pano_meta(rng, width=width)
    pixels = rng.integers(0, 256, size=(meta.height_px, meta.width_px, 3),
                          dtype=np.uint8)
    return Panorama(meta=meta, pixels=pixels)
