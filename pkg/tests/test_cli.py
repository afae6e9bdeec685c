import json
from pathlib import Path

import numpy as np
import pytest

from conftest import CRIMSON, GROUND, SKY, build_wall_scene, write_geotagged_jpeg
from panoextract import imageio
from panoextract.cli import run_cli
from panoextract.geodesy import EnuPoint, enu_to_geo
from panoextract.synthcam import write_fixture


@pytest.fixture
def scene_json(tmp_path):
    scene, wall, cameras = build_wall_scene()
    doc = {
        "origin": {"lat": scene.origin.lat_deg, "lon": scene.origin.lon_deg},
        "ground_rgb": list(GROUND),
        "sky_rgb": list(SKY),
        "walls": [{
            "p0": [wall.p0.east_m, wall.p0.north_m],
            "p1": [wall.p1.east_m, wall.p1.north_m],
            "height_m": wall.height_m,
            "rgb": list(CRIMSON),
        }],
        "cameras": [
            {"lat": c.lat_deg, "lon": c.lon_deg, "heading_deg": h}
            for c, h in cameras
        ],
    }
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    return path


def extract_args(tmp_path, fixture_dir, photo, out="out"):
    return [
        "extract",
        "--photo", str(photo),
        "--provider", f"fixture:{fixture_dir}",
        "--detector", "chroma:DC143C",
        "--cache-dir", str(tmp_path / "cache"),
        "--out", str(tmp_path / out),
    ]


@pytest.fixture
def extraction_setup(tmp_path, scene_json):
    assert run_cli(["simulate", "--scene", str(scene_json),
                    "--out", str(tmp_path / "fix"),
                    "--width", "2048", "--height", "1024"]) == 0
    scene, _, _ = build_wall_scene()
    photo_gps = enu_to_geo(scene.origin, EnuPoint(0.5, 26.5))
    photo = write_geotagged_jpeg(tmp_path / "photo.jpg",
                                 photo_gps.lat_deg, photo_gps.lon_deg)
    return tmp_path / "fix", photo


class TestExtract:
    def test_happy_path(self, tmp_path, extraction_setup, capsys):
        fixture_dir, photo = extraction_setup
        code = run_cli(extract_args(tmp_path, fixture_dir, photo))
        out = capsys.readouterr().out
        assert code == 0
        report_path = Path(out.strip())
        assert report_path.is_file()
        report = json.loads(report_path.read_text())
        assert report["status"] == "ok"

    def test_missing_photo_flag_is_usage_error(self, capsys):
        assert run_cli(["extract", "--out", "somewhere"]) == 64
        assert "usage" in capsys.readouterr().err

    def test_photo_without_gps_is_bad_input(self, tmp_path, extraction_setup):
        from PIL import Image

        fixture_dir, _ = extraction_setup
        photo = tmp_path / "nogps.jpg"
        Image.new("RGB", (16, 16)).save(photo, "JPEG")
        assert run_cli(extract_args(tmp_path, fixture_dir, photo)) == 65

    def test_no_detection_exit_code(self, tmp_path, extraction_setup):
        fixture_dir, photo = extraction_setup
        args = extract_args(tmp_path, fixture_dir, photo, out="out2")
        args[args.index("chroma:DC143C")] = "chroma:010203"
        assert run_cli(args) == 2

    def test_bad_detector_string(self, tmp_path, extraction_setup):
        fixture_dir, photo = extraction_setup
        args = extract_args(tmp_path, fixture_dir, photo)
        args[args.index("chroma:DC143C")] = "magic"
        assert run_cli(args) == 64

    def test_missing_fixture_dir_is_provider_like_failure(self, tmp_path, capsys):
        photo = write_geotagged_jpeg(tmp_path / "p.jpg", 29.0, -97.0)
        code = run_cli(extract_args(tmp_path, tmp_path / "nope", photo))
        assert code == 65  # fixture index missing: bad input data

    def test_stdout_is_single_path(self, tmp_path, extraction_setup, capsys):
        fixture_dir, photo = extraction_setup
        run_cli(extract_args(tmp_path, fixture_dir, photo, out="out3"))
        out_lines = capsys.readouterr().out.strip().splitlines()
        assert len(out_lines) == 1


class TestSimulate:
    def test_emits_valid_fixture(self, tmp_path, scene_json, capsys):
        code = run_cli(["simulate", "--scene", str(scene_json),
                        "--out", str(tmp_path / "sim")])
        assert code == 0
        index_path = Path(capsys.readouterr().out.strip())
        assert index_path.name == "index.json"
        from panoextract.provider import load_fixture_index

        metas = load_fixture_index(tmp_path / "sim")
        assert len(metas) == 3

    def test_bad_scene_file(self, tmp_path):
        bad = tmp_path / "scene.json"
        bad.write_text("{")
        assert run_cli(["simulate", "--scene", str(bad),
                        "--out", str(tmp_path / "sim")]) == 65


class TestLocate:
    def test_triangulates_rays_file(self, tmp_path, capsys):
        rays = [
            {"origin": [0.0, 0.0], "bearing_deg": 90.0},
            {"origin": [50.0, 100.0], "bearing_deg": 180.0},
        ]
        rays_path = tmp_path / "rays.json"
        rays_path.write_text(json.dumps(rays))
        out_path = tmp_path / "located.json"
        assert run_cli(["locate", "--rays", str(rays_path),
                        "--out", str(out_path)]) == 0
        doc = json.loads(out_path.read_text())
        assert doc["east_m"] == pytest.approx(50.0, abs=1e-9)
        assert doc["north_m"] == pytest.approx(0.0, abs=1e-9)
        assert doc["ray_count"] == 2

    def test_bad_rays_file(self, tmp_path):
        bad = tmp_path / "rays.json"
        bad.write_text("nope")
        assert run_cli(["locate", "--rays", str(bad),
                        "--out", str(tmp_path / "o.json")]) == 65


class TestProject:
    def test_renders_view(self, tmp_path, capsys):
        scene, _, cameras = build_wall_scene()
        panos = write_fixture(scene, cameras[:1], tmp_path / "fix",
                              width_px=1024, height_px=512)
        pano_png = tmp_path / "fix" / f"{panos[0].meta.pano_id}.png"
        out_png = tmp_path / "view.png"
        code = run_cli(["project", "--pano", str(pano_png),
                        "--yaw", "0", "--hfov", "90",
                        "--width", "320", "--height", "320",
                        "--out", str(out_png)])
        assert code == 0
        assert imageio.read_image(out_png).shape == (320, 320, 3)


class TestFetch:
    def test_fetch_from_fixture(self, tmp_path, extraction_setup, capsys):
        fixture_dir, photo = extraction_setup
        code = run_cli(["fetch", "--photo", str(photo),
                        "--provider", f"fixture:{fixture_dir}",
                        "--cache-dir", str(tmp_path / "cache"),
                        "--panos", "2"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        for line in lines:
            assert Path(line).is_file()

    def test_fetch_needs_a_location(self, capsys):
        assert run_cli(["fetch", "--provider", "streetview"]) == 64
