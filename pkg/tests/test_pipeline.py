import json
import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import CRIMSON, write_geotagged_jpeg
from panoextract.detector import Detection, DetectorSpec
from panoextract.errors import MalformedExif, MissingGeotag
from panoextract.geodesy import (
    EnuPoint,
    GeoPoint,
    enu_to_geo,
    geo_to_enu,
)
from panoextract.panosphere import PanoramaMeta
from panoextract.pipeline import (
    ExtractionReport,
    PipelineConfig,
    crop_detection,
    detection_to_ray,
    read_geotag,
    run_extraction,
)
from panoextract.projector import ViewSpec
from panoextract.provider import ProviderConfig


def chroma_detector():
    return DetectorSpec(kind="chroma", chroma_rgb=CRIMSON)


def null_detector():
    # chroma color that never appears in the synthetic scenes
    return DetectorSpec(kind="chroma", chroma_rgb=(1, 2, 3), chroma_tolerance=(0, 0, 0))


class TestReadGeotag:
    def test_sexagesimal_decode(self, geotagged_jpeg):
        # 29 deg 58' 48" N, 97 deg 3' 18" W
        photo = geotagged_jpeg(29.98, -97.055)
        point = read_geotag(photo)
        assert point.lat_deg == pytest.approx(29.98, abs=1e-9)
        assert point.lon_deg == pytest.approx(-97.055, abs=1e-9)

    def test_southern_hemisphere_sign(self, geotagged_jpeg):
        point = read_geotag(geotagged_jpeg(-10.5, 30.25))
        assert point.lat_deg == pytest.approx(-10.5, abs=1e-9)
        assert point.lon_deg == pytest.approx(30.25, abs=1e-9)

    def test_jpeg_without_gps(self, tmp_path):
        from PIL import Image

        path = tmp_path / "nogps.jpg"
        Image.new("RGB", (16, 16)).save(path, "JPEG")
        with pytest.raises(MissingGeotag):
            read_geotag(path)

    def test_non_image_is_malformed(self, tmp_path):
        path = tmp_path / "junk.jpg"
        path.write_bytes(b"certainly not a jpeg")
        with pytest.raises(MalformedExif):
            read_geotag(path)


class TestDetectionToRay:
    ORIGIN = GeoPoint(29.0, -97.0)

    def meta_at(self, east, north):
        return PanoramaMeta(pano_id="p", location=enu_to_geo(self.ORIGIN,
                                                             EnuPoint(east, north)),
                            heading_deg=0.0, capture_date="",
                            width_px=1024, height_px=512)

    def test_centered_bbox_points_along_yaw(self):
        view = ViewSpec(yaw_deg=30.0, pitch_deg=0.0, hfov_deg=90.0,
                        width_px=512, height_px=512)
        det = Detection(bbox_xywh=(236, 236, 40, 40), score=1.0)  # center 256,256
        ray = detection_to_ray(view, det, self.meta_at(10, 0), self.ORIGIN)
        assert ray.bearing_deg == pytest.approx(30.0, abs=1e-9)
        assert ray.origin.east_m == pytest.approx(10.0, abs=1e-6)

    def test_offset_bbox_pinhole_bearing(self):
        view = ViewSpec(yaw_deg=0.0, pitch_deg=0.0, hfov_deg=90.0,
                        width_px=512, height_px=512)
        det = Detection(bbox_xywh=(364, 236, 40, 40), score=1.0)  # center u = 384
        ray = detection_to_ray(view, det, self.meta_at(0, 0), self.ORIGIN)
        assert ray.bearing_deg == pytest.approx(26.5651, abs=0.001)

    def test_pano_at_origin(self):
        view = ViewSpec(yaw_deg=0.0, pitch_deg=0.0, hfov_deg=90.0,
                        width_px=512, height_px=512)
        det = Detection(bbox_xywh=(236, 236, 40, 40), score=1.0)
        ray = detection_to_ray(view, det, self.meta_at(0, 0), self.ORIGIN)
        assert (ray.origin.east_m, ray.origin.north_m) == (0.0, 0.0)


class TestCropDetection:
    def test_zero_pad_exact_bbox(self):
        rng = np.random.default_rng(81)
        image = rng.integers(0, 256, (640, 640, 3), dtype=np.uint8)
        det = Detection(bbox_xywh=(100, 120, 50, 60), score=1.0)
        crop = crop_detection(image, det, 0.0)
        assert np.array_equal(crop, image[120:180, 100:150])

    def test_pad_clamped_at_top_left(self):
        image = np.zeros((640, 640, 3), dtype=np.uint8)
        det = Detection(bbox_xywh=(0, 0, 50, 50), score=1.0)
        assert crop_detection(image, det, 0.10).shape == (55, 55, 3)

    def test_interior_pad(self):
        image = np.zeros((640, 640, 3), dtype=np.uint8)
        det = Detection(bbox_xywh=(100, 100, 50, 50), score=1.0)
        assert crop_detection(image, det, 0.10).shape == (60, 60, 3)


def pipeline_config(scene_fixture, tmp_path, detector=None, out_name="out", **kw):
    origin = scene_fixture["scene"].origin
    photo_gps = enu_to_geo(origin, EnuPoint(0.5, 26.5))
    photo = write_geotagged_jpeg(tmp_path / "photo.jpg",
                                 photo_gps.lat_deg, photo_gps.lon_deg)
    provider = ProviderConfig(kind="fixture",
                              fixture_dir=scene_fixture["fixture_dir"],
                              cache_dir=tmp_path / f"cache_{out_name}")
    return PipelineConfig(
        photo_path=photo,
        provider=provider,
        detector=detector or chroma_detector(),
        out_dir=tmp_path / out_name,
        **kw,
    )


class TestRunExtraction:
    def test_happy_path_triangulates_wall(self, wall_scene_fixture, tmp_path):
        config = pipeline_config(wall_scene_fixture, tmp_path)
        report = run_extraction(config)

        assert report.status == "ok"
        assert report.location_source == "triangulated"
        assert report.rms_residual_m is not None and report.rms_residual_m >= 0

        origin = wall_scene_fixture["scene"].origin
        wall_mid = wall_scene_fixture["wall"].base_midpoint()
        located = geo_to_enu(origin, report.building_location)
        err = math.hypot(located.east_m - wall_mid.east_m,
                         located.north_m - wall_mid.north_m)
        assert err < 0.5

        crops = [r.crop_path for r in report.panos]
        assert all(path is not None for path in crops)
        for path in crops:
            assert (config.out_dir / path).is_file()

    def test_pass2_detection_centered(self, wall_scene_fixture, tmp_path):
        config = pipeline_config(wall_scene_fixture, tmp_path)
        report = run_extraction(config)
        for record in report.panos:
            assert record.pass2 is not None and record.pass2.detection is not None
            cu, _ = record.pass2.detection.center
            assert abs(cu - record.pass2.view.width_px / 2.0) <= \
                0.02 * record.pass2.view.width_px

    def test_empty_detector_falls_back(self, wall_scene_fixture, tmp_path):
        config = pipeline_config(wall_scene_fixture, tmp_path,
                                 detector=null_detector())
        report = run_extraction(config)
        assert report.status == "no_detection"
        assert report.location_source == "fallback_photo_gps"
        assert report.rms_residual_m is None
        assert report.building_location == report.photo_gps
        assert all(r.crop_path is None for r in report.panos)

    def test_single_ray_is_below_min_rays(self, wall_scene_fixture, tmp_path):
        config = pipeline_config(wall_scene_fixture, tmp_path, k_panos=1)
        report = run_extraction(config)
        assert report.location_source == "fallback_photo_gps"
        assert report.status == "fallback_photo_gps"
        assert report.panos[0].pass2 is not None

    def test_report_round_trip(self, wall_scene_fixture, tmp_path):
        config = pipeline_config(wall_scene_fixture, tmp_path)
        report = run_extraction(config)
        doc = json.loads((config.out_dir / "report.json").read_text())
        assert ExtractionReport.from_dict(doc) == report

    def test_deterministic_runs(self, wall_scene_fixture, tmp_path):
        config_a = pipeline_config(wall_scene_fixture, tmp_path, out_name="a")
        config_b = pipeline_config(wall_scene_fixture, tmp_path, out_name="b")
        report_a = run_extraction(config_a)
        report_b = run_extraction(config_b)
        assert report_a == report_b
        bytes_a = (config_a.out_dir / "report.json").read_bytes()
        bytes_b = (config_b.out_dir / "report.json").read_bytes()
        assert bytes_a == bytes_b
        for record in report_a.panos:
            crop_a = (config_a.out_dir / record.crop_path).read_bytes()
            crop_b = (config_b.out_dir / record.crop_path).read_bytes()
            assert crop_a == crop_b

    def test_keep_intermediates_writes_views(self, wall_scene_fixture, tmp_path):
        config = pipeline_config(wall_scene_fixture, tmp_path,
                                 keep_intermediates=True)
        report = run_extraction(config)
        for record in report.panos:
            assert (config.out_dir / f"view1_{record.pano_id}.png").is_file()
            assert (config.out_dir / f"view2_{record.pano_id}.png").is_file()

    def test_external_stub_adapter_interchangeable(self, wall_scene_fixture,
                                                   tmp_path):
        # a stdio adapter doing the same chroma detection must slot into the
        # pipeline with no other change
        import sys
        import textwrap

        stub = tmp_path / "stub_adapter.py"
        stub.write_text(textwrap.dedent("""\
            import json, sys
            import numpy as np
            from PIL import Image
            from scipy import ndimage

            print(json.dumps({"ready": True, "protocol": 1}), flush=True)
            target = np.array([220, 20, 60])
            for line in sys.stdin:
                req = json.loads(line)
                try:
                    img = np.asarray(Image.open(req["image_path"]).convert("RGB"))
                except OSError as exc:
                    print(json.dumps({"id": req["id"], "error": str(exc)}), flush=True)
                    continue
                mask = np.all(np.abs(img.astype(int) - target) <= 10, axis=-1)
                four = np.array([[0,1,0],[1,1,1],[0,1,0]])
                labels, count = ndimage.label(mask, structure=four)
                dets = []
                if count:
                    areas = ndimage.sum_labels(mask, labels, index=range(1, count+1))
                    keep = [(a, s) for a, s in zip(areas, ndimage.find_objects(labels))
                            if a >= 25]
                    if keep:
                        big = max(a for a, _ in keep)
                        for a, (rows, cols) in keep:
                            dets.append({"bbox_xywh": [int(cols.start), int(rows.start),
                                                       int(cols.stop - cols.start),
                                                       int(rows.stop - rows.start)],
                                         "score": float(a / big), "label": "building"})
                print(json.dumps({"id": req["id"], "detections": dets}), flush=True)
        """))
        external = DetectorSpec(kind="external",
                                command=(sys.executable, str(stub)), timeout_s=60)
        config = pipeline_config(wall_scene_fixture, tmp_path, detector=external,
                                 out_name="ext")
        report = run_extraction(config)
        assert report.status == "ok"
        assert report.location_source == "triangulated"
        assert all(r.crop_path is not None for r in report.panos)

    def test_missing_geotag_aborts(self, wall_scene_fixture, tmp_path):
        from PIL import Image

        photo = tmp_path / "nogps.jpg"
        Image.new("RGB", (16, 16)).save(photo, "JPEG")
        config = pipeline_config(wall_scene_fixture, tmp_path)
        config = replace(config, photo_path=photo)
        with pytest.raises(MissingGeotag):
            run_extraction(config)
