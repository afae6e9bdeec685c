"""panoextract: extract undistorted building views from street-level 360 panoramas.

Pipeline: geotagged photo -> nearby panoramas -> bearing triangulation of the
building -> rectilinear reprojection toward it -> detection and cropping.
"""

from .geodesy import (
    EnuPoint,
    GeoPoint,
    Ray2D,
    TriangulationResult,
    enu_to_geo,
    geo_to_enu,
    haversine_distance,
    initial_bearing,
    triangulate_rays,
)
from .panosphere import Panorama, PanoramaMeta, SphereDir
from .projector import ProjectedImage, ViewSpec, plan_optimal_view, render_view
from .detector import Detection, DetectorSpec, detect, select_primary
from .pipeline import ExtractionReport, PipelineConfig, run_extraction
from .provider import ProviderConfig, load_fixture_index, make_provider

__all__ = [
    "Detection",
    "DetectorSpec",
    "EnuPoint",
    "ExtractionReport",
    "GeoPoint",
    "Panorama",
    "PanoramaMeta",
    "PipelineConfig",
    "ProjectedImage",
    "ProviderConfig",
    "Ray2D",
    "SphereDir",
    "TriangulationResult",
    "ViewSpec",
    "detect",
    "enu_to_geo",
    "geo_to_enu",
    "haversine_distance",
    "initial_bearing",
    "load_fixture_index",
    "make_provider",
    "plan_optimal_view",
    "render_view",
    "run_extraction",
    "select_primary",
    "triangulate_rays",
]
