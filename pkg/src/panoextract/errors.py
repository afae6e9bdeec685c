"""Exception hierarchy shared across the package."""


class PanoExtractError(Exception):
    """Base class for all package errors."""


# --- geometry ---

class DegenerateGeometry(PanoExtractError):
    """Geometry too degenerate to work with (coincident points, parallel rays)."""


class OutOfTangentRange(PanoExtractError):
    """Point too far from the tangent-plane origin for the local ENU approximation."""


class InsufficientRays(PanoExtractError):
    """Fewer than two rays supplied for triangulation."""


# --- rasters / projection ---

class OutOfRaster(PanoExtractError):
    """Continuous pixel coordinate outside the raster bounds."""


class InvalidDimensions(PanoExtractError):
    """Raster dimensions violate a required constraint."""


class InvalidFov(PanoExtractError):
    """Field of view outside the open interval (0, 180)."""


class MissingTile(PanoExtractError):
    def __init__(self, col: int, row: int):
        super().__init__(f"missing tile at col={col}, row={row}")
        self.col = col
        self.row = row


class DimensionMismatch(PanoExtractError):
    """Tile grid cannot cover the declared panorama dimensions."""


# --- provider ---

class ProviderUnavailable(PanoExtractError):
    """Network or authentication failure talking to the imagery service."""


class EmptyCoverage(PanoExtractError):
    """No panoramas found near the query point."""


class PanoNotFound(PanoExtractError):
    """Requested panorama id is unknown to this provider."""


class HeadingUnavailable(PanoExtractError):
    """Service metadata carries no heading for this panorama."""


class TileFetchError(PanoExtractError):
    def __init__(self, col: int, row: int, status: int):
        super().__init__(f"tile ({col}, {row}) fetch failed with status {status}")
        self.col = col
        self.row = row
        self.status = status


class CacheWriteError(PanoExtractError):
    """Failed to persist a fetched panorama to the disk cache."""


class IndexMissing(PanoExtractError):
    """Fixture directory has no index.json."""


class IndexMalformed(PanoExtractError):
    """Fixture index.json fails schema or invariant checks."""


class ImageFileMissing(PanoExtractError):
    def __init__(self, pano_id: str):
        super().__init__(f"image file missing for panorama {pano_id!r}")
        self.pano_id = pano_id


# --- detector ---

class DetectorLaunchError(PanoExtractError):
    """External detector process could not be started."""


class DetectorTimeout(PanoExtractError):
    """External detector did not answer within the configured timeout."""


class ProtocolError(PanoExtractError):
    """External detector violated the stdio JSON-lines protocol."""


# --- pipeline input ---

class MissingGeotag(PanoExtractError):
    """Photo has no EXIF GPS information."""


class MalformedExif(PanoExtractError):
    """Photo EXIF data could not be decoded."""
