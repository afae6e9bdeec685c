"""Building detection over projected images.

Two implementations behind one call: a deterministic chroma-key detector
(connected components of a target color) used for synthetic scenes and tests,
and an adapter that talks to an external detector process over a JSON-lines
stdio protocol so a real pretrained model can be plugged in.
"""

from __future__ import annotations

import json
import os
import selectors
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import imageio
from .errors import DetectorLaunchError, DetectorTimeout, ProtocolError

PROTOCOL_VERSION = 1
MIN_COMPONENT_AREA_PX = 25
DEFAULT_TIMEOUT_S = 30.0
SCORE_TIE_EPS = 1e-6


@dataclass(frozen=True)
class Detection:
    bbox_xywh: tuple[int, int, int, int]  # top-left origin, pixels
    score: float
    label: str = "building"

    def __post_init__(self):
        x, y, w, h = self.bbox_xywh
        if w <= 0 or h <= 0:
            raise ValueError(f"bbox {self.bbox_xywh} has non-positive size")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")

    @property
    def center(self) -> tuple[float, float]:
        x, y, w, h = self.bbox_xywh
        return x + w / 2.0, y + h / 2.0


@dataclass(frozen=True)
class DetectorSpec:
    kind: str  # "chroma" or "external"
    chroma_rgb: tuple[int, int, int] | None = None
    chroma_tolerance: tuple[int, int, int] = (10, 10, 10)
    command: tuple[str, ...] | None = None
    timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self):
        if self.kind == "chroma":
            if self.chroma_rgb is None:
                raise ValueError("chroma spec requires chroma_rgb")
        elif self.kind == "external":
            if not self.command:
                raise ValueError("external spec requires a command")
        else:
            raise ValueError(f"unknown detector kind {self.kind!r}")


def detect_chroma(image: np.ndarray, spec: DetectorSpec) -> list[Detection]:
    """4-connected components of pixels within per-channel tolerance of the
    target color; each component of at least 25 px yields its tight bbox."""
    target = np.asarray(spec.chroma_rgb, dtype=np.int16)
    tol = np.asarray(spec.chroma_tolerance, dtype=np.int16)
    mask = np.all(np.abs(image.astype(np.int16) - target) <= tol, axis=-1)

    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])  # 4-connectivity
    labels, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return []

    areas = ndimage.sum_labels(mask, labels, index=range(1, count + 1))
    slices = ndimage.find_objects(labels)
    keep = [(int(a), sl) for a, sl in zip(areas, slices) if a >= MIN_COMPONENT_AREA_PX]
    if not keep:
        return []

    largest = max(a for a, _ in keep)
    detections = []
    for area, (rows, cols) in keep:
        detections.append(Detection(
            bbox_xywh=(cols.start, rows.start,
                       cols.stop - cols.start, rows.stop - rows.start),
            score=area / largest,
        ))
    detections.sort(key=lambda d: (-d.score, d.bbox_xywh))
    return detections


def select_primary(detections: list[Detection], image_width: int) -> Detection | None:
    """Best single detection: highest score, score ties broken by bbox center
    nearest the horizontal image center."""
    if not detections:
        return None
    half_width = image_width / 2.0

    best = detections[0]
    for det in detections[1:]:
        if det.score > best.score + SCORE_TIE_EPS:
            best = det
        elif abs(det.score - best.score) <= SCORE_TIE_EPS:
            if abs(det.center[0] - half_width) < abs(best.center[0] - half_width):
                best = det
    return best


def _parse_detections(doc: dict) -> list[Detection]:
    raw = doc.get("detections")
    if not isinstance(raw, list):
        raise ProtocolError("response lacks a detections array")
    out = []
    for item in raw:
        try:
            bbox = tuple(int(v) for v in item["bbox_xywh"])
            det = Detection(bbox_xywh=bbox, score=float(item["score"]),
                            label=str(item.get("label", "building")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed detection {item!r}: {exc}") from exc
        if len(bbox) != 4:
            raise ProtocolError(f"bbox must have 4 elements, got {bbox!r}")
        out.append(det)
    return out


class ExternalDetector:
    """Handle on one adapter process; one in-flight request at a time.

    Protocol: adapter prints {"ready":true,"protocol":1} on start, then
    answers each {"id":n,"image_path":...} request line with one
    {"id":n,"detections":[...]} line.
    """

    def __init__(self, command: tuple[str, ...], timeout_s: float = DEFAULT_TIMEOUT_S):
        self.timeout_s = timeout_s
        self._next_id = 1
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,  # adapter stderr passes through for diagnostics
                text=True,
            )
        except OSError as exc:
            raise DetectorLaunchError(str(exc)) from exc

        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)
        self._buffer = ""

        ready = self._read_json_line()
        if ready.get("ready") is not True:
            raise ProtocolError(f"expected ready line, got {ready!r}")
        if ready.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol {ready.get('protocol')!r}")

    def _read_line(self) -> str:
        deadline = time.monotonic() + self.timeout_s
        while "\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0 or not self._selector.select(timeout=remaining):
                raise DetectorTimeout(f"no response within {self.timeout_s} s")
            chunk = os.read(self._proc.stdout.fileno(), 65536).decode()
            if not chunk:
                raise ProtocolError("adapter closed stdout")
            self._buffer += chunk
        line, self._buffer = self._buffer.split("\n", 1)
        return line

    def _read_json_line(self) -> dict:
        line = self._read_line()
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON from adapter: {line!r}") from exc
        if not isinstance(doc, dict):
            raise ProtocolError(f"expected JSON object, got {line!r}")
        return doc

    def request(self, image_path: str) -> list[Detection]:
        request_id = self._next_id
        self._next_id += 1
        line = json.dumps({"id": request_id, "image_path": os.path.abspath(image_path)})
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"adapter stdin closed: {exc}") from exc

        doc = self._read_json_line()
        if doc.get("id") != request_id:
            raise ProtocolError(f"response id {doc.get('id')!r} != request id {request_id}")
        if "error" in doc:
            raise ProtocolError(f"adapter error: {doc['error']}")
        return _parse_detections(doc)

    def close(self) -> None:
        self._selector.close()
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def external_round_trip(image_path: str, command: tuple[str, ...],
                        timeout_s: float = DEFAULT_TIMEOUT_S) -> list[Detection]:
    """One-shot request against a freshly launched adapter process."""
    with ExternalDetector(command, timeout_s=timeout_s) as det:
        return det.request(image_path)


def detect(image: np.ndarray, spec: DetectorSpec,
           external: ExternalDetector | None = None) -> list[Detection]:
    """Run the configured detector over an RGB raster.

    For the external kind an existing handle may be passed in to amortize
    process startup; otherwise a process is launched for the single request.
    """
    if image.size == 0:
        raise ValueError("empty image")
    if spec.kind == "chroma":
        return detect_chroma(image, spec)

    with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as tmp:
        image_path = tmp.name
    try:
        imageio.write_png(image_path, image)
        if external is not None:
            return external.request(image_path)
        return external_round_trip(image_path, spec.command, timeout_s=spec.timeout_s)
    finally:
        os.unlink(image_path)
