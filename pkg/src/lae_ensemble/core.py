"""Domain types and box geometry shared by the rest of the package.

Boxes use corner form ``(x_min, y_min, x_max, y_max)`` in continuous pixel
coordinates (origin top-left, x right, y down).  Areas carry no ``+1`` pixel
term, so IoU is invariant under translation and uniform scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .errors import ValidationError

DEFAULT_CLASS_NAMES = ("drone", "eVTOL", "helicopter")


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError(f"non-finite box coordinate in {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(f"box {coords} has zero or negative extent")

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "BoundingBox":
        if len(values) != 4:
            raise ValidationError(f"expected 4 box coordinates, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


def area(b: BoundingBox) -> float:
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def intersection(a: BoundingBox, b: BoundingBox) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; exactly 1.0 for identical boxes."""
    if a == b:
        return 1.0
    inter = intersection(a, b)
    if inter == 0.0:
        return 0.0
    union = area(a) + area(b) - inter
    return min(1.0, inter / union)


def clamp_box(b: BoundingBox | Sequence[float], width: float, height: float) -> BoundingBox:
    """Clip a box to ``[0, width] x [0, height]``.

    Raises ValidationError if nothing of positive area is left.
    """
    x1, y1, x2, y2 = b.as_tuple() if isinstance(b, BoundingBox) else tuple(float(v) for v in b)
    clipped = (
        min(max(x1, 0.0), width),
        min(max(y1, 0.0), height),
        min(max(x2, 0.0), width),
        min(max(y2, 0.0), height),
    )
    return BoundingBox(*clipped)


@dataclass(frozen=True)
class GeoCoordinate:
    """Geodetic position on WGS84: degrees, degrees, metres above the ellipsoid."""

    latitude: float
    longitude: float
    altitude: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.latitude, self.longitude, self.altitude)):
            raise ValidationError("non-finite geodetic coordinate")
        if abs(self.latitude) > 90.0:
            raise ValidationError(f"latitude {self.latitude} outside [-90, 90]")
        object.__setattr__(self, "longitude", normalize_longitude(self.longitude))


def normalize_longitude(lon: float) -> float:
    """Wrap a longitude in degrees to ``(-180, 180]``."""
    if -180.0 < lon <= 180.0:
        return lon
    wrapped = math.fmod(lon + 180.0, 360.0)
    if wrapped <= 0.0:
        wrapped += 360.0
    return wrapped - 180.0


@dataclass(frozen=True)
class ClassRegistry:
    names: tuple[str, ...] = DEFAULT_CLASS_NAMES

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise ValidationError("class registry is empty")
        if len(set(self.names)) != len(self.names):
            raise ValidationError(f"duplicate class names in {self.names}")

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, class_id: object) -> bool:
        return isinstance(class_id, int) and 0 <= class_id < len(self.names)

    def name(self, class_id: int) -> str:
        if class_id not in self:
            raise ValidationError(f"class_id {class_id} not in registry {self.names}")
        return self.names[class_id]

    def items(self) -> list[tuple[int, str]]:
        return list(enumerate(self.names))


DEFAULT_REGISTRY = ClassRegistry()


def _check_class_id(class_id: int) -> None:
    if isinstance(class_id, bool) or not isinstance(class_id, int) or class_id < 0:
        raise ValidationError(f"class_id must be a non-negative integer, got {class_id!r}")


def _check_score(score: float) -> None:
    if not (0.0 <= score <= 1.0):
        raise ValidationError(f"score {score} outside [0, 1]")


@dataclass(frozen=True)
class Detection:
    bbox: BoundingBox
    class_id: int
    score: float
    model_id: str = ""
    det_id: int = 0

    def __post_init__(self):
        _check_class_id(self.class_id)
        _check_score(self.score)
        if self.det_id < 0:
            raise ValidationError(f"det_id must be non-negative, got {self.det_id}")


@dataclass(frozen=True)
class GroundTruthAnnotation:
    bbox: BoundingBox
    class_id: int
    gt_id: int = 0
    world_position: GeoCoordinate | None = None

    def __post_init__(self):
        _check_class_id(self.class_id)
        if self.gt_id < 0:
            raise ValidationError(f"gt_id must be non-negative, got {self.gt_id}")


@dataclass(frozen=True)
class FusedDetection:
    """One ensemble output box.

    ``contributors`` lists the ``(model_id, det_id)`` pairs whose boxes were
    averaged.  ``det_id`` is the rank of the detection within its frame.
    """

    bbox: BoundingBox
    class_id: int
    score: float
    contributors: tuple[tuple[str, int], ...]
    det_id: int = 0

    def __post_init__(self):
        _check_class_id(self.class_id)
        _check_score(self.score)
        object.__setattr__(self, "contributors", tuple((str(m), int(d)) for m, d in self.contributors))
        if not self.contributors:
            raise ValidationError("fused detection without contributors")


Item = Union[Detection, GroundTruthAnnotation, FusedDetection]


def item_id(item: Item) -> int:
    return item.gt_id if isinstance(item, GroundTruthAnnotation) else item.det_id


@dataclass(frozen=True)
class Frame:
    frame_id: int
    items: tuple[Item, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))


@dataclass(frozen=True)
class FrameSet:
    """Per-frame detections of one model, or ground-truth annotations.

    ``model_id`` is set for per-model detection sets and left ``None`` for
    ground truth and fused output.
    """

    image_width: int
    image_height: int
    frames: tuple[Frame, ...] = ()
    model_id: str | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValidationError(f"image size {self.image_width}x{self.image_height} must be positive")
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        previous = None
        for frame in frames:
            if previous is not None and frame.frame_id <= previous:
                raise ValidationError(f"frame_id {frame.frame_id} not strictly increasing after {previous}")
            previous = frame.frame_id
            seen = set()
            for it in frame.items:
                ident = item_id(it)
                if ident in seen:
                    raise ValidationError(f"duplicate id {ident} in frame {frame.frame_id}")
                seen.add(ident)
                b = it.bbox
                if b.x_min < 0 or b.y_min < 0 or b.x_max > self.image_width or b.y_max > self.image_height:
                    raise ValidationError(
                        f"box {b.as_tuple()} in frame {frame.frame_id} lies outside the "
                        f"{self.image_width}x{self.image_height} image"
                    )
        object.__setattr__(self, "_index", {f.frame_id: f for f in frames})

    def __len__(self) -> int:
        return len(self.frames)

    def frame_ids(self) -> list[int]:
        return [f.frame_id for f in self.frames]

    def get(self, frame_id: int) -> Frame | None:
        return self._index.get(frame_id)

    def items(self, frame_id: int) -> tuple[Item, ...]:
        frame = self._index.get(frame_id)
        return frame.items if frame is not None else ()


def make_frameset(
    image_width: int,
    image_height: int,
    per_frame: Iterable[tuple[int, Iterable[Item]]],
    model_id: str | None = None,
) -> FrameSet:
    return FrameSet(
        image_width,
        image_height,
        tuple(Frame(fid, tuple(items)) for fid, items in per_frame),
        model_id=model_id,
    )
