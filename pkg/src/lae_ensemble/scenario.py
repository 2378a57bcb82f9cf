"""Seeded synthetic aircraft scenes and emulated detectors.

Every random draw comes from NumPy's Philox counter-based generator keyed
by ``SeedSequence(seed, spawn_key=stream)``.  Streams are

* ``(0, frame_id)`` for ground truth,
* ``(1, model_key, frame_id)`` for a detector, where ``model_key`` is the
  first 8 bytes (big-endian) of SHA-256 of the UTF-8 model id.

Each frame therefore has its own stream, and frames can be generated in
any order or in parallel with identical results.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_REGISTRY,
    BoundingBox,
    ClassRegistry,
    Detection,
    Frame,
    FrameSet,
    GroundTruthAnnotation,
    clamp_box,
    iou,
)
from .errors import ValidationError
from .geolocation import CameraModel, localize

GROUND_TRUTH_STREAM = 0
DETECTOR_STREAM = 1


def model_key(model_id: str) -> int:
    return int.from_bytes(hashlib.sha256(model_id.encode("utf-8")).digest()[:8], "big")


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    seq = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(seq))


def default_camera(width: int = 1280, height: int = 960) -> CameraModel:
    """Nadir camera 500 m above the ellipsoid near Beijing."""
    return CameraModel(
        fx=1500.0,
        fy=1500.0,
        cx=width / 2.0,
        cy=height / 2.0,
        width=width,
        height=height,
        latitude=40.0,
        longitude=116.0,
        altitude=500.0,
        yaw=0.0,
        pitch=-90.0,
        roll=0.0,
    )


@dataclass(frozen=True)
class ScenarioConfig:
    n_frames: int = 200
    image_width: int = 1280
    image_height: int = 960
    aircraft_per_frame: tuple[int, int] = (1, 5)
    box_size: tuple[float, float] = (16.0, 120.0)
    class_probs: tuple[float, ...] = (0.5, 0.3, 0.2)
    seed: int = 42
    registry: ClassRegistry = DEFAULT_REGISTRY
    camera: CameraModel | None = None
    aircraft_altitude: float = 120.0
    max_gt_overlap: float = 0.1

    def __post_init__(self):
        if self.n_frames < 0:
            raise ValidationError("n_frames must be >= 0")
        lo, hi = self.aircraft_per_frame
        if not 0 < lo <= hi:
            raise ValidationError(f"aircraft_per_frame {self.aircraft_per_frame} must be a positive range")
        smin, smax = self.box_size
        if not 0 < smin <= smax <= min(self.image_width, self.image_height):
            raise ValidationError(f"box_size {self.box_size} must be a positive range that fits the image")
        if len(self.class_probs) != len(self.registry):
            raise ValidationError("class_probs must have one entry per registry class")
        if any(p < 0 for p in self.class_probs) or abs(sum(self.class_probs) - 1.0) > 1e-9:
            raise ValidationError(f"class_probs {self.class_probs} must be non-negative and sum to 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 bits")
        if self.camera is None:
            object.__setattr__(self, "camera", default_camera(self.image_width, self.image_height))


def _draw_box(rng: np.random.Generator, cfg: ScenarioConfig) -> BoundingBox:
    w, h = rng.uniform(cfg.box_size[0], cfg.box_size[1], size=2)
    x0 = rng.uniform(0.0, cfg.image_width - w)
    y0 = rng.uniform(0.0, cfg.image_height - h)
    return BoundingBox(float(x0), float(y0), float(x0 + w), float(y0 + h))


def generate_frame(cfg: ScenarioConfig, frame_id: int) -> Frame:
    rng = rng_for(cfg.seed, GROUND_TRUTH_STREAM, frame_id)
    n = int(rng.integers(cfg.aircraft_per_frame[0], cfg.aircraft_per_frame[1] + 1))
    annotations: list[GroundTruthAnnotation] = []
    for _ in range(n):
        class_id = int(rng.choice(len(cfg.class_probs), p=cfg.class_probs))
        for _attempt in range(20):
            box = _draw_box(rng, cfg)
            if all(iou(box, a.bbox) <= cfg.max_gt_overlap for a in annotations):
                break
        else:
            continue
        position = localize(cfg.camera, box, cfg.aircraft_altitude)
        annotations.append(GroundTruthAnnotation(box, class_id, len(annotations), position))
    return Frame(frame_id, tuple(annotations))


def generate_scenario(cfg: ScenarioConfig) -> FrameSet:
    """Ground-truth frames ``0 .. n_frames-1`` with geodetic aircraft positions."""
    return FrameSet(
        cfg.image_width,
        cfg.image_height,
        tuple(generate_frame(cfg, fid) for fid in range(cfg.n_frames)),
    )


@dataclass(frozen=True)
class DetectorProfile:
    """Error model of one emulated detector.

    Ground-truth boxes with area below ``area_breakpoint`` are found with
    probability ``p_small``, larger ones with ``p_large``.  Found boxes get
    Gaussian corner noise ``loc_sigma``; confidence is IoU with the truth
    plus Gaussian ``conf_sigma`` noise, clamped to [0, 1].  False alarms
    arrive as Poisson(``fp_mean``) per frame with Uniform(0.05, 0.5) scores.
    """

    model_id: str
    p_small: float
    p_large: float
    area_breakpoint: float = 40.0 * 40.0
    loc_sigma: float = 2.0
    fp_mean: float = 0.5
    conf_sigma: float = 0.1
    seed: int = 42
    fp_size: tuple[float, float] = (16.0, 120.0)
    n_classes: int = len(DEFAULT_REGISTRY)

    def __post_init__(self):
        if not (0.0 <= self.p_small <= 1.0 and 0.0 <= self.p_large <= 1.0):
            raise ValidationError("detection probabilities must lie in [0, 1]")
        if self.loc_sigma < 0 or self.conf_sigma < 0:
            raise ValidationError("sigmas must be >= 0")
        if self.fp_mean < 0:
            raise ValidationError("fp_mean must be >= 0")

    def detection_probability(self, box: BoundingBox) -> float:
        return self.p_small if box.width * box.height < self.area_breakpoint else self.p_large


def default_profiles(seed: int = 42) -> tuple[DetectorProfile, DetectorProfile]:
    """Complementary detectors.

    ``one_stage`` finds small aircraft but with loose boxes and more false
    alarms; ``two_stage`` localizes tightly but misses many small targets.
    """
    one_stage = DetectorProfile(
        "one_stage", p_small=0.88, p_large=0.93, loc_sigma=3.0, fp_mean=0.8, conf_sigma=0.1, seed=seed
    )
    two_stage = DetectorProfile(
        "two_stage", p_small=0.45, p_large=0.96, loc_sigma=1.2, fp_mean=0.3, conf_sigma=0.1, seed=seed
    )
    return one_stage, two_stage


def _noisy_box(rng, gt: BoundingBox, sigma: float, width: int, height: int) -> BoundingBox:
    if sigma == 0.0:
        return gt
    for _ in range(10):
        noise = rng.normal(0.0, sigma, size=4)
        x1, y1, x2, y2 = (c + float(n) for c, n in zip(gt.as_tuple(), noise))
        try:
            return clamp_box((x1, y1, x2, y2), width, height)
        except ValidationError:
            continue
    return gt


def emulate_frame(frame: Frame, profile: DetectorProfile, width: int, height: int) -> Frame:
    rng = rng_for(profile.seed, DETECTOR_STREAM, model_key(profile.model_id), frame.frame_id)
    dets: list[Detection] = []
    for gt in frame.items:
        if rng.random() >= profile.detection_probability(gt.bbox):
            continue
        box = _noisy_box(rng, gt.bbox, profile.loc_sigma, width, height)
        score = iou(box, gt.bbox)
        if profile.conf_sigma > 0.0:
            score += float(rng.normal(0.0, profile.conf_sigma))
        score = min(1.0, max(0.0, score))
        dets.append(Detection(box, gt.class_id, score, profile.model_id, len(dets)))
    for _ in range(int(rng.poisson(profile.fp_mean))):
        w, h = rng.uniform(profile.fp_size[0], profile.fp_size[1], size=2)
        x0 = rng.uniform(0.0, width - w)
        y0 = rng.uniform(0.0, height - h)
        box = BoundingBox(float(x0), float(y0), float(x0 + w), float(y0 + h))
        class_id = int(rng.integers(0, profile.n_classes))
        score = float(rng.uniform(0.05, 0.5))
        dets.append(Detection(box, class_id, score, profile.model_id, len(dets)))
    return Frame(frame.frame_id, tuple(dets))


def emulate_detector(gt: FrameSet, profile: DetectorProfile) -> FrameSet:
    """Per-model detections for every ground-truth frame."""
    return FrameSet(
        gt.image_width,
        gt.image_height,
        tuple(emulate_frame(f, profile, gt.image_width, gt.image_height) for f in gt.frames),
        model_id=profile.model_id,
    )


@dataclass
class Benchmark:
    ground_truth: FrameSet
    detections: dict[str, FrameSet] = field(default_factory=dict)


def build_benchmark(
    cfg: ScenarioConfig | None = None, profiles: tuple[DetectorProfile, ...] | None = None
) -> Benchmark:
    cfg = cfg or ScenarioConfig()
    profiles = profiles or default_profiles(cfg.seed)
    gt = generate_scenario(cfg)
    return Benchmark(gt, {p.model_id: emulate_detector(gt, p) for p in profiles})
