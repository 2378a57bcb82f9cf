"""Ensemble fusion, evaluation and geolocation of aircraft detections."""

from .core import (
    DEFAULT_REGISTRY,
    BoundingBox,
    ClassRegistry,
    Detection,
    Frame,
    FrameSet,
    FusedDetection,
    GeoCoordinate,
    GroundTruthAnnotation,
    area,
    clamp_box,
    iou,
)
from .evaluation import EvalReport, MatchResult, PRPoint, average_precision, evaluate, match_frame, mean_iou, pr_curve
from .fusion import FusionConfig, Identification, calibrate_weights, fuse_frame, identify, nms
from .geolocation import CameraModel, enu_to_geodetic, geodetic_to_enu, localize, pixel_ray, project
from .scenario import DetectorProfile, ScenarioConfig, build_benchmark, emulate_detector, generate_scenario

__version__ = "0.1.0"
