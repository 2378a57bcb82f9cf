"""End-to-end fuse -> identify -> localize -> evaluate run over files."""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, TextIO

from . import io as lio
from .core import DEFAULT_REGISTRY, ClassRegistry, Frame, FrameSet, GeoCoordinate
from .errors import NoIntersection, OutOfRange, ValidationError
from .evaluation import EvalReport, evaluate
from .fusion import FusionConfig, calibrate_weights, fuse_frame, identify
from .geolocation import CameraModel, localize

FUSED_FILE = "fused.json"
IDENTIFICATION_FILE = "identification.json"
LOCALIZATION_FILE = "localization.json"
REPORT_FILE = "report.json"
PR_CSV_FILE = "pr_curve.csv"
WEIGHTS_FILE = "weights.json"


def _fuse_one(args):
    frame_id, per_model, cfg = args
    return Frame(frame_id, tuple(fuse_frame(per_model, cfg)))


def fuse_frameset(per_model: Mapping[str, FrameSet], cfg: FusionConfig, workers: int = 1) -> FrameSet:
    """Fuse every frame present in any model's output.

    Frames are independent, so ``workers > 1`` farms them out to a process
    pool; results come back in frame order either way.
    """
    if not per_model:
        raise ValidationError("no detection sets to fuse")
    sizes = {(fs.image_width, fs.image_height) for fs in per_model.values()}
    if len(sizes) != 1:
        raise ValidationError(f"detection sets disagree on image size: {sorted(sizes)}")
    width, height = sizes.pop()
    frame_ids = sorted({fid for fs in per_model.values() for fid in fs.frame_ids()})
    jobs = [(fid, {m: fs.items(fid) for m, fs in sorted(per_model.items())}, cfg) for fid in frame_ids]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            frames = list(pool.map(_fuse_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        frames = [_fuse_one(job) for job in jobs]
    return FrameSet(width, height, tuple(frames))


def per_model_reports(per_model: Mapping[str, FrameSet], gt: FrameSet, iou_threshold: float) -> dict[str, EvalReport]:
    return {m: evaluate(fs, gt, iou_threshold) for m, fs in sorted(per_model.items())}


def calibrate_from_reports(reports: Mapping[str, EvalReport]) -> dict[str, float]:
    return calibrate_weights({m: r.mean_ap for m, r in reports.items()})


def localize_frameset(fused: FrameSet, camera: CameraModel, target_altitude: float):
    out = []
    for frame in fused.frames:
        entries = []
        for det in frame.items:
            try:
                result: GeoCoordinate | str = localize(camera, det.bbox, target_altitude)
            except (NoIntersection, OutOfRange, ValidationError) as exc:
                result = f"{type(exc).__name__}: {exc}"
            entries.append((det.det_id, result))
        out.append((frame.frame_id, entries))
    return out


@dataclass
class PipelineConfig:
    detection_paths: dict[str, Path]
    output_dir: Path
    ground_truth_path: Path | None = None
    camera_path: Path | None = None
    weights_path: Path | None = None
    weights: dict[str, float] | None = None
    fallback_model_id: str | None = None
    cluster_iou_threshold: float = 0.55
    nms_iou_threshold: float = 0.5
    low_confidence_threshold: float = 0.3
    score_floor: float = 0.05
    match_iou_threshold: float = 0.5
    decision_threshold: float = 0.5
    target_altitude: float = 0.0
    registry: ClassRegistry = DEFAULT_REGISTRY
    workers: int = 1

    def __post_init__(self):
        for name in ("match_iou_threshold",):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValidationError(f"{name}={value} outside (0, 1]")
        if not 0.0 <= self.decision_threshold <= 1.0:
            raise ValidationError(f"decision_threshold={self.decision_threshold} outside [0, 1]")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass
class PipelineResult:
    fused: FrameSet
    weights: dict[str, float]
    ensemble_report: EvalReport | None = None
    model_reports: dict[str, EvalReport] = field(default_factory=dict)
    artifacts: list[Path] = field(default_factory=list)


def load_detections(paths: Mapping[str, Path], registry: ClassRegistry | None = None) -> dict[str, FrameSet]:
    out = {}
    for model_id, path in sorted(paths.items()):
        out[model_id] = lio.parse_frameset(Path(path).read_bytes(), model_id=model_id, registry=registry)
    return out


def fusion_config(cfg: PipelineConfig, weights: Mapping[str, float]) -> FusionConfig:
    return FusionConfig(
        base_weights=weights,
        fallback_model_id=cfg.fallback_model_id,
        cluster_iou_threshold=cfg.cluster_iou_threshold,
        nms_iou_threshold=cfg.nms_iou_threshold,
        low_confidence_threshold=cfg.low_confidence_threshold,
        score_floor=cfg.score_floor,
    )


def summary_line(name: str, report: EvalReport) -> str:
    miou = "n/a" if report.mean_iou is None else f"{report.mean_iou:.4f}"
    return f"{name}: AP={report.mean_ap:.4f} mIoU={miou} tp={report.tp} fp={report.fp} fn={report.fn}"


def run_pipeline(cfg: PipelineConfig, stdout: TextIO | None = None) -> PipelineResult:
    """Run every stage and write its artifacts to ``cfg.output_dir``.

    Weights come from ``weights_path``/``weights`` when given, otherwise
    from per-model AP on the ground truth, otherwise they are equal.
    """
    stdout = stdout or sys.stdout
    per_model = load_detections(cfg.detection_paths, cfg.registry)
    gt = None
    if cfg.ground_truth_path is not None:
        gt = lio.parse_frameset(Path(cfg.ground_truth_path).read_bytes(), registry=cfg.registry)
    camera = lio.parse_camera(Path(cfg.camera_path).read_bytes()) if cfg.camera_path is not None else None

    model_reports = per_model_reports(per_model, gt, cfg.match_iou_threshold) if gt is not None else {}
    if cfg.weights_path is not None:
        weights = lio.parse_weights(Path(cfg.weights_path).read_bytes())
    elif cfg.weights is not None:
        weights = dict(cfg.weights)
    elif model_reports:
        weights = calibrate_from_reports(model_reports)
    else:
        weights = {m: 1.0 for m in per_model}
    fcfg = fusion_config(cfg, weights)

    fused = fuse_frameset(per_model, fcfg, cfg.workers)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = PipelineResult(fused, dict(fcfg.base_weights), model_reports=model_reports)

    def write(name: str, payload: bytes) -> None:
        path = out / name
        path.write_bytes(payload)
        result.artifacts.append(path)

    write(FUSED_FILE, lio.emit_frameset(fused))
    write(WEIGHTS_FILE, lio.emit_weights(
        fcfg.base_weights,
        {m: r.mean_ap for m, r in model_reports.items()} if model_reports else None,
        cfg.match_iou_threshold if model_reports else None,
    ))
    idents = [(f.frame_id, identify(f.items, cfg.registry, cfg.decision_threshold)) for f in fused.frames]
    write(IDENTIFICATION_FILE, lio.emit_identifications(idents, cfg.decision_threshold))
    if camera is not None:
        locs = localize_frameset(fused, camera, cfg.target_altitude)
        write(LOCALIZATION_FILE, lio.emit_localizations(locs, cfg.target_altitude, camera))
    if gt is not None:
        report = evaluate(fused, gt, cfg.match_iou_threshold)
        result.ensemble_report = report
        write(REPORT_FILE, lio.emit_report(report, cfg.registry))
        write(PR_CSV_FILE, lio.emit_pr_csv(report, cfg.registry))
        for m, r in model_reports.items():
            write(f"report_{m}.json", lio.emit_report(r, cfg.registry))
            write(f"pr_curve_{m}.csv", lio.emit_pr_csv(r, cfg.registry))
        for m, r in model_reports.items():
            print(summary_line(m, r), file=stdout)
        print(summary_line("ensemble", report), file=stdout)
    return result
