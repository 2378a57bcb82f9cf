"""Command-line interface.

Exit status: 0 on success, 1 for validation or semantic errors, 2 for I/O
errors.  Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as lio
from .core import DEFAULT_CLASS_NAMES, ClassRegistry
from .errors import LAEError
from .evaluation import evaluate
from .fusion import calibrate_weights
from .pipeline import (
    PipelineConfig,
    fuse_frameset,
    fusion_config,
    load_detections,
    localize_frameset,
    per_model_reports,
    run_pipeline,
    summary_line,
)
from .scenario import ScenarioConfig, build_benchmark


def _model_path(spec: str) -> tuple[str | None, Path]:
    if "=" in spec:
        name, path = spec.split("=", 1)
        return name, Path(path)
    return None, Path(spec)


def _detection_paths(specs: list[str]) -> dict[str, Path]:
    out: dict[str, Path] = {}
    for spec in specs:
        name, path = _model_path(spec)
        if name is None:
            name = lio.parse_frameset(path.read_bytes()).model_id or path.stem
        if name in out:
            raise LAEError(f"model {name!r} given twice")
        out[name] = path
    return out


def _weight_pairs(specs: list[str] | None) -> dict[str, float] | None:
    if not specs:
        return None
    out = {}
    for spec in specs:
        name, _, value = spec.partition("=")
        try:
            out[name] = float(value)
        except ValueError:
            raise LAEError(f"bad --weight {spec!r}; expected NAME=VALUE") from None
    return out


def _registry(args) -> ClassRegistry:
    return ClassRegistry(tuple(n.strip() for n in args.classes.split(",")))


def _add_fusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--detections", action="append", required=True, metavar="[NAME=]PATH",
                   help="per-model detection file; repeat per model (NAME defaults to the file's model_id)")
    p.add_argument("--weights", type=Path, help="weights JSON written by 'calibrate'")
    p.add_argument("--weight", action="append", metavar="NAME=W", help="base weight for one model")
    p.add_argument("--fallback-model", help="model whose box is used when all cluster scores are low "
                                             "(default: first model id in sort order)")
    p.add_argument("--cluster-iou", type=float, default=0.55, help="IoU to join a fusion cluster (default: 0.55)")
    p.add_argument("--nms-iou", type=float, default=0.5, help="NMS IoU threshold (default: 0.5)")
    p.add_argument("--low-confidence", type=float, default=0.3,
                   help="all-members-below threshold that triggers the fallback box (default: 0.3)")
    p.add_argument("--score-floor", type=float, default=0.05, help="drop fused boxes scoring below (default: 0.05)")
    p.add_argument("--workers", type=int, default=1, help="processes for per-frame fusion (default: 1)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classes", default=",".join(DEFAULT_CLASS_NAMES),
                   help=f"comma-separated class names by id (default: {','.join(DEFAULT_CLASS_NAMES)})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lae-ensemble", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a seeded synthetic benchmark")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int, default=42, help="scenario seed (default: 42)")
    p.add_argument("--frames", type=int, default=200, help="number of frames (default: 200)")
    _add_common(p)

    p = sub.add_parser("fuse", help="fuse per-model detections")
    _add_fusion_flags(p)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5, help="matching IoU (default: 0.5)")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--pr-csv", type=Path)
    _add_common(p)

    p = sub.add_parser("calibrate", help="weights proportional to per-model AP")
    p.add_argument("--detections", action="append", required=True, metavar="[NAME=]PATH")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5, help="matching IoU (default: 0.5)")
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("localize", help="geolocate fused detections")
    p.add_argument("--fused", type=Path, required=True)
    p.add_argument("--camera", type=Path, required=True)
    p.add_argument("--target-altitude", type=float, default=0.0,
                   help="ellipsoidal altitude of the targets in metres (default: 0)")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("pipeline", help="fuse, identify, localize and evaluate in one run")
    _add_fusion_flags(p)
    p.add_argument("--gt", type=Path, help="ground truth; enables evaluation and AP-based weights")
    p.add_argument("--camera", type=Path, help="camera JSON; enables localization")
    p.add_argument("--iou-threshold", type=float, default=0.5, help="matching IoU (default: 0.5)")
    p.add_argument("--decision-threshold", type=float, default=0.5,
                   help="score at or above which a box is flagged malicious (default: 0.5)")
    p.add_argument("--target-altitude", type=float, default=0.0,
                   help="ellipsoidal altitude of the targets in metres (default: 0)")
    p.add_argument("--out-dir", type=Path, required=True)
    _add_common(p)
    return parser


def _cmd_simulate(args) -> None:
    registry = _registry(args)
    n = len(registry)
    probs = ScenarioConfig.class_probs if n == 3 else tuple(1.0 / n for _ in range(n))
    cfg = ScenarioConfig(n_frames=args.frames, seed=args.seed, registry=registry, class_probs=probs)
    bench = build_benchmark(cfg)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "ground_truth.json").write_bytes(lio.emit_frameset(bench.ground_truth))
    for m, fs in bench.detections.items():
        (args.out_dir / f"detections_{m}.json").write_bytes(lio.emit_frameset(fs))
    (args.out_dir / "camera.json").write_bytes(lio.emit_camera(cfg.camera))


def _resolve_weights(args) -> dict[str, float] | None:
    if args.weights is not None:
        return lio.parse_weights(args.weights.read_bytes())
    return _weight_pairs(args.weight)


def _cmd_fuse(args) -> None:
    registry = _registry(args)
    per_model = load_detections(_detection_paths(args.detections), registry)
    weights = _resolve_weights(args) or {m: 1.0 for m in per_model}
    cfg = PipelineConfig(
        detection_paths={}, output_dir=Path("."), fallback_model_id=args.fallback_model,
        cluster_iou_threshold=args.cluster_iou, nms_iou_threshold=args.nms_iou,
        low_confidence_threshold=args.low_confidence, score_floor=args.score_floor, workers=args.workers,
    )
    fused = fuse_frameset(per_model, fusion_config(cfg, weights), args.workers)
    args.out.write_bytes(lio.emit_frameset(fused))


def _cmd_eval(args) -> None:
    registry = _registry(args)
    preds = lio.parse_frameset(args.pred.read_bytes(), registry=registry)
    gts = lio.parse_frameset(args.gt.read_bytes(), registry=registry)
    report = evaluate(preds, gts, args.iou_threshold)
    args.report.write_bytes(lio.emit_report(report, registry))
    if args.pr_csv is not None:
        args.pr_csv.write_bytes(lio.emit_pr_csv(report, registry))
    print(summary_line(preds.model_id or args.pred.stem, report))


def _cmd_calibrate(args) -> None:
    registry = _registry(args)
    per_model = load_detections(_detection_paths(args.detections), registry)
    gt = lio.parse_frameset(args.gt.read_bytes(), registry=registry)
    reports = per_model_reports(per_model, gt, args.iou_threshold)
    aps = {m: r.mean_ap for m, r in reports.items()}
    weights = calibrate_weights(aps)
    args.out.write_bytes(lio.emit_weights(weights, aps, args.iou_threshold))
    for m in sorted(weights):
        print(f"{m}: AP={aps[m]:.4f} weight={weights[m]:.6f}")


def _cmd_localize(args) -> None:
    fused = lio.parse_frameset(args.fused.read_bytes())
    camera = lio.parse_camera(args.camera.read_bytes())
    locs = localize_frameset(fused, camera, args.target_altitude)
    args.out.write_bytes(lio.emit_localizations(locs, args.target_altitude, camera))


def _cmd_pipeline(args) -> None:
    cfg = PipelineConfig(
        detection_paths=_detection_paths(args.detections),
        output_dir=args.out_dir,
        ground_truth_path=args.gt,
        camera_path=args.camera,
        weights_path=args.weights,
        weights=_weight_pairs(args.weight),
        fallback_model_id=args.fallback_model,
        cluster_iou_threshold=args.cluster_iou,
        nms_iou_threshold=args.nms_iou,
        low_confidence_threshold=args.low_confidence,
        score_floor=args.score_floor,
        match_iou_threshold=args.iou_threshold,
        decision_threshold=args.decision_threshold,
        target_altitude=args.target_altitude,
        registry=_registry(args),
        workers=args.workers,
    )
    run_pipeline(cfg)


COMMANDS = {
    "simulate": _cmd_simulate,
    "fuse": _cmd_fuse,
    "eval": _cmd_eval,
    "calibrate": _cmd_calibrate,
    "localize": _cmd_localize,
    "pipeline": _cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LAEError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
