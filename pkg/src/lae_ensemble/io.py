"""JSON and CSV formats for frame sets, cameras, weights and reports.

Frame-set files look like::

    {"image_width": 1280, "image_height": 960, "model_id": "one_stage",
     "frames": [{"frame_id": 0, "items": [
         {"bbox": [x1, y1, x2, y2], "class_id": 0, "score": 0.9, "det_id": 0}]}]}

An item without ``score`` is a ground-truth annotation (``det_id`` is its
annotation id, optional ``world_position`` is ``[lat, lon, alt]``).  An item
with ``contributors`` (``[[model_id, det_id], ...]``) is a fused detection.
``model_id`` at the top level is optional.

Floats are written with ``repr`` precision so that parse(emit(x)) == x.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from typing import Any, Iterable, Mapping

from .core import (
    BoundingBox,
    ClassRegistry,
    Detection,
    Frame,
    FrameSet,
    FusedDetection,
    GeoCoordinate,
    GroundTruthAnnotation,
    clamp_box,
)
from .errors import SchemaError, ValidationError
from .evaluation import EvalReport
from .geolocation import CAMERA_FIELDS, CameraModel

PR_CSV_COLUMNS = ("class", "threshold", "tp", "fp", "precision", "recall")


def dumps(obj: Any) -> bytes:
    return (json.dumps(obj, indent=1, ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")


def loads(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"input is not UTF-8 ({exc.reason})", f"byte {exc.start}") from None
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None


def _int(value: Any, ctx: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"expected integer, got {value!r}", ctx)
    return value


def _num(value: Any, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected number, got {value!r}", ctx)
    if not math.isfinite(value):
        raise ValidationError(f"{ctx}: non-finite value {value!r}")
    return float(value)


def _list(value: Any, ctx: str, length: int | None = None) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"expected array, got {type(value).__name__}", ctx)
    if length is not None and len(value) != length:
        raise SchemaError(f"expected {length} elements, got {len(value)}", ctx)
    return value


def _obj(value: Any, ctx: str, required: Iterable[str], optional: Iterable[str] = ()) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"expected object, got {type(value).__name__}", ctx)
    required = tuple(required)
    for key in required:
        if key not in value:
            raise SchemaError(f"missing field {key!r}", ctx)
    allowed = set(required) | set(optional)
    for key in value:
        if key not in allowed:
            raise SchemaError(f"unexpected field {key!r}", ctx)
    return value


def _parse_item(raw: Any, ctx: str, width: int, height: int, model_id: str, registry: ClassRegistry | None):
    item = _obj(raw, ctx, ("bbox", "class_id", "det_id"), ("score", "contributors", "world_position"))
    coords = [_num(v, f"{ctx}.bbox[{i}]") for i, v in enumerate(_list(item["bbox"], f"{ctx}.bbox", 4))]
    class_id = _int(item["class_id"], f"{ctx}.class_id")
    ident = _int(item["det_id"], f"{ctx}.det_id")
    if registry is not None and class_id not in registry:
        raise ValidationError(f"{ctx}.class_id: {class_id} not in class registry {registry.names}")
    try:
        box = clamp_box(coords, width, height)
        if "score" not in item:
            if "contributors" in item:
                raise SchemaError("ground-truth item cannot carry contributors", ctx)
            position = None
            if "world_position" in item:
                wp = _list(item["world_position"], f"{ctx}.world_position", 3)
                position = GeoCoordinate(*(_num(v, f"{ctx}.world_position[{i}]") for i, v in enumerate(wp)))
            return GroundTruthAnnotation(box, class_id, ident, position)
        if "world_position" in item:
            raise SchemaError("detections cannot carry world_position", ctx)
        score = _num(item["score"], f"{ctx}.score")
        if "contributors" in item:
            contributors = []
            for k, pair in enumerate(_list(item["contributors"], f"{ctx}.contributors")):
                pctx = f"{ctx}.contributors[{k}]"
                m, d = _list(pair, pctx, 2)
                if not isinstance(m, str):
                    raise SchemaError(f"expected model id string, got {m!r}", pctx)
                contributors.append((m, _int(d, pctx)))
            return FusedDetection(box, class_id, score, tuple(contributors), ident)
        return Detection(box, class_id, score, model_id, ident)
    except SchemaError:
        raise
    except ValidationError as exc:
        raise ValidationError(f"{ctx}: {exc}") from None


def parse_frameset(data: bytes | str, model_id: str | None = None, registry: ClassRegistry | None = None) -> FrameSet:
    """Parse a frame-set document.

    Boxes are clamped to the image; a box left with zero area raises
    ValidationError.  ``model_id`` overrides the file's own ``model_id``.
    """
    doc = _obj(loads(data), "$", ("image_width", "image_height", "frames"), ("model_id",))
    width = _int(doc["image_width"], "image_width")
    height = _int(doc["image_height"], "image_height")
    if width <= 0 or height <= 0:
        raise ValidationError(f"image size {width}x{height} must be positive")
    file_model = doc.get("model_id")
    if file_model is not None and not isinstance(file_model, str):
        raise SchemaError(f"expected string, got {file_model!r}", "model_id")
    model_id = model_id if model_id is not None else file_model

    frames = []
    kinds = set()
    for i, raw in enumerate(_list(doc["frames"], "frames")):
        fctx = f"frames[{i}]"
        frame = _obj(raw, fctx, ("frame_id", "items"))
        fid = _int(frame["frame_id"], f"{fctx}.frame_id")
        items = tuple(
            _parse_item(it, f"{fctx}.items[{j}]", width, height, model_id or "", registry)
            for j, it in enumerate(_list(frame["items"], f"{fctx}.items"))
        )
        kinds.update(type(it) for it in items)
        frames.append(Frame(fid, items))
    if len(kinds) > 1:
        raise SchemaError("file mixes ground truth, detections and fused detections", "frames")
    try:
        return FrameSet(width, height, tuple(frames), model_id=model_id)
    except ValidationError as exc:
        raise ValidationError(f"frames: {exc}") from None


def _box_list(b: BoundingBox) -> list[float]:
    return [b.x_min, b.y_min, b.x_max, b.y_max]


def _emit_item(item) -> dict:
    if isinstance(item, GroundTruthAnnotation):
        out = {"bbox": _box_list(item.bbox), "class_id": item.class_id, "det_id": item.gt_id}
        if item.world_position is not None:
            wp = item.world_position
            out["world_position"] = [wp.latitude, wp.longitude, wp.altitude]
        return out
    out = {"bbox": _box_list(item.bbox), "class_id": item.class_id, "score": item.score, "det_id": item.det_id}
    if isinstance(item, FusedDetection):
        out["contributors"] = [[m, d] for m, d in item.contributors]
    return out


def frameset_to_dict(fs: FrameSet) -> dict:
    doc: dict[str, Any] = {"image_width": fs.image_width, "image_height": fs.image_height}
    if fs.model_id is not None:
        doc["model_id"] = fs.model_id
    doc["frames"] = [{"frame_id": f.frame_id, "items": [_emit_item(it) for it in f.items]} for f in fs.frames]
    return doc


def emit_frameset(fs: FrameSet) -> bytes:
    return dumps(frameset_to_dict(fs))


def parse_camera(data: bytes | str) -> CameraModel:
    doc = _obj(loads(data), "$", CAMERA_FIELDS)
    values = {}
    for key in CAMERA_FIELDS:
        values[key] = _int(doc[key], key) if key in ("width", "height") else _num(doc[key], key)
    return CameraModel(**values)


def emit_camera(cam: CameraModel) -> bytes:
    return dumps(cam.to_dict())


def emit_weights(weights: Mapping[str, float], average_precision: Mapping[str, float] | None = None,
                 iou_threshold: float | None = None) -> bytes:
    doc: dict[str, Any] = {"weights": dict(sorted(weights.items()))}
    if average_precision is not None:
        doc["average_precision"] = dict(sorted(average_precision.items()))
    if iou_threshold is not None:
        doc["iou_threshold"] = iou_threshold
    return dumps(doc)


def parse_weights(data: bytes | str) -> dict[str, float]:
    doc = _obj(loads(data), "$", ("weights",), ("average_precision", "iou_threshold"))
    weights = doc["weights"]
    if not isinstance(weights, dict) or not weights:
        raise SchemaError("expected non-empty object of model weights", "weights")
    return {str(k): _num(v, f"weights.{k}") for k, v in weights.items()}


def report_to_dict(report: EvalReport, registry: ClassRegistry | None = None) -> dict:
    doc = report.to_dict()
    if registry is not None:
        for entry in doc["per_class"]:
            c = entry["class_id"]
            entry["class_name"] = registry.names[c] if c in registry else str(c)
    return doc


def emit_report(report: EvalReport, registry: ClassRegistry | None = None) -> bytes:
    return dumps(report_to_dict(report, registry))


def parse_report(data: bytes | str) -> EvalReport:
    return EvalReport.from_dict(loads(data))


def emit_pr_csv(report: EvalReport, registry: ClassRegistry | None = None) -> bytes:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PR_CSV_COLUMNS)
    for c in sorted(report.pr_curves):
        name = registry.names[c] if registry is not None and c in registry else str(c)
        for p in report.pr_curves[c]:
            writer.writerow([name, repr(p.score_threshold), p.tp, p.fp, repr(p.precision), repr(p.recall)])
    return buf.getvalue().encode("utf-8")


def emit_identifications(frames: Iterable[tuple[int, list]], decision_threshold: float) -> bytes:
    return dumps(
        {
            "decision_threshold": decision_threshold,
            "frames": [
                {
                    "frame_id": fid,
                    "items": [
                        {
                            "det_id": ident.detection.det_id,
                            "class_id": ident.detection.class_id,
                            "class_name": ident.class_name,
                            "score": ident.detection.score,
                            "verdict": ident.verdict,
                        }
                        for ident in idents
                    ],
                }
                for fid, idents in frames
            ],
        }
    )


def emit_localizations(frames: Iterable[tuple[int, list]], target_altitude: float, camera: CameraModel) -> bytes:
    """``frames`` yields ``(frame_id, [(det_id, GeoCoordinate | error message)])``."""
    out_frames = []
    for fid, entries in frames:
        items = []
        for det_id, result in entries:
            if isinstance(result, GeoCoordinate):
                items.append(
                    {"det_id": det_id, "latitude": result.latitude, "longitude": result.longitude,
                     "altitude": result.altitude}
                )
            else:
                items.append({"det_id": det_id, "error": str(result)})
        out_frames.append({"frame_id": fid, "items": items})
    return dumps({"target_altitude": target_altitude, "camera": camera.to_dict(), "frames": out_frames})
