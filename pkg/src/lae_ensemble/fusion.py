"""Confidence-weighted box fusion across detectors, NMS and identification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import BoundingBox, ClassRegistry, Detection, FusedDetection, iou
from .errors import AllZeroAP, UnknownModel, ValidationError

MALICIOUS = "malicious"
UNCERTAIN = "uncertain"


def _rank_key(det):
    return (-det.score, det.det_id)


def nms(dets: Sequence, iou_threshold: float) -> list:
    """Greedy class-aware non-maximum suppression.

    Works on anything exposing ``bbox``, ``class_id``, ``score`` and
    ``det_id``.  A candidate is dropped when it overlaps an already kept box
    of the same class with IoU >= ``iou_threshold``.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValidationError(f"NMS IoU threshold {iou_threshold} outside (0, 1]")
    kept: list = []
    kept_by_class: dict[int, list] = {}
    for det in sorted(dets, key=_rank_key):
        same_class = kept_by_class.setdefault(det.class_id, [])
        if any(iou(det.bbox, k.bbox) >= iou_threshold for k in same_class):
            continue
        same_class.append(det)
        kept.append(det)
    return kept


def calibrate_weights(ap_per_model: Mapping[str, float]) -> dict[str, float]:
    """Fusion weights proportional to each model's average precision."""
    for model_id, ap in ap_per_model.items():
        if not 0.0 <= ap <= 1.0:
            raise ValidationError(f"AP {ap} of model {model_id!r} outside [0, 1]")
    total = math.fsum(ap_per_model.values())
    if total <= 0.0:
        raise AllZeroAP("every model has AP 0; no signal to weight by")
    return {m: ap / total for m, ap in ap_per_model.items()}


def normalize_weights(weights: Mapping[str, float]) -> dict[str, float]:
    for model_id, w in weights.items():
        if not (math.isfinite(w) and w >= 0.0):
            raise ValidationError(f"weight {w} of model {model_id!r} must be finite and >= 0")
    total = math.fsum(weights.values())
    if total <= 0.0:
        raise ValidationError("base weights sum to zero")
    return {m: w / total for m, w in sorted(weights.items())}


@dataclass(frozen=True)
class FusionConfig:
    """Fusion parameters.

    ``base_weights`` are normalized to sum to one at construction.
    ``fallback_model_id`` names the detector whose box is used verbatim when
    every member of a multi-model cluster is below ``low_confidence_threshold``.
    """

    base_weights: Mapping[str, float]
    fallback_model_id: str | None = None
    cluster_iou_threshold: float = 0.55
    nms_iou_threshold: float = 0.5
    low_confidence_threshold: float = 0.3
    score_floor: float = 0.05
    _models: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        weights = normalize_weights(self.base_weights)
        object.__setattr__(self, "base_weights", weights)
        object.__setattr__(self, "_models", tuple(weights))
        if self.fallback_model_id is None:
            object.__setattr__(self, "fallback_model_id", self._models[0])
        if self.fallback_model_id not in weights:
            raise ValidationError(f"fallback model {self.fallback_model_id!r} has no base weight")
        for name in ("cluster_iou_threshold", "nms_iou_threshold"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValidationError(f"{name}={value} outside (0, 1]")
        for name in ("low_confidence_threshold", "score_floor"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name}={value} outside [0, 1]")

    def weight(self, model_id: str) -> float:
        try:
            return self.base_weights[model_id]
        except KeyError:
            raise UnknownModel(f"model {model_id!r} has no base weight") from None


@dataclass
class _Cluster:
    class_id: int
    members: list[Detection]
    bbox: BoundingBox

    def models(self) -> set[str]:
        return {m.model_id for m in self.members}


def _weighted_box(members: Sequence[Detection], evidence: Sequence[float]) -> BoundingBox:
    total = math.fsum(evidence)
    coords = []
    for k in range(4):
        values = [m.bbox.as_tuple()[k] for m in members]
        if total > 0.0:
            v = math.fsum(e * x for e, x in zip(evidence, values)) / total
        else:
            v = math.fsum(values) / len(values)
        # pin rounding inside the member hull so agreement stays exact
        coords.append(min(max(v, min(values)), max(values)))
    return BoundingBox(*coords)


def _cluster(pool: list[Detection], cfg: FusionConfig) -> list[_Cluster]:
    pool = sorted(pool, key=lambda d: (-d.score, d.model_id, d.det_id))
    clusters: list[_Cluster] = []
    for det in pool:
        best, best_iou = None, -1.0
        for cluster in clusters:
            if cluster.class_id != det.class_id:
                continue
            overlap = iou(cluster.bbox, det.bbox)
            if overlap >= cfg.cluster_iou_threshold and overlap > best_iou:
                best, best_iou = cluster, overlap
        if best is None or det.model_id in best.models():
            clusters.append(_Cluster(det.class_id, [det], det.bbox))
            continue
        best.members.append(det)
        best.bbox = _weighted_box(best.members, [cfg.weight(m.model_id) * m.score for m in best.members])
    return clusters


def _fuse_cluster(cluster: _Cluster, cfg: FusionConfig) -> tuple[BoundingBox, float]:
    members = cluster.members
    weights = [cfg.weight(m.model_id) for m in members]
    evidence = [w * m.score for w, m in zip(weights, members)]
    weight_in_cluster = math.fsum(weights)
    if weight_in_cluster > 0.0:
        scores = [m.score for m in members]
        score = math.fsum(evidence) / weight_in_cluster
        score = min(max(score, min(scores)), max(scores))
    else:
        score = 0.0
    if cluster.models() != set(cfg.base_weights):
        score *= weight_in_cluster / math.fsum(cfg.base_weights.values())
    score = min(1.0, max(0.0, score))
    box = cluster.bbox
    if len(members) > 1 and all(m.score < cfg.low_confidence_threshold for m in members):
        for m in members:
            if m.model_id == cfg.fallback_model_id:
                box = m.bbox
                break
    return box, score


def fuse_frame(per_model_dets: Mapping[str, Sequence[Detection]], cfg: FusionConfig) -> list[FusedDetection]:
    """Fuse one frame of detections from several models.

    Detections are clustered per class by IoU against the running fused box
    (highest-scoring first, at most one member per model), averaged with
    weight x confidence evidence, down-weighted by the share of total weight
    the cluster represents, then floored and passed through NMS.
    """
    pool: list[Detection] = []
    for model_id in sorted(per_model_dets):
        for det in per_model_dets[model_id]:
            if det.model_id != model_id:
                det = Detection(det.bbox, det.class_id, det.score, model_id, det.det_id)
            cfg.weight(det.model_id)
            pool.append(det)

    candidates = []
    for index, cluster in enumerate(_cluster(pool, cfg)):
        box, score = _fuse_cluster(cluster, cfg)
        if score < cfg.score_floor:
            continue
        contributors = tuple(sorted((m.model_id, m.det_id) for m in cluster.members))
        candidates.append(FusedDetection(box, cluster.class_id, score, contributors, det_id=index))

    kept = nms(candidates, cfg.nms_iou_threshold)
    kept.sort(key=lambda f: (-f.score, f.bbox.x_min, f.bbox.y_min, f.bbox.x_max, f.bbox.y_max,
                             f.class_id, f.contributors))
    return [
        FusedDetection(f.bbox, f.class_id, f.score, f.contributors, det_id=rank)
        for rank, f in enumerate(kept)
    ]


@dataclass(frozen=True)
class Identification:
    detection: FusedDetection
    class_name: str
    verdict: str


def identify(
    fused: Sequence[FusedDetection],
    registry: ClassRegistry,
    decision_threshold: float = 0.5,
) -> list[Identification]:
    """Label fused boxes as malicious aircraft or uncertain.

    Sub-threshold detections are kept with verdict ``uncertain`` so the
    output still accounts for every fused box.
    """
    if not 0.0 <= decision_threshold <= 1.0:
        raise ValidationError(f"decision threshold {decision_threshold} outside [0, 1]")
    return [
        Identification(f, registry.name(f.class_id), MALICIOUS if f.score >= decision_threshold else UNCERTAIN)
        for f in fused
    ]
