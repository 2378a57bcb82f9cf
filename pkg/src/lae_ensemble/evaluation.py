"""Detection evaluation: greedy matching, PR curves, all-points AP, mean IoU."""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import FrameSet, GroundTruthAnnotation, iou
from .errors import FrameMismatch, NoGroundTruth, ValidationError


@dataclass(frozen=True)
class MatchResult:
    """Matching outcome for one frame.

    ``true_positives`` holds ``(detection, annotation, iou)`` triples.
    """

    frame_id: int
    true_positives: tuple = ()
    false_positives: tuple = ()
    false_negatives: tuple = ()
    iou_threshold: float = 0.5


@dataclass(frozen=True)
class PRPoint:
    score_threshold: float
    tp: int
    fp: int
    precision: float
    recall: float


@dataclass
class EvalReport:
    iou_threshold: float
    per_class_ap: dict[int, float]
    mean_ap: float
    mean_iou: float | None
    pr_curves: dict[int, list[PRPoint]]
    tp: int
    fp: int
    fn: int
    per_class_counts: dict[int, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "iou_threshold": self.iou_threshold,
            "mean_ap": self.mean_ap,
            "mean_iou": self.mean_iou,
            "counts": {"tp": self.tp, "fp": self.fp, "fn": self.fn},
            "per_class": [
                {
                    "class_id": c,
                    "ap": self.per_class_ap.get(c),
                    **self.per_class_counts.get(c, {}),
                    "pr_curve": [
                        {
                            "threshold": p.score_threshold,
                            "tp": p.tp,
                            "fp": p.fp,
                            "precision": p.precision,
                            "recall": p.recall,
                        }
                        for p in self.pr_curves.get(c, [])
                    ],
                }
                for c in sorted(set(self.per_class_ap) | set(self.per_class_counts))
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        per_class_ap, curves, counts = {}, {}, {}
        for entry in data["per_class"]:
            c = int(entry["class_id"])
            if entry.get("ap") is not None:
                per_class_ap[c] = entry["ap"]
            counts[c] = {k: entry[k] for k in ("tp", "fp", "fn") if k in entry}
            curves[c] = [
                PRPoint(p["threshold"], p["tp"], p["fp"], p["precision"], p["recall"]) for p in entry["pr_curve"]
            ]
        return cls(
            iou_threshold=data["iou_threshold"],
            per_class_ap=per_class_ap,
            mean_ap=data["mean_ap"],
            mean_iou=data["mean_iou"],
            pr_curves={c: v for c, v in curves.items() if c in per_class_ap},
            tp=data["counts"]["tp"],
            fp=data["counts"]["fp"],
            fn=data["counts"]["fn"],
            per_class_counts=counts,
        )


def _check_threshold(iou_threshold: float) -> None:
    if not 0.0 < iou_threshold <= 1.0:
        raise ValidationError(f"matching IoU threshold {iou_threshold} outside (0, 1]")


def match_frame(
    dets: Sequence,
    gts: Sequence[GroundTruthAnnotation],
    iou_threshold: float = 0.5,
    frame_id: int = 0,
) -> MatchResult:
    """Greedy, class-aware matching of detections to annotations.

    Detections are visited by descending score (ties by ``det_id``); each one
    claims the unmatched same-class annotation with the highest IoU at or
    above ``iou_threshold``, lowest ``gt_id`` on ties.
    """
    _check_threshold(iou_threshold)
    unmatched = sorted(gts, key=lambda g: g.gt_id)
    tps, fps = [], []
    for det in sorted(dets, key=lambda d: (-d.score, d.det_id)):
        best, best_iou = None, iou_threshold
        for gt in unmatched:
            if gt.class_id != det.class_id:
                continue
            overlap = iou(det.bbox, gt.bbox)
            if overlap >= best_iou and (best is None or overlap > best_iou):
                best, best_iou = gt, overlap
        if best is None:
            fps.append(det)
        else:
            unmatched.remove(best)
            tps.append((det, best, best_iou))
    return MatchResult(frame_id, tuple(tps), tuple(fps), tuple(unmatched), iou_threshold)


def _total_gt(matches: Iterable[MatchResult], class_id: int) -> int:
    total = 0
    for m in matches:
        total += sum(1 for _, g, _ in m.true_positives if g.class_id == class_id)
        total += sum(1 for g in m.false_negatives if g.class_id == class_id)
    return total


def pr_curve(matches: Sequence[MatchResult], class_id: int) -> list[PRPoint]:
    """Cumulative precision/recall at every distinct detection score of a class.

    Detections sharing a score enter the curve together, so ties never
    depend on input order.
    """
    total_gt = _total_gt(matches, class_id)
    if total_gt == 0:
        raise NoGroundTruth(f"class {class_id} has no ground-truth annotations")
    scored: list[tuple[float, bool]] = []
    for m in matches:
        scored.extend((d.score, True) for d, _, _ in m.true_positives if d.class_id == class_id)
        scored.extend((d.score, False) for d in m.false_positives if d.class_id == class_id)
    scored.sort(key=lambda s: -s[0])

    points: list[PRPoint] = []
    tp = fp = 0
    i = 0
    while i < len(scored):
        threshold = scored[i][0]
        while i < len(scored) and scored[i][0] == threshold:
            if scored[i][1]:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append(PRPoint(threshold, tp, fp, tp / (tp + fp), tp / total_gt))
    return points


def _exact_points(curve: Sequence[PRPoint]) -> list[tuple[Fraction, Fraction]]:
    """(recall, precision) as rationals from the integer counts when they agree with the floats."""
    last = curve[-1]
    n_gt = round(last.tp / last.recall) if last.recall > 0 else 0
    consistent = n_gt > 0 and all(
        p.tp / n_gt == p.recall and p.tp + p.fp > 0 and p.tp / (p.tp + p.fp) == p.precision for p in curve
    )
    if consistent:
        return [(Fraction(p.tp, n_gt), Fraction(p.tp, p.tp + p.fp)) for p in curve]
    return [(Fraction(p.recall), Fraction(p.precision)) for p in curve]


def average_precision(curve: Sequence[PRPoint]) -> float:
    """All-points interpolated AP.

    Precision at each recall level is replaced by the best precision
    reached at that recall or beyond, then integrated over recall steps.
    The integral is exact and rounded once, so it does not depend on
    summation order.
    """
    if not curve:
        return 0.0
    points = _exact_points(curve)
    envelope = [precision for _, precision in points]
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    ap = Fraction(0)
    previous_recall = Fraction(0)
    for (recall, _), precision in zip(points, envelope):
        ap += (recall - previous_recall) * precision
        previous_recall = recall
    return float(min(Fraction(1), max(Fraction(0), ap)))


def mean_iou(matches: Iterable[MatchResult]) -> float | None:
    overlaps = [o for m in matches for _, _, o in m.true_positives]
    if not overlaps:
        return None
    return math.fsum(overlaps) / len(overlaps)


def match_frameset(preds: FrameSet, gts: FrameSet, iou_threshold: float = 0.5) -> list[MatchResult]:
    gt_ids = set(gts.frame_ids())
    for fid in preds.frame_ids():
        if fid not in gt_ids:
            raise FrameMismatch(f"prediction frame {fid} has no ground-truth counterpart")
    return [
        match_frame(preds.items(frame.frame_id), frame.items, iou_threshold, frame.frame_id)
        for frame in gts.frames
    ]


def evaluate(preds: FrameSet, gts: FrameSet, iou_threshold: float = 0.5) -> EvalReport:
    """Evaluate predictions against ground truth.

    Frames missing from ``preds`` count as empty.  The aggregate AP averages
    only over classes that occur in the ground truth.
    """
    matches = match_frameset(preds, gts, iou_threshold)

    gt_classes = sorted({g.class_id for f in gts.frames for g in f.items})
    per_class_ap, curves = {}, {}
    for c in gt_classes:
        curves[c] = pr_curve(matches, c)
        per_class_ap[c] = average_precision(curves[c])

    counts: dict[int, dict[str, int]] = {}

    def bump(c, key):
        counts.setdefault(c, {"tp": 0, "fp": 0, "fn": 0})[key] += 1

    for m in matches:
        for d, _, _ in m.true_positives:
            bump(d.class_id, "tp")
        for d in m.false_positives:
            bump(d.class_id, "fp")
        for g in m.false_negatives:
            bump(g.class_id, "fn")

    mean_ap = math.fsum(per_class_ap.values()) / len(per_class_ap) if per_class_ap else 0.0
    return EvalReport(
        iou_threshold=iou_threshold,
        per_class_ap=per_class_ap,
        mean_ap=mean_ap,
        mean_iou=mean_iou(matches),
        pr_curves=curves,
        tp=sum(len(m.true_positives) for m in matches),
        fp=sum(len(m.false_positives) for m in matches),
        fn=sum(len(m.false_negatives) for m in matches),
        per_class_counts={c: counts[c] for c in sorted(counts)},
    )
