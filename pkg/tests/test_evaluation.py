import numpy as np
import pytest

from lae_ensemble.core import BoundingBox, Detection, Frame, FrameSet, GroundTruthAnnotation
from lae_ensemble.errors import FrameMismatch, NoGroundTruth
from lae_ensemble.evaluation import (
    MatchResult,
    PRPoint,
    average_precision,
    evaluate,
    match_frame,
    mean_iou,
    pr_curve,
)

from oracles import naive_ap, naive_mean_ap
from randomframes import as_det_tuples, as_gt_tuples, random_instance


def gt(box, class_id=0, gt_id=0):
    return GroundTruthAnnotation(BoundingBox(*box), class_id, gt_id)


def det(box, score, det_id=0, class_id=0):
    return Detection(BoundingBox(*box), class_id, score, "p", det_id)


def test_match_exact():
    m = match_frame([det((0, 0, 10, 10), 0.9)], [gt((0, 0, 10, 10))], 0.5)
    assert len(m.true_positives) == 1 and m.true_positives[0][2] == 1.0
    assert m.false_positives == () and m.false_negatives == ()


def test_match_class_aware():
    m = match_frame([det((0, 0, 10, 10), 0.9, class_id=1)], [gt((0, 0, 10, 10), class_id=0)], 0.5)
    assert len(m.false_positives) == 1 and len(m.false_negatives) == 1 and not m.true_positives


def test_match_greedy_by_score():
    g = gt((0, 0, 10, 10))
    # IoU 0.8 and 0.9 against the annotation
    d_hi = det((0, 0, 10, 8), 0.9, 0)
    d_lo = det((0, 0, 10, 9), 0.8, 1)
    m = match_frame([d_lo, d_hi], [g], 0.5)
    assert m.true_positives[0][0] is d_hi
    assert m.true_positives[0][2] == pytest.approx(0.8)
    assert m.false_positives == (d_lo,)


def test_match_prefers_highest_iou_then_lowest_gt_id():
    d = det((0, 0, 10, 10), 0.9)
    m = match_frame([d], [gt((1, 0, 11, 10), gt_id=0), gt((0, 0, 10, 10), gt_id=1)], 0.5)
    assert m.true_positives[0][1].gt_id == 1
    m = match_frame([d], [gt((1, 0, 11, 10), gt_id=3), gt((-1, 0, 9, 10), gt_id=2)], 0.5)
    # equal IoU on both sides -> lowest gt_id
    assert m.true_positives[0][1].gt_id == 2


def test_match_threshold():
    m = match_frame([det((0, 0, 10, 10), 0.9)], [gt((5, 0, 15, 10))], 0.5)
    assert not m.true_positives


def _curve_of(flags, n_gt):
    """Frame with len(flags) detections whose TP/FP status follows ``flags``."""
    gts = [gt((100 * i, 0, 100 * i + 10, 10), gt_id=i) for i in range(n_gt)]
    dets, k = [], 0
    for j, (score, is_tp) in enumerate(flags):
        if is_tp:
            dets.append(det((100 * k, 0, 100 * k + 10, 10), score, j))
            k += 1
        else:
            dets.append(det((50 + 100 * j, 50, 60 + 100 * j, 60), score, j))
    return match_frame(dets, gts, 0.5)


def test_pr_curve_hand_case():
    m = _curve_of([(0.9, True), (0.8, False), (0.7, True)], 2)
    curve = pr_curve([m], 0)
    assert [(p.recall, p.precision) for p in curve] == [(0.5, 1.0), (0.5, 0.5), (1.0, pytest.approx(2 / 3))]
    assert [(p.tp, p.fp) for p in curve] == [(1, 0), (1, 1), (2, 1)]
    assert average_precision(curve) == 5 / 6


def test_perfect_detector():
    m = _curve_of([(0.9, True), (0.8, True), (0.7, True)], 3)
    curve = pr_curve([m], 0)
    assert all(p.precision == 1.0 for p in curve) and curve[-1].recall == 1.0
    assert average_precision(curve) == 1.0


def test_no_detections():
    m = match_frame([], [gt((0, 0, 1, 1))], 0.5)
    assert pr_curve([m], 0) == []
    assert average_precision([]) == 0.0


def test_pr_curve_no_ground_truth():
    with pytest.raises(NoGroundTruth):
        pr_curve([match_frame([det((0, 0, 1, 1), 0.5)], [], 0.5)], 0)


def test_tied_scores_form_one_point():
    m = _curve_of([(0.5, False), (0.5, True)], 1)
    (p,) = pr_curve([m], 0)
    assert (p.tp, p.fp, p.precision, p.recall) == (1, 1, 0.5, 1.0)


def test_mean_iou():
    b = BoundingBox(0, 0, 1, 1)
    g = GroundTruthAnnotation(b, 0)
    d = Detection(b, 0, 0.5)
    assert mean_iou([MatchResult(0, ((d, g, 0.7),))]) == pytest.approx(0.7)
    assert mean_iou([MatchResult(0, ((d, g, 0.6),)), MatchResult(1, ((d, g, 0.8),))]) == pytest.approx(0.7)
    assert mean_iou([MatchResult(0)]) is None


def _frameset(frames, width=640, height=480):
    return FrameSet(width, height, tuple(Frame(fid, tuple(items)) for fid, items in frames))


def test_evaluate_identity():
    gts = [gt((10, 10, 50, 50), 0, 0), gt((100, 100, 150, 170), 1, 1)]
    preds = [Detection(g.bbox, g.class_id, 1.0, "p", g.gt_id) for g in gts]
    report = evaluate(_frameset([(0, preds)]), _frameset([(0, gts)]))
    assert report.mean_ap == 1.0 and report.mean_iou == 1.0
    assert (report.tp, report.fp, report.fn) == (2, 0, 0)


def test_evaluate_empty_predictions():
    gts = _frameset([(0, [gt((10, 10, 50, 50))]), (1, [gt((0, 0, 5, 5)), gt((20, 20, 30, 30), gt_id=1)])])
    report = evaluate(_frameset([]), gts)
    assert report.mean_ap == 0.0 and report.mean_iou is None and report.fn == 3


def test_evaluate_frame_mismatch():
    with pytest.raises(FrameMismatch):
        evaluate(_frameset([(5, [])]), _frameset([(0, [])]))


def test_fp_only_class_not_averaged():
    gts = _frameset([(0, [gt((10, 10, 50, 50), 0)])])
    preds = _frameset([(0, [det((10, 10, 50, 50), 0.9, 0, 0), det((200, 200, 220, 220), 0.8, 1, 2)])])
    report = evaluate(preds, gts)
    assert report.per_class_ap == {0: 1.0}
    assert report.per_class_counts[2] == {"tp": 0, "fp": 1, "fn": 0}


def _oracle_frames(instances):
    return [(as_det_tuples(d), as_gt_tuples(g)) for d, g in instances]


@pytest.mark.parametrize("seed", range(60))
def test_ap_matches_naive_evaluator(seed):
    rng = np.random.default_rng(seed)
    instances = [random_instance(rng) for _ in range(int(rng.integers(1, 4)))]
    preds = _frameset([(i, d) for i, (d, _) in enumerate(instances)])
    gts = _frameset([(i, g) for i, (_, g) in enumerate(instances)])
    report = evaluate(preds, gts)
    for c, ap in report.per_class_ap.items():
        assert abs(ap - naive_ap(_oracle_frames(instances), c)) <= 1e-12
    assert abs(report.mean_ap - naive_mean_ap(_oracle_frames(instances))) <= 1e-12


@pytest.mark.parametrize("seed", range(40))
def test_removing_false_positive_never_lowers_ap(seed):
    rng = np.random.default_rng(500 + seed)
    dets, gts = random_instance(rng)
    m = match_frame(dets, gts)
    if not m.false_positives:
        return
    victim = m.false_positives[int(rng.integers(len(m.false_positives)))]
    before = evaluate(_frameset([(0, dets)]), _frameset([(0, gts)]))
    after = evaluate(_frameset([(0, [d for d in dets if d is not victim])]), _frameset([(0, gts)]))
    for c in before.per_class_ap:
        assert after.per_class_ap[c] >= before.per_class_ap[c] - 1e-12


@pytest.mark.parametrize("seed", range(40))
def test_duplicate_true_positive_cannot_help(seed):
    rng = np.random.default_rng(900 + seed)
    # well separated ground truth, so a duplicate cannot reach another annotation
    gts = [gt((120 * i, 0, 120 * i + 60, 60), 0, i) for i in range(4)]
    dets = [det((120 * i + rng.uniform(0, 5), rng.uniform(0, 5), 120 * i + 60, 60), float(rng.uniform(0.2, 1)), i)
            for i in range(4) if rng.random() < 0.8]
    dets += [det((rng.uniform(0, 500), 300, 500 + rng.uniform(0, 100), 400), float(rng.uniform(0, 1)), 10 + k)
             for k in range(int(rng.integers(0, 4)))]
    m = match_frame(dets, gts)
    if not m.true_positives:
        return
    original = m.true_positives[int(rng.integers(len(m.true_positives)))][0]
    copy = Detection(original.bbox, original.class_id, original.score * float(rng.uniform(0, 0.99)), "p", 99)
    before = evaluate(_frameset([(0, dets)]), _frameset([(0, gts)]))
    after = evaluate(_frameset([(0, dets + [copy])]), _frameset([(0, gts)]))
    assert after.tp == before.tp
    assert after.per_class_ap[0] <= before.per_class_ap[0] + 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_recall_monotone_and_mean_iou_bounds(seed):
    rng = np.random.default_rng(seed)
    instances = [random_instance(rng) for _ in range(3)]
    tau = float(rng.uniform(0.3, 0.9))
    preds = _frameset([(i, d) for i, (d, _) in enumerate(instances)])
    gts = _frameset([(i, g) for i, (_, g) in enumerate(instances)])
    report = evaluate(preds, gts, tau)
    for curve in report.pr_curves.values():
        recalls = [p.recall for p in curve]
        assert recalls == sorted(recalls)
        thresholds = [p.score_threshold for p in curve]
        assert thresholds == sorted(thresholds, reverse=True)
    if report.mean_iou is not None:
        assert tau <= report.mean_iou <= 1.0
    order = rng.permutation(len(instances))
    shuffled = [instances[k] for k in order]
    permuted = evaluate(
        _frameset([(i, d) for i, (d, _) in enumerate(shuffled)]),
        _frameset([(i, g) for i, (_, g) in enumerate(shuffled)]),
        tau,
    )
    if report.mean_iou is None:
        assert permuted.mean_iou is None
    else:
        assert permuted.mean_iou == pytest.approx(report.mean_iou, abs=1e-15)


def test_report_round_trip():
    m = _curve_of([(0.9, True), (0.8, False), (0.7, True)], 2)
    from lae_ensemble.evaluation import EvalReport

    report = EvalReport(0.5, {0: 5 / 6}, 5 / 6, 1.0, {0: pr_curve([m], 0)}, 2, 1, 0, {0: {"tp": 2, "fp": 1, "fn": 0}})
    assert EvalReport.from_dict(report.to_dict()) == report
    assert isinstance(report.pr_curves[0][0], PRPoint)
