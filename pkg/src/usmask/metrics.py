"""Object-detection evaluation: matching, P/R/F1, AP, FPPI, threshold sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import BBox, CategoryLabel, Detection, GroundTruth, iou

AP_RECALL_POINTS = 101
AP_IOU_GRID = [0.50 + 0.05 * i for i in range(10)]


class NoGroundTruth(ValueError):
    """Raised when AP is requested for a category with no ground truth."""


@dataclass
class MatchResult:
    """Outcome of matching detections against ground truth."""

    tp: int
    fp: int
    fn: int
    matched_pairs: list[tuple[int, int, float]] = field(default_factory=list)


@dataclass
class EvalReport:
    """One full evaluation row at a fixed operating point."""

    ap_50: float
    ap_50_95: float
    precision: float
    recall: float
    f1: float
    fppi: float
    tp: int
    fp: int
    fn: int
    conf_thr: float
    iou_thr: float

    def to_dict(self) -> dict:
        return {
            "ap_50": self.ap_50,
            "ap_50_95": self.ap_50_95,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fppi": self.fppi,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "conf_thr": self.conf_thr,
            "iou_thr": self.iou_thr,
        }


@dataclass
class SweepCurve:
    """F1/precision/recall/FPPI as a function of the confidence threshold."""

    points: list[tuple[float, float, float, float, float]]
    best_conf: float
    best_f1: float


def _sorted_by_confidence(dets: list[Detection]) -> list[Detection]:
    # Stable sort keeps input order on confidence ties.
    return sorted(dets, key=lambda d: -d.confidence)


def match_frame(
    dets: list[Detection], gts: list[GroundTruth], iou_thr: float
) -> MatchResult:
    """Greedy per-frame matching in descending confidence order.

    Each detection claims the unmatched same-category ground truth with the
    highest IoU >= iou_thr; IoU ties go to the lowest ground-truth index.
    """
    if not (0.0 < iou_thr <= 1.0):
        raise ValueError(f"iou_thr {iou_thr} outside (0, 1]")
    frames = {d.frame_index for d in dets} | {g.frame_index for g in gts}
    if len(frames) > 1:
        raise ValueError(f"mixed frame indices: {sorted(frames)}")

    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    taken = [False] * len(gts)
    pairs: list[tuple[int, int, float]] = []
    for di in order:
        det = dets[di]
        best_gi = -1
        best_iou = 0.0
        for gi, gt in enumerate(gts):
            if taken[gi] or gt.category != det.category:
                continue
            v = iou(det.bbox, gt.bbox)
            if v >= iou_thr and v > best_iou:
                best_iou = v
                best_gi = gi
        if best_gi >= 0:
            taken[best_gi] = True
            pairs.append((di, best_gi, best_iou))
    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(dets) - tp, fn=len(gts) - tp, matched_pairs=pairs)


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """P, R, F1 from raw counts; zero denominators yield zero by convention."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be >= 0")
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def _by_frame(items):
    grouped: dict[int, list] = {}
    for it in items:
        grouped.setdefault(it.frame_index, []).append(it)
    return grouped


def _tp_flags(
    dets: list[Detection], gts: list[GroundTruth], iou_thr: float
) -> list[bool]:
    """TP/FP flag per detection, in global descending-confidence rank order.

    Matching follows match_frame semantics: within each frame, detections are
    consumed in the global confidence order and claim the best free
    same-category ground truth.
    """
    gts_by_frame = _by_frame(gts)
    taken: dict[int, list[bool]] = {f: [False] * len(g) for f, g in gts_by_frame.items()}
    flags: list[bool] = []
    for det in _sorted_by_confidence(dets):
        frame_gts = gts_by_frame.get(det.frame_index, [])
        free = taken.get(det.frame_index, [])
        best_gi = -1
        best_iou = 0.0
        for gi, gt in enumerate(frame_gts):
            if free[gi] or gt.category != det.category:
                continue
            v = iou(det.bbox, gt.bbox)
            if v >= iou_thr and v > best_iou:
                best_iou = v
                best_gi = gi
        if best_gi >= 0:
            free[best_gi] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(
    dets: list[Detection],
    gts: list[GroundTruth],
    iou_thr: float,
    category: CategoryLabel,
) -> float:
    """101-point interpolated AP for one category at one IoU threshold."""
    cat_gts = [g for g in gts if g.category == category]
    if not cat_gts:
        raise NoGroundTruth(f"no ground truth of category {category.name}")
    cat_dets = [d for d in dets if d.category == category]
    flags = _tp_flags(cat_dets, cat_gts, iou_thr)

    n_gt = len(cat_gts)
    precisions: list[float] = []
    recalls: list[float] = []
    tp = 0
    for rank, is_tp in enumerate(flags, start=1):
        if is_tp:
            tp += 1
        precisions.append(tp / rank)
        recalls.append(tp / n_gt)

    total = 0.0
    for i in range(AP_RECALL_POINTS):
        r = i / (AP_RECALL_POINTS - 1)
        best = 0.0
        for p, rec in zip(precisions, recalls):
            if rec >= r and p > best:
                best = p
        total += best
    return total / AP_RECALL_POINTS


def _categories_present(gts: list[GroundTruth]) -> list[CategoryLabel]:
    return [c for c in CategoryLabel if any(g.category == c for g in gts)]


def mean_average_precision(
    dets: list[Detection], gts: list[GroundTruth], iou_thr: float
) -> float:
    """Macro mean of per-category AP over the categories present in gts."""
    cats = _categories_present(gts)
    if not cats:
        raise NoGroundTruth("no ground truth at all")
    return sum(average_precision(dets, gts, iou_thr, c) for c in cats) / len(cats)


def ap_range(dets: list[Detection], gts: list[GroundTruth]) -> float:
    """Category-mean AP averaged over IoU thresholds 0.50 to 0.95, step 0.05."""
    return sum(mean_average_precision(dets, gts, t) for t in AP_IOU_GRID) / len(
        AP_IOU_GRID
    )


def _counts_at(
    dets: list[Detection], gts: list[GroundTruth], conf_thr: float, iou_thr: float
) -> tuple[int, int, int]:
    kept = [d for d in dets if d.confidence >= conf_thr]
    gts_by_frame = _by_frame(gts)
    dets_by_frame = _by_frame(kept)
    tp = fp = fn = 0
    for frame in sorted(set(gts_by_frame) | set(dets_by_frame)):
        m = match_frame(
            dets_by_frame.get(frame, []), gts_by_frame.get(frame, []), iou_thr
        )
        tp += m.tp
        fp += m.fp
        fn += m.fn
    return tp, fp, fn


def fppi(
    dets: list[Detection],
    gts: list[GroundTruth],
    conf_thr: float,
    iou_thr: float,
    n_images: int,
) -> float:
    """False positives per frame over all evaluated frames, negatives included."""
    if n_images <= 0:
        raise ValueError("n_images must be > 0")
    _, fp, _ = _counts_at(dets, gts, conf_thr, iou_thr)
    return fp / n_images


def sweep_confidence(
    dets: list[Detection],
    gts: list[GroundTruth],
    iou_thr: float,
    grid: list[float],
    n_images: int | None = None,
) -> SweepCurve:
    """Evaluate P/R/F1/FPPI at every confidence threshold in the grid.

    The operating point is the argmax of F1; ties resolve to the lowest
    threshold. FPPI needs a frame count; when n_images is not given the
    number of distinct annotated/detected frames is used.
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    if any(not 0.0 <= t <= 1.0 for t in grid):
        raise ValueError("grid values must lie in [0, 1]")
    if n_images is None:
        n_images = max(
            1, len({g.frame_index for g in gts} | {d.frame_index for d in dets})
        )
    points = []
    for t in sorted(grid):
        tp, fp, fn = _counts_at(dets, gts, t, iou_thr)
        p, r, f1 = precision_recall_f1(tp, fp, fn)
        points.append((t, p, r, f1, fp / n_images))
    best_conf, best_f1 = points[0][0], points[0][3]
    for t, _, _, f1, _ in points:
        if f1 > best_f1:
            best_conf, best_f1 = t, f1
    return SweepCurve(points=points, best_conf=best_conf, best_f1=best_f1)


def evaluate(
    dets: list[Detection],
    gts: list[GroundTruth],
    conf_thr: float,
    iou_thr: float,
    n_images: int,
) -> EvalReport:
    """One call producing the full evaluation row plus FPPI.

    AP is rank-based over all detections (no confidence filter); the counts
    and the derived P/R/F1/FPPI use the operating thresholds.
    """
    if n_images <= 0:
        raise ValueError("n_images must be > 0")
    tp, fp, fn = _counts_at(dets, gts, conf_thr, iou_thr)
    p, r, f1 = precision_recall_f1(tp, fp, fn)
    return EvalReport(
        ap_50=mean_average_precision(dets, gts, 0.5),
        ap_50_95=ap_range(dets, gts),
        precision=p,
        recall=r,
        f1=f1,
        fppi=fp / n_images,
        tp=tp,
        fp=fp,
        fn=fn,
        conf_thr=conf_thr,
        iou_thr=iou_thr,
    )
