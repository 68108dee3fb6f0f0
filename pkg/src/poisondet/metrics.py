"""Detection-quality metrics: IoU, greedy matching, AP, and mAP.

Matching is greedy per class in descending score order; each prediction
takes the unmatched same-class ground-truth box of maximal IoU when that IoU
clears the threshold, otherwise it is a false positive. Duplicate hits on an
already-matched box are false positives. Ties are broken deterministically:
equal IoU prefers the lower ground-truth index, equal score keeps input
order.

AP uses 101-point max-interpolated precision; scores are reported in
[0, 100]. Classes without ground truth are excluded from the mAP mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .records import Annotation, Box, Dataset, Prediction
from .validation import check_box, check_iou_threshold

# Named threshold presets for reports: single values plus the 0.50:0.05:0.95
# averaged band.
THRESHOLD_PRESETS: dict[str, tuple[float, ...]] = {
    "50": (0.50,),
    "75": (0.75,),
    "95": (0.95,),
    "50:95": tuple(np.arange(0.50, 0.951, 0.05).round(2)),
}
DEFAULT_REPORT_THRESHOLDS = ("50", "75", "50:95")


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two (u, v, w, h) boxes."""
    au, av, aw, ah = check_box(a, "first box")
    bu, bv, bw, bh = check_box(b, "second box")
    ix = min(au + aw, bu + bw) - max(au, bu)
    iy = min(av + ah, bv + bh) - max(av, bv)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union


def max_iou(box: Box, gts: Sequence[Annotation]) -> float:
    """Largest IoU of ``box`` against any ground-truth box (0 when none)."""
    best = 0.0
    for gt in gts:
        best = max(best, iou(box, gt.box))
    return best


@dataclass
class MatchResult:
    """Per-image matching outcome at one IoU threshold."""

    order: list[int]         # prediction indices, descending score
    tp: list[bool]           # parallel to order
    fn_per_class: dict[int, int] = field(default_factory=dict)

    @property
    def tp_count(self) -> int:
        return sum(self.tp)

    @property
    def fp_count(self) -> int:
        return len(self.tp) - self.tp_count

    @property
    def fn_count(self) -> int:
        return sum(self.fn_per_class.values())


def match_detections(
    preds: Sequence[Prediction], gts: Sequence[Annotation], tau: float
) -> MatchResult:
    """Greedy score-ordered per-class matching; see module docstring."""
    check_iou_threshold(tau)
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    matched: set[int] = set()
    tp_flags: list[bool] = []
    for i in order:
        pred = preds[i]
        best_j = -1
        best_iou = 0.0
        for j, gt in enumerate(gts):
            if j in matched or gt.label != pred.label:
                continue
            ov = iou(pred.box, gt.box)
            if ov > best_iou:
                best_iou = ov
                best_j = j
        if best_j >= 0 and best_iou >= tau:
            matched.add(best_j)
            tp_flags.append(True)
        else:
            tp_flags.append(False)
    fn: dict[int, int] = {}
    for j, gt in enumerate(gts):
        if j not in matched:
            fn[gt.label] = fn.get(gt.label, 0) + 1
    return MatchResult(order=order, tp=tp_flags, fn_per_class=fn)


def average_precision(
    scored_flags: Sequence[tuple[float, bool]], n_gt: int
) -> Optional[float]:
    """101-point interpolated AP in [0, 100] from pooled (score, is_tp) pairs.

    Returns None when the class has no ground-truth instances.
    """
    if n_gt == 0:
        return None
    if not scored_flags:
        return 0.0
    order = sorted(range(len(scored_flags)), key=lambda i: -scored_flags[i][0])
    tp = np.array([scored_flags[i][1] for i in order], dtype=np.int64)
    cum_tp = np.cumsum(tp)
    ranks = np.arange(1, len(tp) + 1)
    precision = cum_tp / ranks
    # Monotone precision envelope from the right; the recall comparison
    # tp/n_gt >= k/100 is done in integers so boundary points are exact.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(cum_tp * 100, np.arange(101) * n_gt, side="left")
    interp = np.where(idx < len(tp), envelope[np.minimum(idx, len(tp) - 1)], 0.0)
    return float(interp.mean() * 100.0)


@dataclass
class EvalReport:
    """Scalar results of one evaluation run; all scores in [0, 100]."""

    map: dict[str, float]
    ap_per_class: dict[str, dict[str, Optional[float]]]
    counts: dict[str, int]
    asr: Optional[float] = None
    goal: Optional[str] = None
    tre: Optional[float] = None

    def to_json_dict(self) -> dict:
        out: dict = {"map": self.map, "counts": self.counts}
        if self.asr is not None:
            out["asr"] = self.asr
            out["goal"] = self.goal
        if self.tre is not None:
            out["tre"] = self.tre
        out["ap_per_class"] = self.ap_per_class
        return out


def _map_at(
    preds_by_image: dict[str, list[Prediction]],
    dataset: Dataset,
    taus: Sequence[float],
) -> tuple[float, dict[str, Optional[float]]]:
    """mAP averaged over ``taus`` plus per-class AP averaged the same way."""
    per_class_sum: dict[int, float] = {}
    per_class_n: dict[int, int] = {}
    n_gt: dict[int, int] = {}
    for rec in dataset.images:
        if rec.id not in preds_by_image:
            continue
        for ann in rec.annotations:
            n_gt[ann.label] = n_gt.get(ann.label, 0) + 1

    for tau in taus:
        pooled: dict[int, list[tuple[float, bool]]] = {}
        for rec in dataset.images:
            preds = preds_by_image.get(rec.id)
            if preds is None:
                continue
            result = match_detections(preds, rec.annotations, tau)
            for pos, i in enumerate(result.order):
                pooled.setdefault(preds[i].label, []).append(
                    (preds[i].score, result.tp[pos])
                )
        for label, total in n_gt.items():
            ap = average_precision(pooled.get(label, []), total)
            if ap is not None:
                per_class_sum[label] = per_class_sum.get(label, 0.0) + ap
                per_class_n[label] = per_class_n.get(label, 0) + 1

    per_class: dict[str, Optional[float]] = {}
    for label in range(dataset.n_categories):
        name = dataset.categories[label]
        if label in per_class_sum:
            per_class[name] = per_class_sum[label] / per_class_n[label]
        else:
            per_class[name] = None
    values = [v for v in per_class.values() if v is not None]
    return (float(np.mean(values)) if values else 0.0), per_class


def parse_threshold_name(name: str) -> tuple[float, ...]:
    """Resolve "50", "75", "50:95", or "low:high[:step]" (percent units)."""
    if name in THRESHOLD_PRESETS:
        return THRESHOLD_PRESETS[name]
    parts = name.split(":")
    if len(parts) == 1:
        tau = float(parts[0]) / 100.0
        check_iou_threshold(tau)
        return (tau,)
    if len(parts) in (2, 3):
        low, high = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 5.0
        if not (0 < low <= high and step > 0):
            raise ValidationError(f"bad threshold range {name!r}")
        taus = tuple(
            round(t / 100.0, 6) for t in np.arange(low, high + step / 2, step)
        )
        for tau in taus:
            check_iou_threshold(tau)
        return taus
    raise ValidationError(f"cannot parse threshold {name!r}")


def mean_ap(
    preds_by_image: dict[str, list[Prediction]],
    dataset: Dataset,
    thresholds: Sequence[str] = DEFAULT_REPORT_THRESHOLDS,
) -> EvalReport:
    """mAP report over named thresholds ("50", "75", "95", "50:95", "low:high[:step]")."""
    known = set(dataset.image_ids())
    for img in preds_by_image:
        if img not in known:
            raise ValidationError(f"prediction references unknown image id {img!r}")
    map_scores: dict[str, float] = {}
    ap_tables: dict[str, dict[str, Optional[float]]] = {}
    for name in thresholds:
        taus = parse_threshold_name(name)
        score, table = _map_at(preds_by_image, dataset, taus)
        map_scores[name] = score
        ap_tables[name] = table
    counts = {
        "images": len(preds_by_image),
        "predictions": sum(len(v) for v in preds_by_image.values()),
        "annotations": sum(
            len(rec.annotations) for rec in dataset.images if rec.id in preds_by_image
        ),
    }
    return EvalReport(map=map_scores, ap_per_class=ap_tables, counts=counts)
