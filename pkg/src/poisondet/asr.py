"""Attack-success-rate computation for the six rewrite goals.

Success is decided per image against the ORIGINAL clean ground truth, never
against rewritten annotations:

* ``TMA``  - some prediction of the target class overlaps (IoU >= tau) a
  ground-truth object of a *different* class; images whose objects are all
  already the target class cannot count as successes.
* ``UMA``  - some prediction overlaps a ground-truth object (IoU >= tau,
  highest-IoU match) and carries a different label than that object.
* ``TDA``  - no ground-truth object of the target class is overlapped by any
  prediction at IoU >= tau (vacuously true when the class is absent).
* ``UDA``  - no ground-truth object at all is overlapped at IoU >= tau.
* ``TGA``  - some prediction of the target class overlaps no ground truth at
  IoU >= tau (a hallucination of the target class).
* ``UGA``  - some prediction of any class overlaps no ground truth.

ASR = 100 * successful images / evaluated images. The object-level variant
(:func:`asr_object_level`) is provided for comparison only and is NOT the
canonical definition.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .errors import ValidationError
from .metrics import iou
from .records import Annotation, Dataset, Prediction
from .validation import check_iou_threshold

DEFAULT_ASR_TAU = 0.5


def _needs_target(goal: str, target_label: Optional[int]) -> Optional[int]:
    if goal in ("TMA", "TDA", "TGA"):
        if target_label is None:
            raise ValidationError(f"goal {goal} requires target_label")
        return target_label
    return target_label


def image_success(
    goal: str,
    preds: Sequence[Prediction],
    gts: Sequence[Annotation],
    tau: float = DEFAULT_ASR_TAU,
    target_label: Optional[int] = None,
) -> bool:
    """Evaluate the per-image success predicate for one goal."""
    check_iou_threshold(tau)
    y_t = _needs_target(goal, target_label)

    if goal == "TMA":
        others = [g for g in gts if g.label != y_t]
        return any(
            p.label == y_t and max((iou(p.box, g.box) for g in others), default=0.0) >= tau
            for p in preds
        )
    if goal == "UMA":
        for p in preds:
            best_iou, best_label = 0.0, None
            for g in gts:
                ov = iou(p.box, g.box)
                if ov > best_iou:
                    best_iou, best_label = ov, g.label
            if best_iou >= tau and best_label is not None and p.label != best_label:
                return True
        return False
    if goal == "TDA":
        targets = [g for g in gts if g.label == y_t]
        return all(
            max((iou(p.box, g.box) for p in preds), default=0.0) < tau for g in targets
        )
    if goal == "UDA":
        return all(
            max((iou(p.box, g.box) for p in preds), default=0.0) < tau for g in gts
        )
    if goal == "TGA":
        return any(
            p.label == y_t and max((iou(p.box, g.box) for g in gts), default=0.0) < tau
            for p in preds
        )
    if goal == "UGA":
        return any(
            max((iou(p.box, g.box) for g in gts), default=0.0) < tau for p in preds
        )
    raise ValidationError(f"unknown goal {goal!r}")


def asr(
    goal: str,
    preds_by_image: dict[str, list[Prediction]],
    dataset: Dataset,
    tau: float = DEFAULT_ASR_TAU,
    target_label: Optional[int] = None,
) -> float:
    """Image-level ASR in [0, 100] over the images present in the run."""
    if not preds_by_image:
        raise ValidationError("empty evaluation set")
    known = {rec.id: rec for rec in dataset.images}
    successes = 0
    for img_id, preds in preds_by_image.items():
        rec = known.get(img_id)
        if rec is None:
            raise ValidationError(f"prediction references unknown image id {img_id!r}")
        if image_success(goal, preds, rec.annotations, tau, target_label):
            successes += 1
    return 100.0 * successes / len(preds_by_image)


def asr_object_level(
    goal: str,
    preds_by_image: dict[str, list[Prediction]],
    dataset: Dataset,
    tau: float = DEFAULT_ASR_TAU,
    target_label: Optional[int] = None,
) -> float:
    """Non-canonical object-level rate, for comparison with the image level.

    Misclassification/disappearance goals count affected ground-truth
    objects; generation goals count hallucinated predictions.
    """
    if not preds_by_image:
        raise ValidationError("empty evaluation set")
    check_iou_threshold(tau)
    y_t = _needs_target(goal, target_label)
    known = {rec.id: rec for rec in dataset.images}
    num = 0
    den = 0
    for img_id, preds in preds_by_image.items():
        rec = known.get(img_id)
        if rec is None:
            raise ValidationError(f"prediction references unknown image id {img_id!r}")
        gts = rec.annotations
        if goal == "TMA":
            for g in gts:
                if g.label == y_t:
                    continue
                den += 1
                num += any(p.label == y_t and iou(p.box, g.box) >= tau for p in preds)
        elif goal == "UMA":
            for g in gts:
                den += 1
                num += any(
                    p.label != g.label and iou(p.box, g.box) >= tau for p in preds
                )
        elif goal == "TDA":
            for g in gts:
                if g.label != y_t:
                    continue
                den += 1
                num += max((iou(p.box, g.box) for p in preds), default=0.0) < tau
        elif goal == "UDA":
            for g in gts:
                den += 1
                num += max((iou(p.box, g.box) for p in preds), default=0.0) < tau
        elif goal in ("TGA", "UGA"):
            for p in preds:
                if goal == "TGA" and p.label != y_t:
                    continue
                den += 1
                num += max((iou(p.box, g.box) for g in gts), default=0.0) < tau
        else:
            raise ValidationError(f"unknown goal {goal!r}")
    if den == 0:
        raise ValidationError(f"object-level ASR undefined: no {goal} denominators")
    return 100.0 * num / den
