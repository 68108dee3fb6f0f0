"""Newline-delimited JSON wire format for detector predictions.

One object per line, one line per (image id, trigger activation location)
pair::

    {"image_id": "123", "tal": [x, y] | null,
     "detections": [{"bbox": [u, v, w, h], "label": 0, "score": 0.9}, ...]}

Field order inside an object is free on input; emission is deterministic.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .errors import FormatError, ValidationError
from .records import Prediction, PredictionSet, Tal


def parse_prediction_line(line: str, lineno: int = 0) -> tuple[str, Optional[Tal], list[Prediction]]:
    """Parse and validate one wire-format line."""
    where = f"line {lineno}" if lineno else "record"
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{where}: malformed JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected a JSON object")
    try:
        image_id = str(obj["image_id"])
        raw_tal = obj["tal"]
        raw_dets = obj["detections"]
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {exc.args[0]!r}") from exc
    tal: Optional[Tal] = None
    if raw_tal is not None:
        if not (isinstance(raw_tal, (list, tuple)) and len(raw_tal) == 2):
            raise FormatError(f"{where}: tal must be [x, y] or null")
        tal = (int(raw_tal[0]), int(raw_tal[1]))
    preds = []
    for det in raw_dets:
        try:
            box = tuple(float(x) for x in det["bbox"])
            label = int(det["label"])
            score = float(det["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{where}: bad detection record: {det!r}") from exc
        if len(box) != 4:
            raise FormatError(f"{where}: bbox must have 4 entries, got {det['bbox']!r}")
        try:
            preds.append(Prediction(box=box, label=label, score=score))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from exc
    return image_id, tal, preds


def load_predictions(path: str | Path) -> PredictionSet:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise OSError(f"cannot read predictions file {path}: {exc}") from exc
    out = PredictionSet()
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        image_id, tal, preds = parse_prediction_line(line, i)
        out.add(image_id, tal, preds)
    return out


def save_predictions(preds: PredictionSet, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for (image_id, tal), dets in preds.entries.items():
            fh.write(format_prediction_line(image_id, tal, dets))
            fh.write("\n")


def format_prediction_line(image_id: str, tal: Optional[Tal], dets: list[Prediction]) -> str:
    obj = {
        "image_id": image_id,
        "tal": None if tal is None else [tal[0], tal[1]],
        "detections": [
            {"bbox": list(p.box), "label": p.label, "score": p.score} for p in dets
        ],
    }
    return json.dumps(obj, separators=(",", ":"))
