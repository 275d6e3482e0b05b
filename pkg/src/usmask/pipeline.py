"""Orchestration: frame/detection sources, mask rendering, stream runs."""

from __future__ import annotations

import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pgm
from .core import (
    BBox,
    CategoryLabel,
    Detection,
    EmptyAfterClamp,
    GroundTruth,
    clamp_to_frame,
)
from .temporal import HoldConfig, HoldState, MaskDecision, step

log = logging.getLogger(__name__)

DEFAULT_CONF_THR = 0.318
DEFAULT_IOU_THR = 0.6


class ParseError(ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


class SchemaError(ParseError):
    """Well-formed line whose values violate the schema."""


@dataclass
class RunConfig:
    frames_dir: Path
    predictions_path: Path | None
    output_dir: Path
    conf_thr: float = DEFAULT_CONF_THR
    iou_thr: float = DEFAULT_IOU_THR
    hold: HoldConfig = field(default_factory=HoldConfig)
    mask_style: str = "solid"  # "solid" or "pixelate"
    pixelate_block: int = 16


@dataclass
class RunSummary:
    n_frames: int
    source_counts: dict[str, int]
    elapsed_s: float
    fps: float


def _parse_detection_obj(obj: dict, frame: int, path, line_no: int, require_conf: bool):
    try:
        x0, y0, x1, y1 = (float(v) for v in obj["bbox"])
        category = CategoryLabel.from_name(obj["category"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(path, line_no, f"bad detection object: {exc}") from exc
    bbox = BBox(x0, y0, x1, y1)
    if require_conf:
        conf = obj.get("conf")
        if conf is None:
            raise SchemaError(path, line_no, "missing conf")
        if not (isinstance(conf, (int, float)) and 0.0 <= conf <= 1.0):
            raise SchemaError(path, line_no, f"confidence {conf!r} outside [0, 1]")
        return Detection(frame, bbox, category, float(conf))
    return GroundTruth(frame, bbox, category)


def _load_jsonl(path, require_conf: bool):
    items = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc}") from exc
            frame = obj.get("frame")
            if not isinstance(frame, int) or frame < 0:
                raise SchemaError(path, line_no, f"bad frame index {frame!r}")
            for det_obj in obj.get("detections", []):
                items.append(
                    _parse_detection_obj(det_obj, frame, path, line_no, require_conf)
                )
    return items


def load_predictions(path) -> dict[int, list[Detection]]:
    """Detections from a JSON Lines sidecar, grouped by frame index.

    Frames absent from the file simply yield empty lists.
    """
    grouped: dict[int, list[Detection]] = {}
    for det in _load_jsonl(path, require_conf=True):
        grouped.setdefault(det.frame_index, []).append(det)
    return grouped


def load_ground_truth(path) -> list[GroundTruth]:
    """Ground-truth boxes from the same sidecar schema, without confidences."""
    return _load_jsonl(path, require_conf=False)


def import_yolo_txt(directory, width: int, height: int) -> list[GroundTruth]:
    """Ground truth from per-frame YOLO txt files (category cx cy w h).

    The frame index is the numeric part of each filename stem; coordinates
    are normalized box centers and extents.
    """
    gts: list[GroundTruth] = []
    for path in sorted(Path(directory).glob("*.txt")):
        m = re.search(r"(\d+)", path.stem)
        if m is None:
            raise SchemaError(path, 0, "no frame number in filename")
        frame = int(m.group(1))
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 5:
                    raise ParseError(path, line_no, f"expected 5 fields, got {len(parts)}")
                try:
                    code = int(parts[0])
                    cx, cy, w, h = (float(v) for v in parts[1:])
                except ValueError as exc:
                    raise ParseError(path, line_no, str(exc)) from exc
                if code not in (0, 1):
                    raise SchemaError(path, line_no, f"unknown category code {code}")
                if not all(0.0 <= v <= 1.0 for v in (cx, cy, w, h)):
                    raise SchemaError(path, line_no, "normalized value outside [0, 1]")
                bbox = BBox(
                    (cx - w / 2) * width,
                    (cy - h / 2) * height,
                    (cx + w / 2) * width,
                    (cy + h / 2) * height,
                )
                gts.append(GroundTruth(frame, bbox, CategoryLabel(code)))
    return gts


def iter_frames(frames_dir):
    """Yield (frame_index, image) from numbered PGM files, ascending."""
    entries = []
    for path in Path(frames_dir).glob("*.pgm"):
        m = re.search(r"(\d+)", path.stem)
        if m is None:
            continue
        entries.append((int(m.group(1)), path))
    entries.sort()
    shape = None
    for index, path in entries:
        img = pgm.read(path)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(f"{path}: frame shape {img.shape} != stream shape {shape}")
        yield index, path.name, img


def _pixel_span(lo: float, hi: float, limit: int) -> tuple[int, int]:
    return max(0, math.floor(lo)), min(limit, math.ceil(hi))


def render_mask(
    frame: np.ndarray,
    boxes: list[BBox],
    style: str = "solid",
    pixelate_block: int = 16,
) -> np.ndarray:
    """Black out (or pixelate) the given boxes; everything else is untouched."""
    out = frame.copy()
    h, w = out.shape
    for box in boxes:
        x0, x1 = _pixel_span(box.x_min, box.x_max, w)
        y0, y1 = _pixel_span(box.y_min, box.y_max, h)
        if x0 >= x1 or y0 >= y1:
            continue
        if style == "solid":
            out[y0:y1, x0:x1] = 0
        elif style == "pixelate":
            b = pixelate_block
            for ry in range(y0, y1, b):
                for rx in range(x0, x1, b):
                    block = out[ry : min(ry + b, y1), rx : min(rx + b, x1)]
                    block[:] = int(block.mean() + 0.5)
        else:
            raise ValueError(f"unknown mask style {style!r}")
    return out


def _decision_record(index: int, decision: MaskDecision) -> dict:
    rec = {
        "frame": index,
        "source": decision.source.value,
        "boxes": [
            {"bbox": bbox.as_list(), "category": cat.wire_name}
            for bbox, cat in decision.boxes
        ],
    }
    if decision.ssim_value is not None:
        rec["ssim"] = decision.ssim_value
    return rec


def run(cfg: RunConfig) -> RunSummary:
    """Mask a whole stream: filter, hold, render, and log every frame."""
    predictions = (
        load_predictions(cfg.predictions_path) if cfg.predictions_path else {}
    )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    state = HoldState()
    counts: dict[str, int] = {}
    start = time.perf_counter()
    n = 0
    with open(cfg.output_dir / "decisions.jsonl", "w") as log_fh:
        for index, name, frame in iter_frames(cfg.frames_dir):
            h, w = frame.shape
            fresh = []
            for det in predictions.get(index, []):
                if det.confidence < cfg.conf_thr:
                    continue
                try:
                    bbox = clamp_to_frame(det.bbox, w, h)
                except EmptyAfterClamp:
                    log.warning("frame %d: box %s fully outside, skipped",
                                index, det.bbox.as_list())
                    continue
                fresh.append(Detection(index, bbox, det.category, det.confidence))
            decision = step(state, frame, fresh, cfg.hold)
            counts[decision.source.value] = counts.get(decision.source.value, 0) + 1
            masked = render_mask(
                frame,
                [b for b, _ in decision.boxes],
                style=cfg.mask_style,
                pixelate_block=cfg.pixelate_block,
            )
            pgm.write(cfg.output_dir / name, masked)
            log_fh.write(json.dumps(_decision_record(index, decision)) + "\n")
            n += 1
    elapsed = time.perf_counter() - start
    return RunSummary(
        n_frames=n,
        source_counts=counts,
        elapsed_s=elapsed,
        fps=n / elapsed if elapsed > 0 else float("inf"),
    )
