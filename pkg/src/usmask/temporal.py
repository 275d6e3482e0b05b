"""Hold-based false-negative suppression for frame streams.

Two rules run on top of a detector: a plain hold replays the last boxes for
up to N silent frames, and a similarity-gated hold keeps replaying as long
as the current frame stays structurally similar to the last frame that had
a detection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import BBox, CategoryLabel, Detection
from .ssim import SsimParams, mssim


class StreamInconsistency(RuntimeError):
    """Raised when a frame disagrees with the stream's established geometry."""


class HoldMode(Enum):
    OFF = "off"
    BBOX_HOLD = "bbox_hold"
    BBOX_HOLD_SIM = "bbox_hold_sim"


class DecisionSource(Enum):
    FRESH = "fresh"
    HELD = "held"
    HELD_SIM = "held_sim"
    NONE = "none"


@dataclass(frozen=True)
class HoldConfig:
    mode: HoldMode = HoldMode.BBOX_HOLD_SIM
    hold_frames: int = 15
    ssim_threshold: float = 0.85
    ssim_params: SsimParams = SsimParams()

    def __post_init__(self) -> None:
        if self.hold_frames < 0:
            raise ValueError("hold_frames must be >= 0")
        if not (0.0 <= self.ssim_threshold <= 1.0):
            raise ValueError("ssim_threshold must be in [0, 1]")


@dataclass
class HoldState:
    """Per-stream memory between frames."""

    last_boxes: list[tuple[BBox, CategoryLabel]] = field(default_factory=list)
    frames_since_detection: int = 0
    reference_frame: np.ndarray | None = None


@dataclass
class MaskDecision:
    boxes: list[tuple[BBox, CategoryLabel]]
    source: DecisionSource
    ssim_value: float | None = None


def step(
    state: HoldState,
    frame: np.ndarray,
    fresh: list[Detection],
    cfg: HoldConfig,
) -> MaskDecision:
    """Advance the hold state machine by one frame and decide what to mask.

    Fresh detections always win and reset the hold. On silent frames the
    behavior depends on the mode; with the similarity gate a sufficiently
    similar frame freezes the hold counter, so an unchanged scene keeps its
    mask indefinitely.
    """
    if state.reference_frame is not None and state.reference_frame.shape != frame.shape:
        raise StreamInconsistency(
            f"frame shape {frame.shape} != stream shape {state.reference_frame.shape}"
        )

    if fresh:
        boxes = [(d.bbox, d.category) for d in fresh]
        state.last_boxes = boxes
        state.frames_since_detection = 0
        state.reference_frame = frame
        return MaskDecision(boxes=list(boxes), source=DecisionSource.FRESH)

    if cfg.mode is HoldMode.OFF or not state.last_boxes:
        state.frames_since_detection += 1
        return MaskDecision(boxes=[], source=DecisionSource.NONE)

    similarity: float | None = None
    if cfg.mode is HoldMode.BBOX_HOLD_SIM:
        similarity = mssim(frame, state.reference_frame, cfg.ssim_params)
        if similarity > cfg.ssim_threshold:
            # Similarity refreshes the hold: the counter does not advance.
            return MaskDecision(
                boxes=list(state.last_boxes),
                source=DecisionSource.HELD_SIM,
                ssim_value=similarity,
            )

    held = state.frames_since_detection < cfg.hold_frames
    state.frames_since_detection += 1
    if held:
        return MaskDecision(
            boxes=list(state.last_boxes),
            source=DecisionSource.HELD,
            ssim_value=similarity,
        )
    return MaskDecision(boxes=[], source=DecisionSource.NONE, ssim_value=similarity)


def run_stream(
    frames: list[np.ndarray],
    per_frame_detections: list[list[Detection]],
    cfg: HoldConfig,
) -> list[MaskDecision]:
    """Sequential fold of step over an aligned stream."""
    if len(frames) != len(per_frame_detections):
        raise ValueError(
            f"{len(frames)} frames vs {len(per_frame_detections)} detection lists"
        )
    state = HoldState()
    return [
        step(state, frame, dets, cfg)
        for frame, dets in zip(frames, per_frame_detections)
    ]


def fn_rate_report(
    decisions: list[MaskDecision], roi_frames: list[bool]
) -> tuple[float, float, float]:
    """Frame-level false-negative rates before and after the hold rules.

    roi_frames marks each frame as one that should carry a mask. A frame
    counts as a raw miss when the detector produced nothing fresh, and as a
    residual miss when the final decision emitted no boxes.
    """
    if len(decisions) != len(roi_frames):
        raise ValueError("decisions and roi_frames must be aligned")
    n_roi = sum(roi_frames)
    if n_roi == 0:
        return 0.0, 0.0, 0.0
    raw_miss = sum(
        1
        for d, roi in zip(decisions, roi_frames)
        if roi and d.source is not DecisionSource.FRESH
    )
    post_miss = sum(
        1
        for d, roi in zip(decisions, roi_frames)
        if roi and d.source is DecisionSource.NONE
    )
    raw = raw_miss / n_roi
    post = post_miss / n_roi
    reduction = 1.0 - post / raw if raw > 0 else 0.0
    return raw, post, reduction
