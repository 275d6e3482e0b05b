"""Synthetic dropout streams for exercising the hold rules end to end."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pgm
from .core import BBox, CategoryLabel


@dataclass
class SimSpec:
    n_frames: int = 120
    width: int = 384
    height: int = 384
    roi_spans: tuple[tuple[int, int], ...] = ((20, 60), (80, 110))
    dropout_every: int = 7  # within a span, drop the detection on every k-th frame
    gap_length: int = 3
    box_size: int = 96
    noise_sigma: float = 2.0
    seed: int = 0


def _in_span(index: int, spans) -> bool:
    return any(lo <= index < hi for lo, hi in spans)


def generate(spec: SimSpec):
    """Build frames, per-frame detections (with dropouts), GT, and ROI flags.

    Frames inside a span share a static scene plus mild sensor noise, so a
    similarity gate can recognize them; between spans the scene changes.
    """
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w]
    scenes = {}
    frames = []
    gts = []
    dets = []
    roi = []
    for i in range(spec.n_frames):
        span_id = next(
            (k for k, (lo, hi) in enumerate(spec.roi_spans) if lo <= i < hi), -1
        )
        if span_id not in scenes:
            phase = rng.uniform(0, 2 * np.pi)
            scenes[span_id] = (
                90
                + 60 * np.sin(xx / 40.0 + phase)
                + 40 * np.cos(yy / 55.0 + phase)
            )
        base = scenes[span_id] + rng.normal(0.0, spec.noise_sigma, size=(h, w))
        frame = np.clip(base, 0, 255).astype(np.uint8)
        in_roi = span_id >= 0
        roi.append(in_roi)
        frame_dets = []
        if in_roi:
            s = spec.box_size
            x0 = (w - s) // 2 + (span_id * 13) % 20
            y0 = (h - s) // 2
            frame[y0 : y0 + s, x0 : x0 + s] = np.clip(
                frame[y0 : y0 + s, x0 : x0 + s].astype(np.int16) + 60, 0, 255
            ).astype(np.uint8)
            bbox = BBox(float(x0), float(y0), float(x0 + s), float(y0 + s))
            category = CategoryLabel(span_id % 2)
            gts.append({"frame": i, "bbox": bbox, "category": category})
            lo, _ = spec.roi_spans[span_id]
            offset = i - lo
            dropped = (
                spec.dropout_every > 0
                and offset % spec.dropout_every
                in range(spec.dropout_every - spec.gap_length, spec.dropout_every)
            )
            if not dropped:
                frame_dets.append(
                    {
                        "frame": i,
                        "bbox": bbox,
                        "category": category,
                        "conf": round(float(rng.uniform(0.6, 0.98)), 3),
                    }
                )
        frames.append(frame)
        dets.append(frame_dets)
    return frames, dets, gts, roi


def write_stream(out_dir, spec: SimSpec) -> None:
    """Materialize a generated stream as PGM frames plus JSONL sidecars."""
    out = Path(out_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    frames, dets, gts, roi = generate(spec)
    for i, frame in enumerate(frames):
        pgm.write(frames_dir / f"{i:06d}.pgm", frame)
    with open(out / "predictions.jsonl", "w") as fh:
        for i, frame_dets in enumerate(dets):
            fh.write(
                json.dumps(
                    {
                        "frame": i,
                        "detections": [
                            {
                                "bbox": d["bbox"].as_list(),
                                "category": d["category"].wire_name,
                                "conf": d["conf"],
                            }
                            for d in frame_dets
                        ],
                    }
                )
                + "\n"
            )
    with open(out / "groundtruth.jsonl", "w") as fh:
        by_frame: dict[int, list] = {}
        for g in gts:
            by_frame.setdefault(g["frame"], []).append(g)
        for i in range(spec.n_frames):
            fh.write(
                json.dumps(
                    {
                        "frame": i,
                        "detections": [
                            {
                                "bbox": g["bbox"].as_list(),
                                "category": g["category"].wire_name,
                            }
                            for g in by_frame.get(i, [])
                        ],
                    }
                )
                + "\n"
            )
    with open(out / "roi.json", "w") as fh:
        json.dump(roi, fh)
