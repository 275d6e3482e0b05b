"""Detector-agnostic real-time masking of ultrasound frame streams.

Submodules:
    core      geometry and detection domain types
    metrics   detection evaluation (P/R/F1, AP, FPPI, sweeps)
    ssim      structural similarity between frames
    temporal  hold-based false-negative suppression
    imgproc   preprocessing (thresholding, morphology, inpainting)
    pipeline  frame/detection sources, rendering, stream runs
    protocol  binary wire format for the streaming service
    service   TCP masking service
"""

from .core import BBox, CategoryLabel, Detection, GroundTruth, iou
from .metrics import EvalReport, evaluate, sweep_confidence
from .ssim import SsimParams, mssim
from .temporal import HoldConfig, HoldMode, HoldState, run_stream, step

__all__ = [
    "BBox",
    "CategoryLabel",
    "Detection",
    "GroundTruth",
    "iou",
    "EvalReport",
    "evaluate",
    "sweep_confidence",
    "SsimParams",
    "mssim",
    "HoldConfig",
    "HoldMode",
    "HoldState",
    "run_stream",
    "step",
]

__version__ = "0.1.0"
