"""Geometry and detection domain types shared by every other module."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
import math


class InvalidBox(ValueError):
    """Raised when a bounding box violates its invariants."""


class EmptyAfterClamp(ValueError):
    """Raised when clamping a box to a frame leaves zero area."""


class CategoryLabel(IntEnum):
    """The two gender-identification viewing planes."""

    TRANSVERSE = 0
    MID_SAGITTAL = 1

    @classmethod
    def from_name(cls, name: str) -> "CategoryLabel":
        key = name.strip().lower()
        if key == "transverse":
            return cls.TRANSVERSE
        if key in ("mid_sagittal", "mid-sagittal", "midsagittal"):
            return cls.MID_SAGITTAL
        raise ValueError(f"unknown category {name!r}")

    @property
    def wire_name(self) -> str:
        return "transverse" if self is CategoryLabel.TRANSVERSE else "mid_sagittal"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle in pixel coordinates, half-open on both axes.

    A pixel column j belongs to the box iff x_min <= j < x_max, likewise for
    rows, so integer annotations keep their exact pixel area.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise InvalidBox(f"non-finite coordinates: {coords}")
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise InvalidBox(f"non-positive area: {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class Detection:
    """One detector output: a box, a plane category, and a confidence."""

    frame_index: int
    bbox: BBox
    category: CategoryLabel
    confidence: float

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    """One annotated box on one frame."""

    frame_index: int
    bbox: BBox
    category: CategoryLabel

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area of two boxes; 0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def clamp_to_frame(b: BBox, width: float, height: float) -> BBox:
    """Clip a box to [0, width] x [0, height].

    Raises EmptyAfterClamp if nothing of the box survives.
    """
    if width <= 0 or height <= 0:
        raise ValueError("frame dimensions must be positive")
    x0 = min(max(b.x_min, 0.0), width)
    y0 = min(max(b.y_min, 0.0), height)
    x1 = min(max(b.x_max, 0.0), width)
    y1 = min(max(b.y_max, 0.0), height)
    if x0 >= x1 or y0 >= y1:
        raise EmptyAfterClamp(f"box {b.as_list()} leaves no area in {width}x{height}")
    return BBox(x0, y0, x1, y1)


@dataclass
class ValidationReport:
    """Annotation problems found by validate_annotations."""

    violations: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, index: int, message: str) -> None:
        self.violations.append((index, message))


def validate_annotations(
    gts: list[GroundTruth], squareness_tol: float = 0.01
) -> ValidationReport:
    """Check annotations against the square-box convention.

    Squareness is relative: |w - h| / max(w, h) must not exceed the
    tolerance, so resize distortion of exact squares stays conforming.
    """
    if squareness_tol < 0:
        raise ValueError("squareness_tol must be >= 0")
    report = ValidationReport()
    for i, gt in enumerate(gts):
        w, h = gt.bbox.width, gt.bbox.height
        deviation = abs(w - h) / max(w, h)
        if deviation > squareness_tol:
            report.add(
                i,
                f"frame {gt.frame_index}: box {gt.bbox.as_list()} aspect "
                f"deviation {deviation:.4f} exceeds tolerance {squareness_tol}",
            )
    return report
