import random
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from usmask.core import BBox, CategoryLabel, Detection, GroundTruth


def random_instance(rng: random.Random, max_frames=5, max_boxes=4, grid=40):
    """A small random detection-evaluation instance with integer boxes.

    Guarantees at least one ground-truth box so AP is defined.
    """
    n_frames = rng.randint(1, max_frames)
    gts, dets = [], []
    for frame in range(n_frames):
        for _ in range(rng.randint(0, max_boxes)):
            gts.append(
                GroundTruth(frame, _random_box(rng, grid), _random_cat(rng))
            )
        for _ in range(rng.randint(0, max_boxes)):
            base = rng.choice(gts).bbox if gts and rng.random() < 0.6 else None
            bbox = _jitter(rng, base, grid) if base else _random_box(rng, grid)
            dets.append(
                Detection(
                    frame,
                    bbox,
                    _random_cat(rng),
                    rng.randint(0, 1000) / 1000,
                )
            )
    if not gts:
        gts.append(GroundTruth(0, _random_box(rng, grid), _random_cat(rng)))
    return dets, gts, n_frames


def _random_cat(rng):
    return CategoryLabel(rng.randint(0, 1))


def _random_box(rng, grid):
    x0 = rng.randint(0, grid - 2)
    y0 = rng.randint(0, grid - 2)
    return BBox(
        float(x0),
        float(y0),
        float(rng.randint(x0 + 1, grid)),
        float(rng.randint(y0 + 1, grid)),
    )


def _jitter(rng, box, grid):
    # Overlapping variant of an existing box so nontrivial IoUs occur.
    dx, dy = rng.randint(-3, 3), rng.randint(-3, 3)
    x0 = min(max(int(box.x_min) + dx, 0), grid - 1)
    y0 = min(max(int(box.y_min) + dy, 0), grid - 1)
    x1 = min(max(int(box.x_max) + dx, x0 + 1), grid)
    y1 = min(max(int(box.y_max) + dy, y0 + 1), grid)
    return BBox(float(x0), float(y0), float(x1), float(y1))


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture
def nprng():
    return np.random.default_rng(12345)
