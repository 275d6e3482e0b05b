"""Bit-exact binary PGM (P5, maxval 255) reading and writing."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np


class PgmError(ValueError):
    pass


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # Skip whitespace and '#' comment lines between header tokens.
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise PgmError("truncated header")
    return data[start:pos], pos


def decode(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5"):
        raise PgmError("not a binary PGM (missing P5 magic)")
    pos = 2
    tokens = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        tokens.append(tok)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PgmError(f"bad header tokens {tokens}") from exc
    if width < 1 or height < 1:
        raise PgmError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise PgmError(f"only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    pixels = data[pos : pos + width * height]
    if len(pixels) != width * height:
        raise PgmError("pixel data shorter than header promises")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def encode(img: np.ndarray) -> bytes:
    a = np.ascontiguousarray(img, dtype=np.uint8)
    if a.ndim != 2:
        raise PgmError(f"expected 2-D image, got shape {a.shape}")
    h, w = a.shape
    return b"P5\n%d %d\n255\n" % (w, h) + a.tobytes()


def read(path: str | os.PathLike) -> np.ndarray:
    return decode(Path(path).read_bytes())


def write(path: str | os.PathLike, img: np.ndarray) -> None:
    Path(path).write_bytes(encode(img))
