"""Length-prefixed binary wire protocol for the streaming masking service.

Message layout (all integers big-endian):

    magic    4 bytes  b"USMK"
    version  1 byte   (currently 1)
    type     1 byte   1=FRAME 2=MASKED 3=ERROR 4=CONFIG
    length   4 bytes  payload byte count (<= 16 MiB)
    payload  length bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .core import BBox, CategoryLabel

MAGIC = b"USMK"
VERSION = 1
MAX_PAYLOAD = 16 * 1024 * 1024
HEADER = struct.Struct(">4sBBI")

_DET = struct.Struct(">HHHHBH")
_BOX = struct.Struct(">HHHHB")


class ProtocolError(ValueError):
    pass


class BadMagic(ProtocolError):
    pass


class UnsupportedVersion(ProtocolError):
    pass


class Oversize(ProtocolError):
    pass


class Truncated(ProtocolError):
    pass


class MsgType(IntEnum):
    FRAME = 1
    MASKED = 2
    ERROR = 3
    CONFIG = 4


@dataclass(frozen=True)
class WireMessage:
    msg_type: MsgType
    payload: bytes


@dataclass
class WireDetection:
    bbox: tuple[int, int, int, int]
    category: CategoryLabel
    conf_milli: int


@dataclass
class FramePayload:
    frame_index: int
    width: int
    height: int
    detections: list[WireDetection]
    pixels: bytes


@dataclass
class MaskedPayload:
    frame_index: int
    source_tag: int  # 0 none, 1 fresh, 2 held, 3 held_sim
    boxes: list[tuple[tuple[int, int, int, int], CategoryLabel]]
    pixels: bytes = b""


def encode_message(m: WireMessage) -> bytes:
    if len(m.payload) > MAX_PAYLOAD:
        raise Oversize(f"payload of {len(m.payload)} bytes exceeds cap")
    return HEADER.pack(MAGIC, VERSION, int(m.msg_type), len(m.payload)) + m.payload


def decode_message(buf: bytes) -> tuple[WireMessage, int]:
    """Decode one message from the front of buf; returns (message, consumed)."""
    if len(buf) < HEADER.size:
        raise Truncated(f"{len(buf)} bytes is shorter than the header")
    magic, version, mtype, length = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    if length > MAX_PAYLOAD:
        raise Oversize(f"declared payload of {length} bytes exceeds cap")
    try:
        mtype = MsgType(mtype)
    except ValueError as exc:
        raise ProtocolError(f"unknown message type {mtype}") from exc
    end = HEADER.size + length
    if len(buf) < end:
        raise Truncated(f"payload needs {length} bytes, have {len(buf) - HEADER.size}")
    return WireMessage(mtype, bytes(buf[HEADER.size : end])), end


def encode_frame_payload(p: FramePayload) -> bytes:
    parts = [struct.pack(">IHHH", p.frame_index, p.width, p.height, len(p.detections))]
    for det in p.detections:
        if not 0 <= det.conf_milli <= 1000:
            raise ProtocolError(f"conf_milli {det.conf_milli} outside [0, 1000]")
        parts.append(_DET.pack(*det.bbox, int(det.category), det.conf_milli))
    if len(p.pixels) != p.width * p.height:
        raise ProtocolError("pixel byte count disagrees with dimensions")
    parts.append(p.pixels)
    return b"".join(parts)


def decode_frame_payload(payload: bytes) -> FramePayload:
    if len(payload) < 10:
        raise Truncated("frame payload header incomplete")
    frame_index, width, height, n_dets = struct.unpack_from(">IHHH", payload)
    pos = 10
    dets = []
    for _ in range(n_dets):
        if len(payload) < pos + _DET.size:
            raise Truncated("detection list incomplete")
        x0, y0, x1, y1, cat, conf = _DET.unpack_from(payload, pos)
        pos += _DET.size
        if conf > 1000:
            raise ProtocolError(f"conf_milli {conf} outside [0, 1000]")
        try:
            category = CategoryLabel(cat)
        except ValueError as exc:
            raise ProtocolError(f"unknown category code {cat}") from exc
        dets.append(WireDetection((x0, y0, x1, y1), category, conf))
    pixels = payload[pos:]
    if len(pixels) != width * height:
        raise Truncated(
            f"expected {width * height} pixel bytes, got {len(pixels)}"
        )
    return FramePayload(frame_index, width, height, dets, pixels)


def encode_masked_payload(p: MaskedPayload) -> bytes:
    parts = [struct.pack(">IBH", p.frame_index, p.source_tag, len(p.boxes))]
    for bbox, category in p.boxes:
        parts.append(_BOX.pack(*bbox, int(category)))
    parts.append(p.pixels)
    return b"".join(parts)


def decode_masked_payload(payload: bytes) -> MaskedPayload:
    if len(payload) < 7:
        raise Truncated("masked payload header incomplete")
    frame_index, source_tag, n_boxes = struct.unpack_from(">IBH", payload)
    pos = 7
    boxes = []
    for _ in range(n_boxes):
        if len(payload) < pos + _BOX.size:
            raise Truncated("box list incomplete")
        x0, y0, x1, y1, cat = _BOX.unpack_from(payload, pos)
        pos += _BOX.size
        boxes.append(((x0, y0, x1, y1), CategoryLabel(cat)))
    return MaskedPayload(frame_index, source_tag, boxes, payload[pos:])


def frame_payload_from_image(
    frame_index: int, img: np.ndarray, detections: list[WireDetection]
) -> FramePayload:
    h, w = img.shape
    return FramePayload(frame_index, w, h, detections, img.astype(np.uint8).tobytes())
