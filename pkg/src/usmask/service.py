"""TCP streaming masking service with per-connection hold state."""

from __future__ import annotations

import json
import logging
import socket
import socketserver
from dataclasses import dataclass, field, replace

import numpy as np

from . import protocol
from .core import BBox, Detection, InvalidBox
from .pipeline import DEFAULT_CONF_THR, render_mask
from .protocol import (
    FramePayload,
    MaskedPayload,
    MsgType,
    ProtocolError,
    Truncated,
    WireMessage,
)
from .ssim import SsimParams
from .temporal import DecisionSource, HoldConfig, HoldMode, HoldState, step

log = logging.getLogger(__name__)

SOURCE_TAGS = {
    DecisionSource.NONE: 0,
    DecisionSource.FRESH: 1,
    DecisionSource.HELD: 2,
    DecisionSource.HELD_SIM: 3,
}


@dataclass
class ServiceConfig:
    conf_thr: float = DEFAULT_CONF_THR
    hold: HoldConfig = field(default_factory=HoldConfig)
    mask_style: str = "solid"


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            if chunks:
                raise Truncated("connection closed mid-message")
            return b""
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_message(sock: socket.socket) -> WireMessage | None:
    """Read one framed message; None on clean end of stream."""
    header = _recv_exact(sock, protocol.HEADER.size)
    if not header:
        return None
    magic, version, mtype, length = protocol.HEADER.unpack(header)
    if magic != protocol.MAGIC:
        raise protocol.BadMagic(f"bad magic {magic!r}")
    if version != protocol.VERSION:
        raise protocol.UnsupportedVersion(f"version {version}")
    if length > protocol.MAX_PAYLOAD:
        raise protocol.Oversize(f"declared payload of {length} bytes exceeds cap")
    try:
        msg_type = MsgType(mtype)
    except ValueError as exc:
        raise ProtocolError(f"unknown message type {mtype}") from exc
    payload = _recv_exact(sock, length) if length else b""
    if length and len(payload) != length:
        raise Truncated("connection closed mid-payload")
    return WireMessage(msg_type, payload)


def send_message(sock: socket.socket, msg: WireMessage) -> None:
    sock.sendall(protocol.encode_message(msg))


def _detections_from_wire(frame: FramePayload, conf_thr: float) -> list[Detection]:
    dets = []
    for wd in frame.detections:
        conf = wd.conf_milli / 1000.0
        if conf < conf_thr:
            continue
        x0, y0, x1, y1 = wd.bbox
        dets.append(
            Detection(frame.frame_index, BBox(x0, y0, x1, y1), wd.category, conf)
        )
    return dets


def _apply_config(cfg: ServiceConfig, payload: bytes) -> ServiceConfig:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad CONFIG payload: {exc}") from exc
    conf_thr = obj.get("conf_thr", cfg.conf_thr)
    if not (isinstance(conf_thr, (int, float)) and 0.0 <= conf_thr <= 1.0):
        raise ProtocolError(f"conf_thr {conf_thr!r} outside [0, 1]")
    hold = cfg.hold
    if "mode" in obj:
        hold = replace(hold, mode=HoldMode(obj["mode"]))
    if "hold_frames" in obj:
        hold = replace(hold, hold_frames=int(obj["hold_frames"]))
    if "ssim_threshold" in obj:
        hold = replace(hold, ssim_threshold=float(obj["ssim_threshold"]))
    if "ssim_downsample" in obj:
        hold = replace(
            hold,
            ssim_params=replace(hold.ssim_params, downsample=int(obj["ssim_downsample"])),
        )
    return ServiceConfig(conf_thr=float(conf_thr), hold=hold, mask_style=cfg.mask_style)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:  # one connection, one stream
        cfg: ServiceConfig = replace(self.server.config)  # type: ignore[attr-defined]
        state = HoldState()
        shape: tuple[int, int] | None = None
        try:
            while True:
                msg = read_message(self.request)
                if msg is None:
                    return
                if msg.msg_type is MsgType.CONFIG:
                    try:
                        cfg = _apply_config(cfg, msg.payload)
                    except (ProtocolError, ValueError) as exc:
                        self._error(str(exc))
                        return
                    continue
                if msg.msg_type is not MsgType.FRAME:
                    self._error(f"unexpected message type {msg.msg_type.name}")
                    return
                try:
                    reply = self._process(msg.payload, cfg, state, shape)
                except (ProtocolError, InvalidBox, ValueError) as exc:
                    self._error(str(exc))
                    return
                shape = reply[1]
                send_message(self.request, reply[0])
        except ProtocolError as exc:
            log.info("protocol error from %s: %s", self.client_address, exc)
            try:
                self._error(str(exc))
            except OSError:
                pass
        except OSError:
            pass

    def _process(self, payload, cfg, state, shape):
        frame_payload = protocol.decode_frame_payload(payload)
        h, w = frame_payload.height, frame_payload.width
        if shape is not None and shape != (h, w):
            raise ProtocolError(
                f"stream inconsistency: frame is {w}x{h}, stream is "
                f"{shape[1]}x{shape[0]}"
            )
        img = np.frombuffer(frame_payload.pixels, dtype=np.uint8).reshape(h, w)
        fresh = _detections_from_wire(frame_payload, cfg.conf_thr)
        decision = step(state, img, fresh, cfg.hold)
        masked = render_mask(img, [b for b, _ in decision.boxes], style=cfg.mask_style)
        reply = MaskedPayload(
            frame_index=frame_payload.frame_index,
            source_tag=SOURCE_TAGS[decision.source],
            boxes=[
                (
                    (
                        int(b.x_min),
                        int(b.y_min),
                        int(b.x_max),
                        int(b.y_max),
                    ),
                    cat,
                )
                for b, cat in decision.boxes
            ],
            pixels=masked.tobytes(),
        )
        return (
            WireMessage(MsgType.MASKED, protocol.encode_masked_payload(reply)),
            (h, w),
        )

    def _error(self, message: str) -> None:
        send_message(
            self.request,
            WireMessage(MsgType.ERROR, message.encode("utf-8")[:1024]),
        )


class MaskingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], config: ServiceConfig):
        super().__init__(address, _Handler)
        self.config = config


def serve(host: str, port: int, config: ServiceConfig) -> None:
    with MaskingServer((host, port), config) as server:
        log.info("listening on %s:%d", *server.server_address)
        server.serve_forever()
