import socket
import threading

import numpy as np
import pytest

from usmask import protocol
from usmask.core import BBox, CategoryLabel, Detection
from usmask.protocol import (
    MsgType,
    WireDetection,
    WireMessage,
    decode_masked_payload,
    encode_frame_payload,
    encode_message,
    frame_payload_from_image,
)
from usmask.service import SOURCE_TAGS, MaskingServer, ServiceConfig
from usmask.ssim import SsimParams
from usmask.temporal import HoldConfig, HoldMode, run_stream

SMALL_SSIM = SsimParams(window_size=3)


@pytest.fixture
def server():
    cfg = ServiceConfig(
        conf_thr=0.3,
        hold=HoldConfig(
            mode=HoldMode.BBOX_HOLD_SIM,
            hold_frames=4,
            ssim_threshold=0.8,
            ssim_params=SMALL_SSIM,
        ),
    )
    srv = MaskingServer(("127.0.0.1", 0), cfg)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def connect(server):
    sock = socket.create_connection(server.server_address, timeout=5)
    return sock


def recv_message(sock):
    header = b""
    while len(header) < protocol.HEADER.size:
        chunk = sock.recv(protocol.HEADER.size - len(header))
        assert chunk, "connection closed"
        header += chunk
    magic, version, mtype, length = protocol.HEADER.unpack(header)
    payload = b""
    while len(payload) < length:
        chunk = sock.recv(length - len(payload))
        assert chunk, "connection closed mid-payload"
        payload += chunk
    return WireMessage(MsgType(mtype), payload)


def send_frame(sock, index, img, dets=()):
    payload = encode_frame_payload(
        frame_payload_from_image(index, img, list(dets))
    )
    sock.sendall(encode_message(WireMessage(MsgType.FRAME, payload)))


def wire_det(box=(2, 2, 10, 10), conf_milli=900, cat=CategoryLabel.TRANSVERSE):
    return WireDetection(box, cat, conf_milli)


def frame(value=128, shape=(16, 16)):
    return np.full(shape, value, dtype=np.uint8)


class TestService:
    def test_no_detections_mode_off_identity(self):
        cfg = ServiceConfig(hold=HoldConfig(mode=HoldMode.OFF, ssim_params=SMALL_SSIM))
        srv = MaskingServer(("127.0.0.1", 0), cfg)
        t = threading.Thread(target=srv.serve_forever, daemon=True)
        t.start()
        try:
            with connect(srv) as sock:
                img = frame(77)
                send_frame(sock, 5, img)
                reply = recv_message(sock)
                assert reply.msg_type is MsgType.MASKED
                masked = decode_masked_payload(reply.payload)
                assert masked.frame_index == 5
                assert masked.source_tag == 0
                assert masked.pixels == img.tobytes()
        finally:
            srv.shutdown()
            srv.server_close()

    def test_dropout_fixture_matches_run_stream(self, server):
        n = 14
        frames = [frame(100 + (5 if i >= 10 else 0)) for i in range(n)]
        has_det = [i < 8 for i in range(n)]
        with connect(server) as sock:
            tags = []
            for i in range(n):
                dets = [wire_det()] if has_det[i] else []
                send_frame(sock, i, frames[i], dets)
                reply = recv_message(sock)
                assert reply.msg_type is MsgType.MASKED
                masked = decode_masked_payload(reply.payload)
                assert masked.frame_index == i
                tags.append(masked.source_tag)

        offline = run_stream(
            frames,
            [
                [Detection(i, BBox(2, 2, 10, 10), CategoryLabel.TRANSVERSE, 0.9)]
                if has_det[i]
                else []
                for i in range(n)
            ],
            server.config.hold,
        )
        assert tags == [SOURCE_TAGS[d.source] for d in offline]

    def test_confidence_filter_applied(self, server):
        with connect(server) as sock:
            send_frame(sock, 0, frame(), [wire_det(conf_milli=100)])  # below 0.3
            masked = decode_masked_payload(recv_message(sock).payload)
            assert masked.source_tag == 0
            assert masked.boxes == []

    def test_two_connections_are_isolated(self, server):
        with connect(server) as a, connect(server) as b:
            send_frame(a, 0, frame(50), [wire_det()])
            assert decode_masked_payload(recv_message(a).payload).source_tag == 1
            # connection b has no history: silent frame must be source none
            send_frame(b, 0, frame(50))
            assert decode_masked_payload(recv_message(b).payload).source_tag == 0
            # connection a still holds
            send_frame(a, 1, frame(50))
            tag = decode_masked_payload(recv_message(a).payload).source_tag
            assert tag in (2, 3)

    def test_malformed_magic_yields_error(self, server):
        with connect(server) as sock:
            sock.sendall(b"XXXXXXXXXXXX")
            reply = recv_message(sock)
            assert reply.msg_type is MsgType.ERROR
            assert sock.recv(1) == b""  # connection closed

    def test_dimension_change_mid_stream(self, server):
        with connect(server) as sock:
            send_frame(sock, 0, frame(90, (16, 16)), [wire_det()])
            recv_message(sock)
            send_frame(sock, 1, frame(90, (8, 8)))
            reply = recv_message(sock)
            assert reply.msg_type is MsgType.ERROR

    def test_config_update_mid_stream(self, server):
        with connect(server) as sock:
            # raise conf_thr so a 0.9-confidence detection is filtered out
            sock.sendall(
                encode_message(WireMessage(MsgType.CONFIG, b'{"conf_thr": 0.95}'))
            )
            send_frame(sock, 0, frame(), [wire_det(conf_milli=900)])
            masked = decode_masked_payload(recv_message(sock).payload)
            assert masked.source_tag == 0

    def test_masked_pixels_black_inside_boxes(self, server):
        with connect(server) as sock:
            img = frame(200)
            send_frame(sock, 0, img, [wire_det((2, 2, 10, 10))])
            masked = decode_masked_payload(recv_message(sock).payload)
            out = np.frombuffer(masked.pixels, dtype=np.uint8).reshape(16, 16)
            assert not out[2:10, 2:10].any()
            assert np.array_equal(out[12:, 12:], img[12:, 12:])
            assert masked.boxes == [((2, 2, 10, 10), CategoryLabel.TRANSVERSE)]
