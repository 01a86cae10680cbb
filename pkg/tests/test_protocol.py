"""Wire framing and typed payload round trips."""

import numpy as np
import pytest

from edgegaze.serve import protocol as proto
from edgegaze.serve.protocol import (
    Bye,
    Frame,
    Gaze,
    Hello,
    HelloAck,
    LogAck,
    LogUpsync,
    ModelBlob,
    ModelReq,
    MsgType,
    ProtocolError,
    decode_message,
    encode_message,
)


def test_framing_round_trip_random_payloads():
    rng = np.random.default_rng(0)
    types = list(MsgType)
    for _ in range(500):
        mtype = types[rng.integers(len(types))]
        payload = rng.bytes(int(rng.integers(0, 512)))
        got_type, got_payload = decode_message(encode_message(mtype, payload))
        assert got_type == mtype
        assert got_payload == payload


def test_framing_rejects_bad_magic():
    msg = bytearray(encode_message(MsgType.HELLO, b"x"))
    msg[0:4] = b"NOPE"
    with pytest.raises(ProtocolError, match="magic"):
        decode_message(bytes(msg))


def test_framing_rejects_unknown_type():
    msg = bytearray(encode_message(MsgType.HELLO, b""))
    msg[5] = 200
    with pytest.raises(ProtocolError, match="unknown message type"):
        decode_message(bytes(msg))


def test_framing_rejects_length_mismatch():
    msg = encode_message(MsgType.FRAME, b"abcd")
    with pytest.raises(ProtocolError):
        decode_message(msg[:-1])


def test_framing_length_field_is_big_endian():
    msg = encode_message(MsgType.BYE, b"\x00" * 0x0102)
    assert msg[6:10] == b"\x00\x00\x01\x02"


@pytest.mark.parametrize("payload", [
    Hello(model_name="cnn_tiny"),
    Hello(frame_format=0, model_name=""),
    HelloAck(status=0, model_name="cnn"),
    HelloAck(status=4),
    Frame(frame_idx=7, width=3, height=2, pixels=bytes(range(6))),
    Gaze(frame_idx=1, x_cm=1.5, y_cm=-2.25, status=0,
         face_ms=1.0, preproc_ms=2.0, infer_ms=3.0, total_ms=6.5),
    ModelReq(name="cnn_gru", version=2),
    ModelBlob(status=0, blob=b"\x01\x02\x03"),
    ModelBlob(status=2),
    LogUpsync(points=((1.0, 2.0), (3.5, -4.25))),
    LogUpsync(points=()),
    LogAck(accepted=42),
    Bye(reason="done"),
    Bye(),
])
def test_typed_payload_round_trip(payload):
    assert type(payload).unpack(payload.pack()) == payload


def test_gaze_nan_round_trips():
    g = Gaze(frame_idx=3, x_cm=float("nan"), y_cm=float("nan"), status=1)
    back = Gaze.unpack(g.pack())
    assert np.isnan(back.x_cm) and np.isnan(back.y_cm)
    assert back.status == 1


def test_frame_pixel_count_enforced():
    with pytest.raises(ProtocolError):
        Frame(frame_idx=0, width=4, height=4, pixels=b"123").pack()
    good = Frame(frame_idx=0, width=2, height=2, pixels=b"1234").pack()
    bad = good[:-1]
    with pytest.raises(ProtocolError):
        Frame.unpack(bad)


def test_typed_random_round_trips():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(0, 50))
        pts = tuple((float(np.float32(rng.normal())), float(np.float32(rng.normal())))
                    for _ in range(n))
        assert LogUpsync.unpack(LogUpsync(pts).pack()).points == pts
        w, h = int(rng.integers(1, 24)), int(rng.integers(1, 24))
        fr = Frame(int(rng.integers(2 ** 31)), w, h, rng.bytes(w * h))
        assert Frame.unpack(fr.pack()) == fr
