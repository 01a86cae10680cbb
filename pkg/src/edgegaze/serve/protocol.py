"""Binary wire protocol between phone simulator, edge server and cloud stub.

Frame layout: magic ``EYET``, version u8, type u8, payload length u32
big-endian, payload. All multi-byte payload fields are big-endian too;
strings are u16 length + UTF-8. One request is in flight per connection.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

MAGIC = b"EYET"
PROTOCOL_VERSION = 1
HEADER = struct.Struct(">4sBBI")

MAX_PAYLOAD = 64 * 1024 * 1024

FRAME_FORMAT_GREY8 = 0


class MsgType(IntEnum):
    HELLO = 1
    HELLO_ACK = 2
    FRAME = 3
    GAZE = 4
    MODEL_REQ = 5
    MODEL_BLOB = 6
    LOG_UPSYNC = 7
    LOG_ACK = 8
    BYE = 9


class Status(IntEnum):
    OK = 0
    NO_FACE = 1
    NOT_FOUND = 2
    INTEGRITY = 3
    PROTOCOL_ERROR = 4
    UNSUPPORTED = 5


class ProtocolError(ValueError):
    """Malformed frame, bad magic, or unknown message type."""


class ConnectionClosed(ConnectionError):
    """Peer closed the connection mid-message."""


def encode_message(mtype: int, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(payload)} bytes exceeds limit")
    return HEADER.pack(MAGIC, PROTOCOL_VERSION, int(mtype), len(payload)) + payload


def decode_message(blob: bytes) -> tuple[MsgType, bytes]:
    """Decode one full message from bytes (the inverse of encode_message)."""
    if len(blob) < HEADER.size:
        raise ProtocolError("message shorter than header")
    magic, version, mtype, length = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    try:
        mtype = MsgType(mtype)
    except ValueError as exc:
        raise ProtocolError(f"unknown message type {mtype}") from exc
    payload = blob[HEADER.size:]
    if len(payload) != length:
        raise ProtocolError(f"length field {length} != payload size {len(payload)}")
    return mtype, payload


def recv_exact(sock, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionClosed(f"peer closed with {remaining} bytes pending")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def send_message(sock, mtype: int, payload: bytes = b"") -> None:
    sock.sendall(encode_message(mtype, payload))


def read_message(sock) -> tuple[MsgType, bytes]:
    header = recv_exact(sock, HEADER.size)
    magic, version, mtype, length = HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    try:
        mtype = MsgType(mtype)
    except ValueError as exc:
        raise ProtocolError(f"unknown message type {mtype}") from exc
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"declared payload of {length} bytes exceeds limit")
    return mtype, recv_exact(sock, length)


# -- typed payloads -----------------------------------------------------------


def _pack_str(s: str) -> bytes:
    raw = s.encode()
    if len(raw) > 0xFFFF:
        raise ProtocolError("string field too long")
    return struct.pack(">H", len(raw)) + raw


def _unpack_str(buf: bytes, offset: int) -> tuple[str, int]:
    if offset + 2 > len(buf):
        raise ProtocolError("truncated string field")
    (n,) = struct.unpack_from(">H", buf, offset)
    offset += 2
    if offset + n > len(buf):
        raise ProtocolError("truncated string field")
    return buf[offset:offset + n].decode(), offset + n


@dataclass(frozen=True)
class Hello:
    proto_version: int = PROTOCOL_VERSION
    frame_format: int = FRAME_FORMAT_GREY8
    model_name: str = ""

    def pack(self) -> bytes:
        return struct.pack(">BB", self.proto_version, self.frame_format) + _pack_str(self.model_name)

    @classmethod
    def unpack(cls, buf: bytes) -> "Hello":
        if len(buf) < 2:
            raise ProtocolError("truncated HELLO")
        ver, fmt = struct.unpack_from(">BB", buf)
        name, end = _unpack_str(buf, 2)
        if end != len(buf):
            raise ProtocolError("trailing bytes in HELLO")
        return cls(proto_version=ver, frame_format=fmt, model_name=name)


@dataclass(frozen=True)
class HelloAck:
    status: int
    proto_version: int = PROTOCOL_VERSION
    model_name: str = ""

    def pack(self) -> bytes:
        return struct.pack(">BB", self.status, self.proto_version) + _pack_str(self.model_name)

    @classmethod
    def unpack(cls, buf: bytes) -> "HelloAck":
        if len(buf) < 2:
            raise ProtocolError("truncated HELLO_ACK")
        status, ver = struct.unpack_from(">BB", buf)
        name, end = _unpack_str(buf, 2)
        if end != len(buf):
            raise ProtocolError("trailing bytes in HELLO_ACK")
        return cls(status=status, proto_version=ver, model_name=name)


@dataclass(frozen=True)
class Frame:
    frame_idx: int
    width: int
    height: int
    pixels: bytes  # row-major grey u8

    def pack(self) -> bytes:
        if len(self.pixels) != self.width * self.height:
            raise ProtocolError(
                f"frame {self.frame_idx}: {len(self.pixels)} bytes for "
                f"{self.width}x{self.height}")
        return struct.pack(">IHH", self.frame_idx, self.width, self.height) + self.pixels

    @classmethod
    def unpack(cls, buf: bytes) -> "Frame":
        if len(buf) < 8:
            raise ProtocolError("truncated FRAME")
        idx, w, h = struct.unpack_from(">IHH", buf)
        pixels = buf[8:]
        if len(pixels) != w * h:
            raise ProtocolError(f"FRAME {idx}: expected {w * h} pixel bytes, got {len(pixels)}")
        return cls(frame_idx=idx, width=w, height=h, pixels=pixels)


GAZE_STRUCT = struct.Struct(">IffBffff")


@dataclass(frozen=True)
class Gaze:
    frame_idx: int
    x_cm: float
    y_cm: float
    status: int = Status.OK
    face_ms: float = 0.0
    preproc_ms: float = 0.0
    infer_ms: float = 0.0
    total_ms: float = 0.0

    def pack(self) -> bytes:
        return GAZE_STRUCT.pack(self.frame_idx, self.x_cm, self.y_cm, self.status,
                                self.face_ms, self.preproc_ms, self.infer_ms, self.total_ms)

    @classmethod
    def unpack(cls, buf: bytes) -> "Gaze":
        if len(buf) != GAZE_STRUCT.size:
            raise ProtocolError(f"GAZE payload must be {GAZE_STRUCT.size} bytes")
        idx, x, y, status, face, preproc, infer, total = GAZE_STRUCT.unpack(buf)
        return cls(frame_idx=idx, x_cm=x, y_cm=y, status=status, face_ms=face,
                   preproc_ms=preproc, infer_ms=infer, total_ms=total)


@dataclass(frozen=True)
class ModelReq:
    name: str
    version: int = 0  # 0 = latest

    def pack(self) -> bytes:
        return _pack_str(self.name) + struct.pack(">H", self.version)

    @classmethod
    def unpack(cls, buf: bytes) -> "ModelReq":
        name, offset = _unpack_str(buf, 0)
        if offset + 2 != len(buf):
            raise ProtocolError("truncated MODEL_REQ")
        (version,) = struct.unpack_from(">H", buf, offset)
        return cls(name=name, version=version)


@dataclass(frozen=True)
class ModelBlob:
    status: int
    blob: bytes = b""

    def pack(self) -> bytes:
        return struct.pack(">BI", self.status, len(self.blob)) + self.blob

    @classmethod
    def unpack(cls, buf: bytes) -> "ModelBlob":
        if len(buf) < 5:
            raise ProtocolError("truncated MODEL_BLOB")
        status, n = struct.unpack_from(">BI", buf)
        blob = buf[5:]
        if len(blob) != n:
            raise ProtocolError(f"MODEL_BLOB: expected {n} bytes, got {len(blob)}")
        return cls(status=status, blob=blob)


@dataclass(frozen=True)
class LogUpsync:
    points: tuple  # ((x_cm, y_cm), ...)

    def pack(self) -> bytes:
        out = [struct.pack(">I", len(self.points))]
        for x, y in self.points:
            out.append(struct.pack(">ff", x, y))
        return b"".join(out)

    @classmethod
    def unpack(cls, buf: bytes) -> "LogUpsync":
        if len(buf) < 4:
            raise ProtocolError("truncated LOG_UPSYNC")
        (count,) = struct.unpack_from(">I", buf)
        if len(buf) != 4 + 8 * count:
            raise ProtocolError(f"LOG_UPSYNC: {count} points need {4 + 8 * count} bytes")
        points = tuple(struct.unpack_from(">ff", buf, 4 + 8 * i) for i in range(count))
        return cls(points=points)


@dataclass(frozen=True)
class LogAck:
    accepted: int

    def pack(self) -> bytes:
        return struct.pack(">I", self.accepted)

    @classmethod
    def unpack(cls, buf: bytes) -> "LogAck":
        if len(buf) != 4:
            raise ProtocolError("LOG_ACK payload must be 4 bytes")
        return cls(accepted=struct.unpack(">I", buf)[0])


@dataclass(frozen=True)
class Bye:
    reason: str = ""

    def pack(self) -> bytes:
        return _pack_str(self.reason)

    @classmethod
    def unpack(cls, buf: bytes) -> "Bye":
        reason, end = _unpack_str(buf, 0)
        if end != len(buf):
            raise ProtocolError("trailing bytes in BYE")
        return cls(reason=reason)


PAYLOAD_TYPES = {
    MsgType.HELLO: Hello,
    MsgType.HELLO_ACK: HelloAck,
    MsgType.FRAME: Frame,
    MsgType.GAZE: Gaze,
    MsgType.MODEL_REQ: ModelReq,
    MsgType.MODEL_BLOB: ModelBlob,
    MsgType.LOG_UPSYNC: LogUpsync,
    MsgType.LOG_ACK: LogAck,
    MsgType.BYE: Bye,
}
