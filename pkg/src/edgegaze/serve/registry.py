"""Cloud stub: filesystem model registry plus gaze-log accumulation.

Serves MODEL_REQ -> MODEL_BLOB and LOG_UPSYNC -> LOG_ACK over the wire
protocol. Model containers live as files under the registry root
(``<name>.gzlm``, or ``<name>.v<version>.gzlm`` for explicit versions);
fetched blobs are CRC-validated client-side before use. Gaze logs append
to one in-memory store behind a lock (single-writer contract) and can be
dumped to CSV for heatmap rendering.
"""

from __future__ import annotations

import socket
import threading
from pathlib import Path

import numpy as np

from ..nn.container import ContainerError, verify_crc
from . import protocol as proto
from .service import ThreadedTCPService


class ModelNotFound(KeyError):
    """No container registered under that name/version."""


class ModelRegistry:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str, version: int = 0) -> Path:
        if version:
            return self.root / f"{name}.v{version}.gzlm"
        return self.root / f"{name}.gzlm"

    def register(self, name: str, blob: bytes, version: int = 0) -> Path:
        path = self._path(name, version)
        path.write_bytes(blob)
        return path

    def fetch(self, name: str, version: int = 0) -> bytes:
        path = self._path(name, version)
        if not path.is_file() and version == 0:
            # fall back to the highest explicit version
            candidates = sorted(self.root.glob(f"{name}.v*.gzlm"))
            if candidates:
                path = candidates[-1]
        if not path.is_file():
            raise ModelNotFound(f"no model {name!r} (version {version}) in {self.root}")
        return path.read_bytes()

    def names(self) -> list[str]:
        return sorted({p.name.split(".")[0] for p in self.root.glob("*.gzlm")})


class GazeLogStore:
    """Accumulated gaze points; appends are serialized behind a lock."""

    def __init__(self):
        self._points: list[tuple[float, float]] = []
        self._lock = threading.Lock()

    def extend(self, points) -> int:
        with self._lock:
            self._points.extend((float(x), float(y)) for x, y in points)
            return len(self._points)

    def points(self) -> np.ndarray:
        with self._lock:
            if not self._points:
                return np.zeros((0, 2))
            return np.array(self._points, dtype=np.float64)

    def __len__(self) -> int:
        with self._lock:
            return len(self._points)

    def to_csv(self) -> str:
        pts = self.points()
        lines = ["x_cm,y_cm"]
        lines += [f"{x!r},{y!r}" for x, y in pts]
        return "\n".join(lines) + "\n"


class CloudStub(ThreadedTCPService):
    """Registry + log endpoint. Point the edge server's upsync here."""

    def __init__(self, registry: ModelRegistry, bind=("127.0.0.1", 0)):
        super().__init__(bind)
        self.registry = registry
        self.gaze_log = GazeLogStore()

    def handle_connection(self, conn: socket.socket) -> None:
        try:
            mtype, payload = proto.read_message(conn)
            if mtype != proto.MsgType.HELLO:
                proto.send_message(conn, proto.MsgType.HELLO_ACK,
                                   proto.HelloAck(proto.Status.PROTOCOL_ERROR).pack())
                return
            proto.Hello.unpack(payload)
            proto.send_message(conn, proto.MsgType.HELLO_ACK,
                               proto.HelloAck(proto.Status.OK).pack())
        except proto.ProtocolError:
            try:
                proto.send_message(conn, proto.MsgType.HELLO_ACK,
                                   proto.HelloAck(proto.Status.PROTOCOL_ERROR).pack())
            except OSError:
                pass
            return

        while True:
            try:
                mtype, payload = proto.read_message(conn)
            except proto.ConnectionClosed:
                return
            except proto.ProtocolError as exc:
                proto.send_message(conn, proto.MsgType.BYE, proto.Bye(str(exc)).pack())
                return
            if mtype == proto.MsgType.BYE:
                return
            if mtype == proto.MsgType.MODEL_REQ:
                req = proto.ModelReq.unpack(payload)
                try:
                    blob = self.registry.fetch(req.name, req.version)
                    reply = proto.ModelBlob(proto.Status.OK, blob)
                except ModelNotFound:
                    reply = proto.ModelBlob(proto.Status.NOT_FOUND)
                proto.send_message(conn, proto.MsgType.MODEL_BLOB, reply.pack())
            elif mtype == proto.MsgType.LOG_UPSYNC:
                batch = proto.LogUpsync.unpack(payload)
                self.gaze_log.extend(batch.points)
                proto.send_message(conn, proto.MsgType.LOG_ACK,
                                   proto.LogAck(len(batch.points)).pack())
            else:
                proto.send_message(conn, proto.MsgType.BYE,
                                   proto.Bye(f"unexpected {mtype.name}").pack())
                return


def _client_connect(addr, timeout: float = 10.0) -> socket.socket:
    sock = socket.create_connection(addr, timeout=timeout)
    proto.send_message(sock, proto.MsgType.HELLO, proto.Hello().pack())
    mtype, payload = proto.read_message(sock)
    if mtype != proto.MsgType.HELLO_ACK:
        sock.close()
        raise proto.ProtocolError(f"expected HELLO_ACK, got {mtype.name}")
    ack = proto.HelloAck.unpack(payload)
    if ack.status != proto.Status.OK:
        sock.close()
        raise proto.ProtocolError(f"handshake rejected with status {ack.status}")
    return sock


def model_fetch(registry_addr, name: str, version: int = 0,
                timeout: float = 10.0) -> bytes:
    """Fetch a model container and validate its trailing CRC."""
    sock = _client_connect(registry_addr, timeout)
    try:
        proto.send_message(sock, proto.MsgType.MODEL_REQ,
                           proto.ModelReq(name, version).pack())
        mtype, payload = proto.read_message(sock)
        if mtype != proto.MsgType.MODEL_BLOB:
            raise proto.ProtocolError(f"expected MODEL_BLOB, got {mtype.name}")
        reply = proto.ModelBlob.unpack(payload)
        if reply.status == proto.Status.NOT_FOUND:
            raise ModelNotFound(f"registry has no model {name!r} (version {version})")
        if reply.status != proto.Status.OK:
            raise proto.ProtocolError(f"model fetch failed with status {reply.status}")
        verify_crc(reply.blob)  # raises ContainerError on mismatch
        proto.send_message(sock, proto.MsgType.BYE, proto.Bye().pack())
        return reply.blob
    finally:
        sock.close()


def log_upsync(registry_addr, points, timeout: float = 10.0) -> int:
    """Push a batch of gaze points to the cloud stub; returns accepted count."""
    sock = _client_connect(registry_addr, timeout)
    try:
        proto.send_message(sock, proto.MsgType.LOG_UPSYNC,
                           proto.LogUpsync(tuple(points)).pack())
        mtype, payload = proto.read_message(sock)
        if mtype != proto.MsgType.LOG_ACK:
            raise proto.ProtocolError(f"expected LOG_ACK, got {mtype.name}")
        accepted = proto.LogAck.unpack(payload).accepted
        proto.send_message(sock, proto.MsgType.BYE, proto.Bye().pack())
        return accepted
    finally:
        sock.close()


__all__ = ["CloudStub", "ContainerError", "GazeLogStore", "ModelNotFound",
           "ModelRegistry", "log_upsync", "model_fetch"]
