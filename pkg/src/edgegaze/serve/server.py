"""Edge inference server: FRAME in, GAZE out, one worker per connection.

The loaded model graph is shared read-only across connections; recurrent
window state lives per connection and dies with it. When a cloud stub is
configured, predicted gaze points are upsynced in batches (and flushed on
connection close), feeding the cloud-side heatmap store.
"""

from __future__ import annotations

import socket
import threading
import time

import numpy as np

from ..nn.container import load_bytes, load_model
from ..nn.graph import ModelGraph
from ..pipeline import NoFaceFound, detect_face, preprocess
from . import protocol as proto
from .registry import log_upsync, model_fetch
from .service import ThreadedTCPService


class EdgeServer(ThreadedTCPService):
    def __init__(self, model_source, bind=("127.0.0.1", 0), *,
                 registry_addr=None, upsync_batch: int = 50,
                 detector=detect_face):
        """``model_source`` is a ModelGraph, a container path, or a model
        name to fetch from ``registry_addr``."""
        super().__init__(bind)
        self._model_source = model_source
        self.registry_addr = registry_addr
        self.upsync_batch = upsync_batch
        self.detector = detector
        self.graph: ModelGraph | None = None
        self._pending_log: list[tuple[float, float]] = []
        self._log_lock = threading.Lock()
        self.frames_served = 0

    def start(self) -> "EdgeServer":
        if self.graph is None:
            self.graph = self._load_model()
        return super().start()

    def _load_model(self) -> ModelGraph:
        src = self._model_source
        if isinstance(src, ModelGraph):
            return src
        if isinstance(src, (str,)) and not str(src).endswith(".gzlm") \
                and self.registry_addr is not None:
            blob = model_fetch(self.registry_addr, src)
            return load_bytes(blob)
        return load_model(src)

    # -- gaze log upsync ------------------------------------------------------

    def _queue_gaze(self, x_cm: float, y_cm: float) -> None:
        if self.registry_addr is None:
            return
        if not (np.isfinite(x_cm) and np.isfinite(y_cm)):
            return
        flush = None
        with self._log_lock:
            self._pending_log.append((x_cm, y_cm))
            if len(self._pending_log) >= self.upsync_batch:
                flush = self._pending_log
                self._pending_log = []
        if flush:
            log_upsync(self.registry_addr, flush)

    def flush_gaze_log(self) -> None:
        with self._log_lock:
            flush = self._pending_log
            self._pending_log = []
        if flush and self.registry_addr is not None:
            log_upsync(self.registry_addr, flush)

    def stop(self) -> None:
        super().stop()
        try:
            self.flush_gaze_log()
        except (OSError, proto.ProtocolError):
            pass

    # -- connection handling ---------------------------------------------------

    def handle_connection(self, conn: socket.socket) -> None:
        try:
            mtype, payload = proto.read_message(conn)
            if mtype != proto.MsgType.HELLO:
                raise proto.ProtocolError(f"expected HELLO, got {mtype.name}")
            hello = proto.Hello.unpack(payload)
            if hello.proto_version != proto.PROTOCOL_VERSION:
                proto.send_message(conn, proto.MsgType.HELLO_ACK,
                                   proto.HelloAck(proto.Status.UNSUPPORTED).pack())
                return
            if hello.frame_format != proto.FRAME_FORMAT_GREY8:
                proto.send_message(conn, proto.MsgType.HELLO_ACK,
                                   proto.HelloAck(proto.Status.UNSUPPORTED).pack())
                return
            if hello.model_name and hello.model_name != self.graph.name:
                proto.send_message(conn, proto.MsgType.HELLO_ACK,
                                   proto.HelloAck(proto.Status.NOT_FOUND,
                                                  model_name=self.graph.name).pack())
                return
            proto.send_message(conn, proto.MsgType.HELLO_ACK,
                               proto.HelloAck(proto.Status.OK,
                                              model_name=self.graph.name).pack())
        except proto.ConnectionClosed:
            return
        except proto.ProtocolError:
            try:
                proto.send_message(conn, proto.MsgType.HELLO_ACK,
                                   proto.HelloAck(proto.Status.PROTOCOL_ERROR).pack())
            except OSError:
                pass
            return

        window = self.graph.window if self.graph.is_recurrent else None
        history: list[np.ndarray] = []

        while True:
            try:
                mtype, payload = proto.read_message(conn)
            except proto.ConnectionClosed:
                break
            except proto.ProtocolError as exc:
                try:
                    proto.send_message(conn, proto.MsgType.BYE, proto.Bye(str(exc)).pack())
                except OSError:
                    pass
                break
            if mtype == proto.MsgType.BYE:
                break
            if mtype != proto.MsgType.FRAME:
                try:
                    proto.send_message(conn, proto.MsgType.BYE,
                                       proto.Bye(f"unexpected {mtype.name}").pack())
                except OSError:
                    pass
                break
            frame_msg = proto.Frame.unpack(payload)
            gaze = self._process_frame(frame_msg, window, history)
            proto.send_message(conn, proto.MsgType.GAZE, gaze.pack())
            self.frames_served += 1
        self.flush_gaze_log()

    def _process_frame(self, frame_msg: proto.Frame, window, history) -> proto.Gaze:
        t_start = time.perf_counter()
        frame = np.frombuffer(frame_msg.pixels, dtype=np.uint8).reshape(
            frame_msg.height, frame_msg.width)

        t0 = time.perf_counter()
        try:
            box = self.detector(frame)
        except NoFaceFound:
            face_ms = (time.perf_counter() - t0) * 1000.0
            total_ms = (time.perf_counter() - t_start) * 1000.0
            return proto.Gaze(frame_idx=frame_msg.frame_idx, x_cm=float("nan"),
                              y_cm=float("nan"), status=proto.Status.NO_FACE,
                              face_ms=face_ms, total_ms=total_ms)
        face_ms = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        tensor = preprocess(frame, box)
        if window is not None:
            history.append(tensor)
            del history[:-window]
            stack = np.stack(history)
            if len(stack) < window:
                pad = np.repeat(stack[:1], window - len(stack), axis=0)
                stack = np.concatenate([pad, stack])
            sample = stack
        else:
            sample = tensor
        preproc_ms = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        pred = self.graph.predict(sample)
        infer_ms = (time.perf_counter() - t0) * 1000.0
        total_ms = (time.perf_counter() - t_start) * 1000.0

        x_cm, y_cm = float(pred[0]), float(pred[1])
        self._queue_gaze(x_cm, y_cm)
        return proto.Gaze(frame_idx=frame_msg.frame_idx, x_cm=x_cm, y_cm=y_cm,
                          status=proto.Status.OK, face_ms=face_ms,
                          preproc_ms=preproc_ms, infer_ms=infer_ms, total_ms=total_ms)


def serve(bind_addr, model_source, *, registry_addr=None,
          upsync_batch: int = 50) -> EdgeServer:
    """Build and start an EdgeServer; caller owns .stop()."""
    server = EdgeServer(model_source, bind=bind_addr, registry_addr=registry_addr,
                        upsync_batch=upsync_batch)
    return server.start()
