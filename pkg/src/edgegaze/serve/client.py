"""Smartphone simulator: streams a recording's frames at a fixed pace and
collects the per-frame gaze responses with round-trip times."""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass, field

from ..recording import Recording
from . import protocol as proto


@dataclass
class TranscriptEntry:
    frame_idx: int
    pts_ms: float
    x_cm: float
    y_cm: float
    status: int
    rtt_ms: float
    face_ms: float
    preproc_ms: float
    infer_ms: float
    total_ms: float


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)
    error: str | None = None  # set when the stream ended early

    CSV_HEADER = ("frame_idx,pts_ms,x_cm,y_cm,status,rtt_ms,"
                  "face_ms,preproc_ms,infer_ms,total_ms")

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for e in self.entries:
            lines.append(f"{e.frame_idx},{e.pts_ms!r},{e.x_cm!r},{e.y_cm!r},{e.status},"
                         f"{e.rtt_ms!r},{e.face_ms!r},{e.preproc_ms!r},"
                         f"{e.infer_ms!r},{e.total_ms!r}")
        if self.error is not None:
            lines.append(f"# error: {self.error}")
        return "\n".join(lines) + "\n"


def client_stream(server_addr, recording: Recording, fps: float,
                  model_name: str = "", timeout: float = 30.0) -> Transcript:
    """Stream every frame at ``fps``; one in-flight request at a time.

    Connection loss mid-stream returns the partial transcript with its
    ``error`` field set instead of raising.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    transcript = Transcript()
    try:
        sock = socket.create_connection(server_addr, timeout=timeout)
    except OSError as exc:
        transcript.error = f"connect failed: {exc}"
        return transcript
    try:
        proto.send_message(sock, proto.MsgType.HELLO,
                           proto.Hello(model_name=model_name).pack())
        mtype, payload = proto.read_message(sock)
        if mtype != proto.MsgType.HELLO_ACK:
            transcript.error = f"expected HELLO_ACK, got {mtype.name}"
            return transcript
        ack = proto.HelloAck.unpack(payload)
        if ack.status != proto.Status.OK:
            transcript.error = f"handshake rejected with status {ack.status}"
            return transcript

        start = time.perf_counter()
        for i, ref in enumerate(recording.frames):
            # pace sends to the requested frame rate
            target = start + i / fps
            now = time.perf_counter()
            if target > now:
                time.sleep(target - now)
            frame = recording.load_frame(i)
            msg = proto.Frame(frame_idx=i, width=frame.shape[1],
                              height=frame.shape[0], pixels=frame.tobytes())
            t_send = time.perf_counter()
            try:
                proto.send_message(sock, proto.MsgType.FRAME, msg.pack())
                mtype, payload = proto.read_message(sock)
            except (proto.ConnectionClosed, OSError) as exc:
                transcript.error = f"connection lost at frame {i}: {exc}"
                return transcript
            rtt_ms = (time.perf_counter() - t_send) * 1000.0
            if mtype != proto.MsgType.GAZE:
                transcript.error = f"expected GAZE, got {mtype.name} at frame {i}"
                return transcript
            gaze = proto.Gaze.unpack(payload)
            transcript.entries.append(TranscriptEntry(
                frame_idx=gaze.frame_idx, pts_ms=ref.pts_ms, x_cm=gaze.x_cm,
                y_cm=gaze.y_cm, status=gaze.status, rtt_ms=rtt_ms,
                face_ms=gaze.face_ms, preproc_ms=gaze.preproc_ms,
                infer_ms=gaze.infer_ms, total_ms=gaze.total_ms))
        try:
            proto.send_message(sock, proto.MsgType.BYE, proto.Bye().pack())
        except OSError:
            pass
    finally:
        sock.close()
    return transcript
