from .protocol import (
    Bye,
    ConnectionClosed,
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
    Status,
    decode_message,
    encode_message,
)
from .heatmap import GridSpec, HeatmapGrid, heatmap_accumulate, heatmap_csv, heatmap_render
from .registry import CloudStub, GazeLogStore, ModelNotFound, ModelRegistry, log_upsync, model_fetch
from .server import EdgeServer, serve
from .client import Transcript, TranscriptEntry, client_stream

__all__ = [
    "Bye", "ConnectionClosed", "Frame", "Gaze", "Hello", "HelloAck", "LogAck",
    "LogUpsync", "ModelBlob", "ModelReq", "MsgType", "ProtocolError", "Status",
    "decode_message", "encode_message", "GridSpec", "HeatmapGrid",
    "heatmap_accumulate", "heatmap_csv", "heatmap_render", "CloudStub",
    "GazeLogStore", "ModelNotFound", "ModelRegistry", "log_upsync", "model_fetch",
    "EdgeServer", "serve", "Transcript", "TranscriptEntry", "client_stream",
]
