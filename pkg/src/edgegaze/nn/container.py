"""Binary model container.

Layout (all integers little-endian):

    magic    4 bytes  b"GZLM"
    version  u16
    dtype    u8   0 = single, 1 = half
    window   u8   frames per sample for recurrent models, 0 otherwise
    name     u16 length + utf-8 bytes
    config   u32 length + canonical JSON (input shape + layer spec table)
    layers   u16 count, then per layer:
               u8 tensor count, per tensor:
                 u8 dtype code (0 f32, 1 f16), u8 ndim, ndim x u32 dims,
                 raw little-endian payload
               u8 mask count (0 or tensor count), per mask:
                 u8 present flag; if present, packed survivor bitmap
                 (ceil(n/8) bytes, row-major, bit 1 = kept weight)
    crc32    u32 over all preceding bytes

Round trips are byte-exact: save(load(b)) == b.
"""

from __future__ import annotations

import io
import json
import struct
import zlib

import numpy as np

from .graph import ModelGraph, build_model

MAGIC = b"GZLM"
FORMAT_VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f2")}
_DTYPE_TAGS = {"single": 0, "half": 1}


class ContainerError(ValueError):
    """Malformed or corrupt model container."""


def _canonical_config(graph: ModelGraph) -> bytes:
    return json.dumps(graph.config(), sort_keys=True, separators=(",", ":")).encode()


def _tensor_code(arr: np.ndarray) -> int:
    if arr.dtype == np.float32:
        return 0
    if arr.dtype == np.float16:
        return 1
    raise ContainerError(f"unsupported parameter dtype {arr.dtype}")


def dump_bytes(graph: ModelGraph) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", FORMAT_VERSION))
    buf.write(struct.pack("<BB", _DTYPE_TAGS[graph.dtype], graph.window or 0))
    name = graph.name.encode()
    buf.write(struct.pack("<H", len(name)))
    buf.write(name)
    cfg = _canonical_config(graph)
    buf.write(struct.pack("<I", len(cfg)))
    buf.write(cfg)
    buf.write(struct.pack("<H", len(graph.layers)))
    for layer, mask_row in zip(graph.layers, graph.masks):
        params = layer.params()
        buf.write(struct.pack("<B", len(params)))
        for arr in params:
            code = _tensor_code(arr)
            buf.write(struct.pack("<BB", code, arr.ndim))
            for dim in arr.shape:
                buf.write(struct.pack("<I", dim))
            buf.write(np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes())
        has_masks = any(m is not None for m in mask_row)
        buf.write(struct.pack("<B", len(params) if has_masks else 0))
        if has_masks:
            for arr, mask in zip(params, mask_row):
                if mask is None:
                    buf.write(struct.pack("<B", 0))
                else:
                    buf.write(struct.pack("<B", 1))
                    buf.write(np.packbits(mask.astype(np.uint8).ravel()).tobytes())
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def save_model(graph: ModelGraph, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_bytes(graph))


def verify_crc(blob: bytes) -> None:
    if len(blob) < len(MAGIC) + 4:
        raise ContainerError("container truncated")
    if blob[:4] != MAGIC:
        raise ContainerError(f"bad magic {blob[:4]!r}")
    body, trailer = blob[:-4], blob[-4:]
    (crc,) = struct.unpack("<I", trailer)
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ContainerError("checksum mismatch")


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ContainerError("container truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_bytes(blob: bytes) -> ModelGraph:
    verify_crc(blob)
    rd = _Reader(blob[:-4])
    rd.take(4)  # magic, checked above
    (version,) = rd.unpack("<H")
    if version != FORMAT_VERSION:
        raise ContainerError(f"unsupported container version {version}")
    dtype_tag, window = rd.unpack("<BB")
    if dtype_tag not in (0, 1):
        raise ContainerError(f"unknown dtype tag {dtype_tag}")
    dtype = "single" if dtype_tag == 0 else "half"
    (name_len,) = rd.unpack("<H")
    name = rd.take(name_len).decode()
    (cfg_len,) = rd.unpack("<I")
    config = json.loads(rd.take(cfg_len))
    graph = build_model(config, name=name, seed=0, dtype="single",
                        window=window or None)
    graph.dtype = dtype
    (n_layers,) = rd.unpack("<H")
    if n_layers != len(graph.layers):
        raise ContainerError("layer table does not match config")
    for layer, mask_row in zip(graph.layers, graph.masks):
        (n_tensors,) = rd.unpack("<B")
        if n_tensors != len(layer.params()):
            raise ContainerError(f"{layer.kind} expects {len(layer.params())} tensors")
        tensors = []
        for _ in range(n_tensors):
            code, ndim = rd.unpack("<BB")
            if code not in _DTYPE_CODES:
                raise ContainerError(f"unknown tensor dtype code {code}")
            dims = [rd.unpack("<I")[0] for _ in range(ndim)]
            count = int(np.prod(dims)) if dims else 1
            dt = _DTYPE_CODES[code]
            raw = rd.take(count * dt.itemsize)
            tensors.append(np.frombuffer(raw, dtype=dt).reshape(dims).copy())
        expected = [p.shape for p in layer.params()]
        got = [t.shape for t in tensors]
        if expected != got:
            raise ContainerError(f"{layer.kind} parameter shapes {got} != {expected}")
        layer.set_params(tensors)
        (n_masks,) = rd.unpack("<B")
        if n_masks:
            if n_masks != n_tensors:
                raise ContainerError("mask count does not match tensor count")
            for i, arr in enumerate(tensors):
                (present,) = rd.unpack("<B")
                if present:
                    packed = rd.take((arr.size + 7) // 8)
                    bits = np.unpackbits(np.frombuffer(packed, dtype=np.uint8))
                    mask_row[i] = bits[:arr.size].reshape(arr.shape).astype(bool)
    if rd.pos != len(rd.blob):
        raise ContainerError(f"{len(rd.blob) - rd.pos} trailing bytes in container")
    return graph


def load_model(path) -> ModelGraph:
    with open(path, "rb") as fh:
        return load_bytes(fh.read())
