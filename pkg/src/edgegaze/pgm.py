"""Binary PGM (P5) frames, the artifact's codec-free image container."""

from __future__ import annotations

import numpy as np


class PGMError(ValueError):
    """Not a valid binary PGM file."""


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim != 2:
        raise PGMError(f"PGM stores a single grey channel, got shape {image.shape}")
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise PGMError(f"{path}: missing P5 magic")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comment lines
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PGMError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PGMError(f"{path}: bad header tokens {tokens}") from exc
    if maxval != 255:
        raise PGMError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    payload = data[pos:pos + w * h]
    if len(payload) != w * h:
        raise PGMError(f"{path}: expected {w * h} pixel bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()
