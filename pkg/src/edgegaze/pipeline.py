"""Per-frame processing: face detect, greyscale, resize, normalise, label mapping.

Conventions fixed here because upstream descriptions leave them open:
BT.601 luma with round-half-up for greyscale; bilinear resampling with
half-pixel-centre alignment and edge clamping; face crops take the detected
box plus a 10% margin per side, clamped to the frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .recording import DeviceProfile, Recording

MODEL_INPUT_SIZE = 128
CROP_MARGIN = 0.10
FACE_THRESHOLD = 32


class NoFaceFound(RuntimeError):
    """The detector found no face region; the frame is skipped and counted."""


@dataclass(frozen=True)
class FaceBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"face box must have positive size, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"face box origin must be non-negative, got ({self.x}, {self.y})")


def to_greyscale(image: np.ndarray) -> np.ndarray:
    """BT.601 luma: round-half-up(0.299 R + 0.587 G + 0.114 B). Grey passes through."""
    img = np.asarray(image)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 1:
        return img[:, :, 0]
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H,W), (H,W,1) or (H,W,3) image, got {img.shape}")
    luma = (0.299 * img[:, :, 0].astype(np.float64)
            + 0.587 * img[:, :, 1].astype(np.float64)
            + 0.114 * img[:, :, 2].astype(np.float64))
    return np.floor(luma + 0.5).astype(np.uint8)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-centre alignment, edges clamped."""
    img = np.asarray(image, dtype=np.float32)
    squeeze = False
    if img.ndim == 2:
        img = img[:, :, None]
        squeeze = True
    h, w, _ = img.shape

    def axis_coords(n_in, n_out):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, (src - lo).astype(np.float32)

    y0, y1, wy = axis_coords(h, out_h)
    x0, x1, wx = axis_coords(w, out_w)
    top = img[y0][:, x0] * (1 - wx)[None, :, None] + img[y0][:, x1] * wx[None, :, None]
    bottom = img[y1][:, x0] * (1 - wx)[None, :, None] + img[y1][:, x1] * wx[None, :, None]
    out = top * (1 - wy)[:, None, None] + bottom * wy[:, None, None]
    return out[:, :, 0] if squeeze else out


def normalize(image: np.ndarray) -> np.ndarray:
    """Scale 8-bit intensities into [0, 1] float32."""
    return (np.asarray(image, dtype=np.float32) / np.float32(255.0)).astype(np.float32)


def css_to_cm(x_css, y_css, device: DeviceProfile):
    """CSS px -> cm from the top-left screen corner: css * dpr / ppi * 2.54."""
    factor = device.dpr / device.ppi * 2.54
    return np.asarray(x_css, dtype=np.float64) * factor, np.asarray(y_css, dtype=np.float64) * factor


def detect_face(frame: np.ndarray, threshold: int = FACE_THRESHOLD) -> FaceBox:
    """Reference detector: bounding box of all pixels at or above ``threshold``.

    Synthetic frames mark the face region as a filled rectangle well above
    the background noise floor, so the box recovers that rectangle. Any
    callable (frame) -> FaceBox can replace this in the pipeline.
    """
    grey = to_greyscale(frame)
    mask = grey >= threshold
    if not mask.any():
        raise NoFaceFound("no pixels above the face threshold")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return FaceBox(x=int(cols[0]), y=int(rows[0]),
                   w=int(cols[-1] - cols[0] + 1), h=int(rows[-1] - rows[0] + 1))


def crop_with_margin(frame: np.ndarray, box: FaceBox, margin: float = CROP_MARGIN) -> np.ndarray:
    h, w = frame.shape[:2]
    mx = int(round(box.w * margin))
    my = int(round(box.h * margin))
    x0 = max(box.x - mx, 0)
    y0 = max(box.y - my, 0)
    x1 = min(box.x + box.w + mx, w)
    y1 = min(box.y + box.h + my, h)
    return frame[y0:y1, x0:x1]


def preprocess(frame: np.ndarray, box: FaceBox, *, size: int = MODEL_INPUT_SIZE,
               margin: float = CROP_MARGIN) -> np.ndarray:
    """Crop the face box (with margin), grey, resize, normalise -> (size, size, 1)."""
    crop = crop_with_margin(frame, box, margin)
    grey = to_greyscale(crop)
    resized = resize_bilinear(grey, size, size)
    return normalize(resized)[:, :, None]


def map_coords_to_frames(recording: Recording) -> np.ndarray:
    """Per-frame gaze labels in cm, linearly interpolated at each frame's pts.

    Frame timestamps outside the coordinate range clamp to the nearest
    coordinate, so every frame receives a label.
    """
    coords = recording.coords
    if coords.shape[0] < 2:
        raise ValueError("need at least 2 dot coordinates to interpolate")
    pts = recording.pts_ms
    x_css = np.interp(pts, coords[:, 0], coords[:, 1])
    y_css = np.interp(pts, coords[:, 0], coords[:, 2])
    x_cm, y_cm = css_to_cm(x_css, y_css, recording.device)
    return np.stack([x_cm, y_cm], axis=1)


def export_labels_csv(recording: Recording, path) -> None:
    labels = map_coords_to_frames(recording)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frame_idx,pts_ms,x_cm,y_cm\n")
        for i, ref in enumerate(recording.frames):
            fh.write(f"{i},{ref.pts_ms!r},{labels[i, 0]!r},{labels[i, 1]!r}\n")


def recording_tensors(recording: Recording, detector=detect_face, *,
                      size: int = MODEL_INPUT_SIZE, margin: float = CROP_MARGIN):
    """Preprocess every frame of a recording.

    Returns (tensors (K, size, size, 1), labels_cm (K, 2), kept_indices,
    skipped_count); frames where the detector fails are skipped and counted.
    """
    labels = map_coords_to_frames(recording)
    tensors, kept = [], []
    skipped = 0
    for i, _, frame in recording.iter_frames():
        try:
            box = detector(frame)
        except NoFaceFound:
            skipped += 1
            continue
        tensors.append(preprocess(frame, box, size=size, margin=margin))
        kept.append(i)
    if tensors:
        stacked = np.stack(tensors)
    else:
        stacked = np.zeros((0, size, size, 1), dtype=np.float32)
    return stacked, labels[kept], np.asarray(kept, dtype=np.intp), skipped


def build_training_set(recordings, window: int | None = None, detector=detect_face):
    """Stack (inputs, labels) over recordings.

    With ``window`` set, inputs are a lazy per-frame window view whose
    windows never cross recording boundaries (no temporal leakage between
    recordings); otherwise a plain (N, size, size, 1) frame stack.
    """
    from .nn.graph import WindowedFrames, window_index_matrix

    xs, ys, index_rows = [], [], []
    offset = 0
    for rec in recordings:
        tensors, labels, _, _ = recording_tensors(rec, detector)
        if len(tensors) == 0:
            continue
        xs.append(tensors)
        ys.append(labels)
        if window is not None:
            index_rows.append(window_index_matrix(len(tensors), window) + offset)
        offset += len(tensors)
    if not xs:
        raise ValueError("no usable frames in any recording")
    frames = np.concatenate(xs).astype(np.float32)
    labels = np.concatenate(ys).astype(np.float32)
    if window is None:
        return frames, labels
    view = WindowedFrames(frames, window)
    view.index = np.concatenate(index_rows)
    return view, labels


def predict_recording(graph, recording: Recording, detector=detect_face):
    """Run the full per-frame pipeline through a model.

    Returns (predictions (N, 2) cm with NaN rows for skipped frames,
    skipped_count). Recurrent models consume a trailing window of the most
    recent successfully preprocessed frames, left-padded by repetition.
    """
    from .nn.graph import sliding_windows

    n = len(recording.frames)
    preds = np.full((n, 2), np.nan, dtype=np.float64)
    skipped = 0
    window = graph.window if graph.is_recurrent else None
    history: list[np.ndarray] = []
    for i, _, frame in recording.iter_frames():
        try:
            box = detector(frame)
        except NoFaceFound:
            skipped += 1
            continue
        tensor = preprocess(frame, box)
        if window is None:
            preds[i] = graph.predict(tensor)
        else:
            history.append(tensor)
            recent = np.stack(history[-window:])
            if len(recent) < window:
                pad = np.repeat(recent[:1], window - len(recent), axis=0)
                recent = np.concatenate([pad, recent])
            preds[i] = graph.predict(recent)
    return preds, skipped
