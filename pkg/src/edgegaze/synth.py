"""Synthetic moving-dot recordings.

Desk-scale stand-in for crowd-collected data: a dot wanders the screen
along seeded random piecewise-linear paths at 20 coordinates per second,
and each video frame encodes the instantaneous gaze point as a bright
Gaussian blob inside a dim "face" rectangle. The blob centre is an
invertible affine image of the gaze point in cm, so the task is solvable
by construction (a linear readout of the blob centroid recovers gaze).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .pipeline import FaceBox, css_to_cm
from .recording import (
    DEVICE_PRESETS,
    MANIFEST_SCHEMA_VERSION,
    DeviceProfile,
    POSITION_TAGS,
    write_manifest,
)
from .pgm import write_pgm


@dataclass(frozen=True)
class PathParams:
    duration_s: float = 20.0
    rate_hz: float = 20.0
    speed_min: float = 150.0     # CSS px/s
    speed_max: float = 400.0
    corner_margin: float = 0.02  # corner waypoints sit within this fraction of each edge
    n_waypoints: int = 12
    seed: int | list[int] = 0    # anything np.random.default_rng accepts

    def __post_init__(self):
        if self.duration_s <= 0 or self.rate_hz <= 0:
            raise ValueError("duration and rate must be positive")
        if not 0 < self.speed_min <= self.speed_max:
            raise ValueError("need 0 < speed_min <= speed_max")

    @property
    def n_points(self) -> int:
        return int(round(self.duration_s * self.rate_hz))


def gen_dot_path(params: PathParams, device: DeviceProfile) -> np.ndarray:
    """Seeded dot path: (n, 3) rows of [t_ms, x_css, y_css], all in bounds.

    The first four waypoints sit in the four screen corners (within
    ``corner_margin``), guaranteeing full-screen spread and quadrant
    coverage; the rest are uniform. The dot travels the waypoint chain at
    per-segment speeds drawn from [speed_min, speed_max].
    """
    rng = np.random.default_rng(params.seed)
    w, h = device.css_w, device.css_h
    m = params.corner_margin

    def corner(fx, fy):
        jitter_x = rng.uniform(m * 0.25, m) * w
        jitter_y = rng.uniform(m * 0.25, m) * h
        x = jitter_x if fx == 0 else w - jitter_x
        y = jitter_y if fy == 0 else h - jitter_y
        return np.array([x, y])

    corners = [corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)]
    rng.shuffle(corners)
    waypoints = list(corners)
    for _ in range(max(params.n_waypoints - 4, 0)):
        waypoints.append(np.array([rng.uniform(0.05 * w, 0.95 * w),
                                   rng.uniform(0.05 * h, 0.95 * h)]))

    n = params.n_points
    dt = 1.0 / params.rate_hz
    pos = waypoints[0].copy()
    target_idx = 1
    speed = rng.uniform(params.speed_min, params.speed_max)
    out = np.zeros((n, 3))
    for k in range(n):
        out[k] = (k * 1000.0 * dt, pos[0], pos[1])
        remaining = speed * dt
        while remaining > 1e-9:
            if target_idx >= len(waypoints):
                waypoints.append(np.array([rng.uniform(0.05 * w, 0.95 * w),
                                           rng.uniform(0.05 * h, 0.95 * h)]))
            delta = waypoints[target_idx] - pos
            dist = float(np.hypot(*delta))
            if dist <= remaining:
                pos = waypoints[target_idx].copy()
                remaining -= dist
                target_idx += 1
                speed = rng.uniform(params.speed_min, params.speed_max)
            else:
                pos = pos + delta * (remaining / dist)
                remaining = 0.0
    return out


@dataclass(frozen=True)
class RenderParams:
    """Frame geometry plus the gaze->blob affine map (must be invertible)."""

    frame_w: int = 160
    frame_h: int = 120
    face: FaceBox = FaceBox(24, 18, 112, 84)
    face_level: int = 60
    blob_sigma: float = 3.0
    blob_amp: float = 195.0
    noise_amp: float = 4.0
    # blob centre px = (ax * x_cm + bx, ay * y_cm + by)
    ax: float = 1.0
    ay: float = 1.0
    bx: float = 0.0
    by: float = 0.0

    def __post_init__(self):
        if self.ax == 0.0 or self.ay == 0.0:
            raise ValueError("gaze->blob affine must be invertible (nonzero scales)")

    @classmethod
    def for_device(cls, device: DeviceProfile, frame_w: int = 160, frame_h: int = 120,
                   **overrides) -> "RenderParams":
        """Map the device's screen extent onto the face-rect interior,
        inset by 4 sigma so blob tails stay inside the rectangle."""
        base = cls(frame_w=frame_w, frame_h=frame_h, **overrides)
        face_w = int(round(frame_w * 0.7))
        face_h = int(round(frame_h * 0.7))
        face = FaceBox((frame_w - face_w) // 2, (frame_h - face_h) // 2, face_w, face_h)
        inset = math.ceil(4.0 * base.blob_sigma)
        x0, x1 = face.x + inset, face.x + face.w - 1 - inset
        y0, y1 = face.y + inset, face.y + face.h - 1 - inset
        if x1 <= x0 or y1 <= y0:
            raise ValueError("face rect too small for the blob inset")
        ax = (x1 - x0) / device.screen_w_cm
        ay = (y1 - y0) / device.screen_h_cm
        return replace(base, face=face, ax=ax, ay=ay, bx=x0, by=y0)

    def blob_center_px(self, gaze_cm) -> tuple[float, float]:
        return self.ax * gaze_cm[0] + self.bx, self.ay * gaze_cm[1] + self.by

    def px_to_cm(self, x_px: float, y_px: float) -> tuple[float, float]:
        return (x_px - self.bx) / self.ax, (y_px - self.by) / self.ay


def render_gaze_frame(gaze_cm, params: RenderParams,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Grey frame: noisy background, dim face rectangle, bright gaze blob."""
    frame = np.zeros((params.frame_h, params.frame_w), dtype=np.float64)
    if rng is not None and params.noise_amp > 0:
        frame += rng.uniform(0.0, params.noise_amp, size=frame.shape)
    f = params.face
    cx, cy = params.blob_center_px(gaze_cm)
    ys = np.arange(f.y, f.y + f.h, dtype=np.float64)
    xs = np.arange(f.x, f.x + f.w, dtype=np.float64)
    d2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
    frame[f.y:f.y + f.h, f.x:f.x + f.w] += params.face_level
    frame[f.y:f.y + f.h, f.x:f.x + f.w] += params.blob_amp * np.exp(
        -d2 / (2.0 * params.blob_sigma ** 2))
    return np.clip(np.floor(frame + 0.5), 0, 255).astype(np.uint8)


def blob_centroid(frame: np.ndarray, params: RenderParams) -> tuple[float, float]:
    """Intensity centroid of the blob inside the face rect (px)."""
    f = params.face
    region = frame[f.y:f.y + f.h, f.x:f.x + f.w].astype(np.float64)
    weights = np.clip(region - params.face_level, 0.0, None)
    total = weights.sum()
    if total <= 0:
        raise ValueError("no blob energy above the face level")
    ys = np.arange(f.y, f.y + f.h, dtype=np.float64)
    xs = np.arange(f.x, f.x + f.w, dtype=np.float64)
    cx = float((weights.sum(axis=0) * xs).sum() / total)
    cy = float((weights.sum(axis=1) * ys).sum() / total)
    return cx, cy


def gen_dataset(out_dir, n_recordings: int, *, device_profiles=("standard",),
                seed: int = 0, duration_s: float = 20.0, rate_hz: float = 20.0,
                fps: float = 10.0, frame_w: int = 160, frame_h: int = 120,
                noise_amp: float = 4.0, blob_sigma: float = 3.0,
                speed_min: float = 150.0, speed_max: float = 400.0) -> list[Path]:
    """Write ``n_recordings`` manifest+PGM recordings plus an index.json.

    Deterministic per (seed, recording index). Position tags cycle
    below/level/above, so each group of three recordings plays the role of
    one participant's three camera positions.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    devices = [DEVICE_PRESETS[d] if isinstance(d, str) else d for d in device_profiles]
    manifests = []
    n_frames = int(round(duration_s * fps))
    for idx in range(n_recordings):
        device = devices[idx % len(devices)]
        tag = POSITION_TAGS[idx % len(POSITION_TAGS)]
        rec_name = f"rec_{idx:04d}"
        rec_dir = out_dir / rec_name
        (rec_dir / "frames").mkdir(parents=True, exist_ok=True)

        path_params = PathParams(duration_s=duration_s, rate_hz=rate_hz,
                                 speed_min=speed_min, speed_max=speed_max,
                                 seed=_derive_seed(seed, idx, 0))
        coords = gen_dot_path(path_params, device)

        render = RenderParams.for_device(device, frame_w=frame_w, frame_h=frame_h,
                                         noise_amp=noise_amp, blob_sigma=blob_sigma)
        frame_entries = []
        for k in range(n_frames):
            pts = k * 1000.0 / fps
            x_css = np.interp(pts, coords[:, 0], coords[:, 1])
            y_css = np.interp(pts, coords[:, 0], coords[:, 2])
            gaze_cm = css_to_cm(x_css, y_css, device)
            rng = np.random.default_rng(_derive_seed(seed, idx, 1, k))
            frame = render_gaze_frame((float(gaze_cm[0]), float(gaze_cm[1])), render, rng)
            rel = f"frames/f_{k:05d}.pgm"
            write_pgm(rec_dir / rel, frame)
            frame_entries.append({"file": rel, "pts_ms": pts})

        write_manifest(rec_dir / "manifest.json", name=rec_name, device=device,
                       position_tag=tag, frames=frame_entries, coords=coords)
        manifests.append(rec_dir / "manifest.json")

    index = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "seed": seed,
        "recordings": [str(m.relative_to(out_dir)) for m in manifests],
    }
    with open(out_dir / "index.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifests


def _derive_seed(*parts: int):
    return list(parts)
