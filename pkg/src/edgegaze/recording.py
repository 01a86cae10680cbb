"""Recordings on disk: a manifest JSON plus a directory of PGM frames.

Manifest schema (version 1):

    {
      "schema_version": 1,
      "name": "rec_0000",
      "position_tag": "below" | "level" | "above",
      "device": {"name", "screen_w_px", "screen_h_px", "ppi", "dpr"},
      "frames": [{"file": "frames/f_00000.pgm", "pts_ms": 0.0}, ...],
      "coords": [[t_ms, x_css, y_css], ...]
    }

Frame presentation timestamps must be strictly increasing; dot coordinate
timestamps non-decreasing. Coordinates are CSS pixels from the top-left
screen corner, nominally sampled at 20 Hz (400 per 20 s recording).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pgm import read_pgm

MANIFEST_SCHEMA_VERSION = 1
POSITION_TAGS = ("below", "level", "above")


class ManifestError(ValueError):
    """Manifest missing, malformed, or violating recording invariants."""


@dataclass(frozen=True)
class DeviceProfile:
    """Physical screen geometry needed to map CSS pixels to centimetres."""

    screen_w_px: int
    screen_h_px: int
    ppi: float
    dpr: float
    name: str = "device"

    def __post_init__(self):
        for field_name in ("screen_w_px", "screen_h_px", "ppi", "dpr"):
            if getattr(self, field_name) <= 0:
                raise ValueError(f"{field_name} must be > 0")

    @property
    def screen_w_cm(self) -> float:
        return self.screen_w_px / self.ppi * 2.54

    @property
    def screen_h_cm(self) -> float:
        return self.screen_h_px / self.ppi * 2.54

    @property
    def css_w(self) -> float:
        return self.screen_w_px / self.dpr

    @property
    def css_h(self) -> float:
        return self.screen_h_px / self.dpr

    def to_dict(self) -> dict:
        return {"name": self.name, "screen_w_px": self.screen_w_px,
                "screen_h_px": self.screen_h_px, "ppi": self.ppi, "dpr": self.dpr}

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceProfile":
        return cls(screen_w_px=d["screen_w_px"], screen_h_px=d["screen_h_px"],
                   ppi=d["ppi"], dpr=d["dpr"], name=d.get("name", "device"))


DEVICE_PRESETS = {
    "compact": DeviceProfile(720, 1280, ppi=294.0, dpr=2.0, name="compact"),
    "standard": DeviceProfile(1080, 2340, ppi=409.0, dpr=3.0, name="standard"),
    "large": DeviceProfile(1440, 3200, ppi=513.0, dpr=3.5, name="large"),
}


@dataclass(frozen=True)
class FrameRef:
    path: Path
    pts_ms: float


@dataclass
class Recording:
    name: str
    frames: list[FrameRef]
    coords: np.ndarray  # (N, 3): t_ms, x_css, y_css
    device: DeviceProfile
    position_tag: str
    root: Path

    @property
    def pts_ms(self) -> np.ndarray:
        return np.array([f.pts_ms for f in self.frames])

    def load_frame(self, index: int) -> np.ndarray:
        return read_pgm(self.frames[index].path)

    def iter_frames(self):
        for i, ref in enumerate(self.frames):
            yield i, ref.pts_ms, read_pgm(ref.path)


def load_recording(manifest_path) -> Recording:
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ManifestError(f"manifest not found: {manifest_path}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{manifest_path}: invalid JSON ({exc})") from exc

    if data.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(
            f"{manifest_path}: unsupported schema_version {data.get('schema_version')!r}")
    for key in ("device", "frames", "coords", "position_tag"):
        if key not in data:
            raise ManifestError(f"{manifest_path}: missing key {key!r}")
    tag = data["position_tag"]
    if tag not in POSITION_TAGS:
        raise ManifestError(f"{manifest_path}: position_tag must be one of {POSITION_TAGS}")

    root = manifest_path.parent
    try:
        device = DeviceProfile.from_dict(data["device"])
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"{manifest_path}: bad device profile ({exc})") from exc

    frames = []
    for entry in data["frames"]:
        path = root / entry["file"]
        if not path.is_file():
            raise ManifestError(f"{manifest_path}: missing frame file {entry['file']}")
        frames.append(FrameRef(path=path, pts_ms=float(entry["pts_ms"])))
    if not frames:
        raise ManifestError(f"{manifest_path}: recording has no frames")
    pts = np.array([f.pts_ms for f in frames])
    if not np.all(np.diff(pts) > 0):
        raise ManifestError(f"{manifest_path}: frame pts_ms must be strictly increasing")

    coords = np.asarray(data["coords"], dtype=np.float64)
    if coords.size == 0:
        raise ManifestError(f"{manifest_path}: recording has no dot coordinates")
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise ManifestError(f"{manifest_path}: coords rows must be [t_ms, x_css, y_css]")
    if np.any(np.diff(coords[:, 0]) < 0):
        raise ManifestError(f"{manifest_path}: coord timestamps must be non-decreasing")

    return Recording(name=data.get("name", manifest_path.parent.name), frames=frames,
                     coords=coords, device=device, position_tag=tag, root=root)


def write_manifest(path, *, name: str, device: DeviceProfile, position_tag: str,
                   frames: list[dict], coords) -> None:
    data = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "name": name,
        "position_tag": position_tag,
        "device": device.to_dict(),
        "frames": frames,
        "coords": [[float(t), float(x), float(y)] for t, x, y in coords],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_index(index_path) -> list[Recording]:
    """Load every recording listed in a dataset index.json."""
    index_path = Path(index_path)
    with open(index_path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(f"{index_path}: unsupported schema_version")
    return [load_recording(index_path.parent / rel) for rel in data["recordings"]]
