"""Per-stage pipeline timing on the monotonic clock.

Each frame is timed through read (PGM from disk), face detection,
preprocessing and inference; the per-frame total is measured around the
whole block, so it is always >= the stage sum.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..nn.graph import ModelGraph
from ..pipeline import NoFaceFound, detect_face, preprocess
from ..pgm import read_pgm
from ..recording import Recording


@dataclass(frozen=True)
class StageTiming:
    read_ms: float
    face_ms: float
    preproc_ms: float
    infer_ms: float
    total_ms: float

    def __post_init__(self):
        stages = (self.read_ms, self.face_ms, self.preproc_ms, self.infer_ms)
        if any(v < 0 for v in stages) or self.total_ms < 0:
            raise ValueError("timings must be non-negative")
        if self.total_ms + 1e-9 < sum(stages):
            raise ValueError(
                f"total {self.total_ms} ms below stage sum {sum(stages)} ms")

    COLUMNS = ("read_ms", "face_ms", "preproc_ms", "infer_ms", "total_ms")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.read_ms, self.face_ms, self.preproc_ms, self.infer_ms, self.total_ms)


@dataclass
class TimingSummary:
    model: str
    timings: list[StageTiming]
    skipped: int = 0

    def mean(self) -> dict[str, float]:
        arr = np.array([t.as_tuple() for t in self.timings])
        return dict(zip(StageTiming.COLUMNS, arr.mean(axis=0)))

    def std(self) -> dict[str, float]:
        arr = np.array([t.as_tuple() for t in self.timings])
        return dict(zip(StageTiming.COLUMNS, arr.std(axis=0)))

    @property
    def frames(self) -> int:
        return len(self.timings)

    def mean_fps(self) -> float:
        return fps_of(self.mean()["total_ms"])


def fps_of(total_ms: float) -> float:
    """Frames per second implied by a per-frame total time."""
    if total_ms <= 0:
        raise ValueError(f"total_ms must be positive, got {total_ms}")
    return 1000.0 / total_ms


def time_stages(graph: ModelGraph, recording: Recording,
                detector=detect_face) -> TimingSummary:
    """Time every pipeline stage per frame over one recording."""
    window = graph.window if graph.is_recurrent else None
    history: list[np.ndarray] = []
    timings = []
    skipped = 0
    for ref in recording.frames:
        t_start = time.perf_counter()

        t0 = time.perf_counter()
        frame = read_pgm(ref.path)
        read_ms = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        try:
            box = detector(frame)
        except NoFaceFound:
            face_ms = (time.perf_counter() - t0) * 1000.0
            total_ms = (time.perf_counter() - t_start) * 1000.0
            timings.append(StageTiming(read_ms, face_ms, 0.0, 0.0, total_ms))
            skipped += 1
            continue
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
        graph.predict(sample)
        infer_ms = (time.perf_counter() - t0) * 1000.0

        total_ms = (time.perf_counter() - t_start) * 1000.0
        timings.append(StageTiming(read_ms, face_ms, preproc_ms, infer_ms, total_ms))
    return TimingSummary(model=graph.name, timings=timings, skipped=skipped)
