"""1 Hz process CPU/memory sampling on a background thread.

The sampler tracks a process by PID (optionally including its children),
appends samples without blocking the measured workload, and closes the
series cleanly if the process exits mid-run.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import psutil


@dataclass(frozen=True)
class ResourceSample:
    t_s: float
    cpu_pct: float   # may exceed 100 on multicore
    mem_mb: float    # resident set size

    def __post_init__(self):
        if self.cpu_pct < 0:
            raise ValueError("cpu_pct must be >= 0")
        if self.mem_mb <= 0:
            raise ValueError("mem_mb must be > 0")


class ResourceSampler:
    """Samples one process at a fixed interval until stopped or it exits."""

    def __init__(self, pid: int | None = None, interval_s: float = 1.0,
                 include_children: bool = False):
        if interval_s <= 0:
            raise ValueError("interval must be positive")
        self.pid = pid
        self.interval_s = interval_s
        self.include_children = include_children
        self.samples: list[ResourceSample] = []
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.process_exited = False

    def _procs(self, proc):
        if not self.include_children:
            return [proc]
        try:
            return [proc] + proc.children(recursive=True)
        except psutil.NoSuchProcess:
            return [proc]

    def _loop(self) -> None:
        try:
            proc = psutil.Process(self.pid)
        except psutil.NoSuchProcess:
            self.process_exited = True
            return
        # prime cpu_percent so the first interval reading is meaningful
        primed = {}
        for p in self._procs(proc):
            try:
                p.cpu_percent(None)
                primed[p.pid] = p
            except psutil.NoSuchProcess:
                pass
        start = time.perf_counter()
        while not self._stop.wait(self.interval_s):
            try:
                procs = self._procs(proc)
                cpu = 0.0
                mem = 0.0
                for p in procs:
                    tracked = primed.get(p.pid)
                    if tracked is None:
                        p.cpu_percent(None)
                        primed[p.pid] = p
                        continue
                    cpu += tracked.cpu_percent(None)
                    mem += tracked.memory_info().rss / (1024.0 * 1024.0)
                if mem <= 0:
                    continue
                self.samples.append(ResourceSample(
                    t_s=time.perf_counter() - start, cpu_pct=cpu, mem_mb=mem))
            except psutil.NoSuchProcess:
                self.process_exited = True
                return

    def start(self) -> "ResourceSampler":
        if self._thread is not None:
            raise RuntimeError("sampler already started")
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> list[ResourceSample]:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=self.interval_s * 4 + 2.0)
        return self.samples

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def sample_resources(pid: int | None, duration_s: float, interval_s: float = 1.0,
                     include_children: bool = False) -> list[ResourceSample]:
    """Sample for a fixed duration (convenience wrapper over ResourceSampler)."""
    sampler = ResourceSampler(pid, interval_s, include_children).start()
    deadline = time.perf_counter() + duration_s
    while time.perf_counter() < deadline and not sampler.process_exited:
        time.sleep(min(0.05, interval_s))
    return sampler.stop()


def summarize_samples(samples: list[ResourceSample]) -> dict[str, float]:
    if not samples:
        return {"cpu_pct_mean": 0.0, "mem_mb_mean": 0.0, "mem_mb_peak": 0.0, "samples": 0}
    cpu = [s.cpu_pct for s in samples]
    mem = [s.mem_mb for s in samples]
    return {"cpu_pct_mean": sum(cpu) / len(cpu),
            "mem_mb_mean": sum(mem) / len(mem),
            "mem_mb_peak": max(mem),
            "samples": len(samples)}
