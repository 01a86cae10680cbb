"""Power-log ingestion and trapezoidal energy integration in mWh.

Logs are CSV with header ``t_s,volts,amps`` at a nominal 10 Hz. Power is
volts * amps at each sample and piecewise-linear in between, so the
trapezoid rule is exact for constant and linearly ramping power. Idle
baselines subtract out via ``additional_energy``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MWH_PER_JOULE = 1.0 / 3.6  # 1 mWh = 3.6 J


class PowerLogError(ValueError):
    """Malformed or non-physical power log."""


@dataclass
class PowerLog:
    t_s: np.ndarray
    volts: np.ndarray
    amps: np.ndarray
    flags: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t_s)

    @property
    def watts(self) -> np.ndarray:
        return self.volts * self.amps


def ingest_power_log(csv_path) -> PowerLog:
    """Parse and validate a t_s,volts,amps CSV; negatives are flagged."""
    path = Path(csv_path)
    try:
        lines = path.read_text(encoding="utf-8").strip().splitlines()
    except FileNotFoundError as exc:
        raise PowerLogError(f"power log not found: {path}") from exc
    if not lines:
        raise PowerLogError(f"{path}: empty power log")
    header = lines[0].strip()
    if header != "t_s,volts,amps":
        raise PowerLogError(f"{path}: expected header 't_s,volts,amps', got {header!r}")
    if len(lines) < 2:
        raise PowerLogError(f"{path}: no samples")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise PowerLogError(f"{path}:{lineno}: expected 3 columns")
        try:
            rows.append(tuple(float(p) for p in parts))
        except ValueError as exc:
            raise PowerLogError(f"{path}:{lineno}: non-numeric value") from exc
    arr = np.asarray(rows)
    t, volts, amps = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.any(np.diff(t) <= 0):
        raise PowerLogError(f"{path}: timestamps must be strictly increasing")
    flags = []
    for name, series in (("volts", volts), ("amps", amps)):
        bad = np.flatnonzero(series < 0)
        if bad.size:
            flags.append(f"{bad.size} negative {name} readings (first at row {bad[0] + 2})")
    return PowerLog(t_s=t, volts=volts, amps=amps, flags=flags)


def energy_mwh(log: PowerLog, t0: float | None = None, t1: float | None = None) -> float:
    """Trapezoidal integral of V*I over [t0, t1], in mWh.

    Power is interpolated linearly at the interval endpoints, which makes
    the integral exactly additive over adjacent intervals.
    """
    if len(log) < 2:
        raise PowerLogError("need at least 2 samples to integrate")
    t = log.t_s
    p = log.watts
    t0 = float(t[0]) if t0 is None else float(t0)
    t1 = float(t[-1]) if t1 is None else float(t1)
    if t0 >= t1:
        raise ValueError(f"need t0 < t1, got [{t0}, {t1}]")
    if t0 < t[0] or t1 > t[-1]:
        raise ValueError(f"[{t0}, {t1}] outside the log range [{t[0]}, {t[-1]}]")
    cut = np.array([t0, t1])
    p_cut = np.interp(cut, t, p)
    inside = (t > t0) & (t < t1)
    ts = np.concatenate(([t0], t[inside], [t1]))
    ps = np.concatenate(([p_cut[0]], p[inside], [p_cut[1]]))
    joules = float(np.trapezoid(ps, ts))
    return joules * MWH_PER_JOULE


@dataclass(frozen=True)
class EnergySummary:
    total_mwh: float
    idle_mwh: float

    @property
    def additional_mwh(self) -> float:
        return self.total_mwh - self.idle_mwh

    def per_frame(self, n_frames: int) -> "EnergySummary":
        """Whole-run energy divided evenly over the frames processed."""
        if n_frames <= 0:
            raise ValueError("n_frames must be positive")
        return EnergySummary(self.total_mwh / n_frames, self.idle_mwh / n_frames)


def additional_energy(total_mwh: float, idle_mwh_same_duration: float) -> float:
    """Energy attributable to the workload after idle-baseline subtraction."""
    return total_mwh - idle_mwh_same_duration
