"""Benchmark report emission: timing, resource and energy tables.

One row per (model, variant); variants are baseline / quantised / pruned.
Each table goes out as CSV and markdown with fixed column sets, so reruns
on identical inputs are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .energy import EnergySummary
from .resources import ResourceSample, summarize_samples
from .timing import TimingSummary, fps_of

VARIANTS = ("baseline", "quantised", "pruned")

TIMING_COLUMNS = ("model", "variant", "frames", "read_ms", "face_ms",
                  "preproc_ms", "infer_ms", "total_ms", "fps")
RESOURCE_COLUMNS = ("model", "variant", "samples", "cpu_pct_mean",
                    "mem_mb_mean", "mem_mb_peak")
ENERGY_COLUMNS = ("model", "variant", "frames", "total_mwh", "additional_mwh",
                  "total_mwh_per_frame", "additional_mwh_per_frame")


@dataclass
class BenchRow:
    model: str
    variant: str
    timing: TimingSummary | None = None
    resources: list[ResourceSample] = field(default_factory=list)
    energy: EnergySummary | None = None
    energy_frames: int | None = None

    def timing_cells(self) -> list[str]:
        mean = self.timing.mean()
        return [self.model, self.variant, str(self.timing.frames),
                *(_num(mean[c], 6) for c in
                  ("read_ms", "face_ms", "preproc_ms", "infer_ms", "total_ms")),
                _num(fps_of(mean["total_ms"]), 2)]

    def resource_cells(self) -> list[str]:
        s = summarize_samples(self.resources)
        return [self.model, self.variant, str(s["samples"]),
                _num(s["cpu_pct_mean"], 3), _num(s["mem_mb_mean"], 3),
                _num(s["mem_mb_peak"], 3)]

    def energy_cells(self) -> list[str]:
        n = self.energy_frames or (self.timing.frames if self.timing else 0)
        per = self.energy.per_frame(n) if n else self.energy
        return [self.model, self.variant, str(n),
                _num(self.energy.total_mwh, 6),
                _num(self.energy.additional_mwh, 6),
                _num(per.total_mwh, 6),
                _num(per.additional_mwh, 6)]


def _num(value, digits: int) -> str:
    return repr(round(float(value), digits))


def _csv(columns, rows) -> str:
    return ",".join(columns) + "\n" + "\n".join(",".join(r) for r in rows) + "\n"


def _markdown(columns, rows) -> str:
    lines = ["| " + " | ".join(columns) + " |",
             "| " + " | ".join("---" for _ in columns) + " |"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def emit_report(rows: list[BenchRow], out_dir) -> dict[str, Path]:
    """Write bench_timing/resources/energy .csv and .md files; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}

    timing_rows = [r.timing_cells() for r in rows if r.timing is not None]
    resource_rows = [r.resource_cells() for r in rows if r.resources]
    energy_rows = [r.energy_cells() for r in rows if r.energy is not None]

    for name, columns, table in (
            ("bench_timing", TIMING_COLUMNS, timing_rows),
            ("bench_resources", RESOURCE_COLUMNS, resource_rows),
            ("bench_energy", ENERGY_COLUMNS, energy_rows)):
        if not table:
            continue
        csv_path = out_dir / f"{name}.csv"
        md_path = out_dir / f"{name}.md"
        csv_path.write_text(_csv(columns, table), encoding="utf-8")
        md_path.write_text(_markdown(columns, table), encoding="utf-8")
        written[f"{name}.csv"] = csv_path
        written[f"{name}.md"] = md_path
    return written
