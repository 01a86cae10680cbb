from .timing import StageTiming, TimingSummary, fps_of, time_stages
from .resources import ResourceSample, ResourceSampler, sample_resources, summarize_samples
from .energy import (
    EnergySummary,
    PowerLog,
    PowerLogError,
    additional_energy,
    energy_mwh,
    ingest_power_log,
)
from .report import (
    BenchRow,
    ENERGY_COLUMNS,
    RESOURCE_COLUMNS,
    TIMING_COLUMNS,
    VARIANTS,
    emit_report,
)

__all__ = [
    "StageTiming", "TimingSummary", "fps_of", "time_stages",
    "ResourceSample", "ResourceSampler", "sample_resources", "summarize_samples",
    "EnergySummary", "PowerLog", "PowerLogError", "additional_energy",
    "energy_mwh", "ingest_power_log",
    "BenchRow", "ENERGY_COLUMNS", "RESOURCE_COLUMNS", "TIMING_COLUMNS",
    "VARIANTS", "emit_report",
]
