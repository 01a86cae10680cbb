"""Post-training optimisation: half-precision quantisation and magnitude pruning.

Quantisation rounds every parameter to the nearest-even IEEE-754 half and
tags the graph dtype; arithmetic still widens to float32 (storage-only
compression). Pruning zeroes the smallest-magnitude weights per layer
following a cubic sparsity ramp, applied at fixed step intervals; biases
are never pruned. Both transformations operate on private copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn.graph import ModelGraph
from .nn.train import TrainConfig, TrainingDiverged, train_adam

HALF_MAX = 65504.0


class QuantizationError(ValueError):
    """A parameter cannot be represented in half precision."""


@dataclass
class SparsitySchedule:
    """Cubic ramp from ``start`` to ``final`` sparsity over ``total_steps``,
    applied every ``interval`` steps and held constant in between."""

    start: float = 0.80
    final: float = 0.90
    total_steps: int = 2000
    interval: int = 500

    def __post_init__(self):
        if not (0.0 <= self.start <= self.final <= 1.0):
            raise ValueError(f"need 0 <= start <= final <= 1, got {self.start}, {self.final}")
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        if self.total_steps < 0 or self.total_steps % self.interval:
            raise ValueError("interval must divide total_steps")

    def application_steps(self) -> list[int]:
        return list(range(0, self.total_steps + 1, self.interval))


def sparsity_at(step: int, sched: SparsitySchedule) -> float:
    """Target sparsity in effect at ``step`` (held between applications)."""
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if sched.total_steps == 0:
        return sched.final
    effective = min(step - step % sched.interval, sched.total_steps)
    remaining = 1.0 - effective / sched.total_steps
    return sched.final + (sched.start - sched.final) * remaining ** 3


@dataclass
class OptimisationReport:
    mode: str
    baseline_bytes: int
    optimised_bytes: int
    layer_sparsity: dict[str, float] = field(default_factory=dict)
    rmse_before: float | None = None
    rmse_after: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def reduction_pct(self) -> float:
        return (1.0 - self.optimised_bytes / self.baseline_bytes) * 100.0

    def rows(self) -> list[tuple[str, str]]:
        rows = [
            ("mode", self.mode),
            ("baseline_bytes", str(self.baseline_bytes)),
            ("optimised_bytes", str(self.optimised_bytes)),
            ("reduction_pct", repr(round(self.reduction_pct, 6))),
            ("rmse_before", "" if self.rmse_before is None else repr(self.rmse_before)),
            ("rmse_after", "" if self.rmse_after is None else repr(self.rmse_after)),
        ]
        for name, value in self.layer_sparsity.items():
            rows.append((f"sparsity.{name}", repr(round(value, 9))))
        for i, note in enumerate(self.notes):
            rows.append((f"note.{i}", note))
        return rows

    def to_csv(self) -> str:
        return "key,value\n" + "\n".join(f"{k},{v}" for k, v in self.rows()) + "\n"

    def to_markdown(self) -> str:
        lines = ["| key | value |", "| --- | --- |"]
        lines += [f"| {k} | {v} |" for k, v in self.rows()]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# quantisation


def quantize_half(graph: ModelGraph) -> tuple[ModelGraph, OptimisationReport]:
    """Round every parameter to nearest-even float16 storage."""
    if graph.dtype != "single":
        raise ValueError(f"graph is already {graph.dtype} precision")
    out = graph.copy()
    baseline = graph.param_payload_bytes()
    for i, layer in enumerate(out.layers):
        params = layer.params()
        for arr in params:
            too_big = np.abs(arr) > HALF_MAX
            if np.any(too_big):
                raise QuantizationError(
                    f"layer {i} ({layer.kind}) has {int(too_big.sum())} weights "
                    f"outside the half-precision range (max |w| = {np.abs(arr).max():g})")
        layer.set_params([arr.astype(np.float16) for arr in params])
    out.dtype = "half"
    report = OptimisationReport(mode="quantize", baseline_bytes=baseline,
                                optimised_bytes=out.param_payload_bytes())
    return out, report


def dequantize(graph: ModelGraph) -> ModelGraph:
    """Widen half storage back to float32 (values unchanged)."""
    out = graph.copy()
    for layer in out.layers:
        layer.set_params([p.astype(np.float32) for p in layer.params()])
    out.dtype = "single"
    return out


# ---------------------------------------------------------------------------
# pruning


def prune_low_magnitude(weights: np.ndarray, target_sparsity: float,
                        mask: np.ndarray | None = None):
    """Zero the floor(target * n) smallest-magnitude entries.

    A prior survivor ``mask`` keeps already-pruned entries pruned regardless
    of how ties sort. Returns (pruned_weights, survivor_mask).
    """
    if not 0.0 <= target_sparsity <= 1.0:
        raise ValueError(f"target sparsity must be in [0, 1], got {target_sparsity}")
    flat = weights.ravel()
    n = flat.size
    k = int(np.floor(target_sparsity * n))
    magnitude = np.abs(flat).astype(np.float64)
    if mask is not None:
        already = ~mask.ravel()
        magnitude[already] = -np.inf
        k = max(k, int(already.sum()))
    survivors = np.ones(n, dtype=bool)
    if k > 0:
        order = np.argsort(magnitude, kind="stable")
        survivors[order[:k]] = False
    new_mask = survivors.reshape(weights.shape)
    return weights * new_mask, new_mask


def _layer_label(i: int, layer) -> str:
    return f"{i}.{layer.kind}"


def measured_sparsity(graph: ModelGraph) -> dict[str, float]:
    """Zero fraction over each layer's prunable weight tensors."""
    out = {}
    for i, layer in enumerate(graph.layers):
        if not layer.prunable:
            continue
        params = layer.params()
        zeros = sum(int(np.count_nonzero(params[j] == 0)) for j in layer.prunable)
        total = sum(params[j].size for j in layer.prunable)
        out[_layer_label(i, layer)] = zeros / total
    return out


def prune_model(graph: ModelGraph, sched: SparsitySchedule,
                fine_tune: TrainConfig | None = None,
                dataset=None) -> tuple[ModelGraph, OptimisationReport]:
    """Apply the sparsity schedule to every prunable layer.

    With ``fine_tune`` and a dataset, runs masked training between schedule
    applications; pruned weights never revive. A divergent fine-tune aborts
    the remaining schedule and returns the last stable graph.
    """
    if fine_tune is not None and dataset is None:
        raise ValueError("fine_tune requires a dataset")
    out = graph.copy()
    baseline = serialized_size(graph, "dense")
    notes = []

    def apply(step):
        target = sparsity_at(step, sched)
        for i, layer in enumerate(out.layers):
            params = layer.params()
            for j in layer.prunable:
                pruned, mask = prune_low_magnitude(params[j], target, out.masks[i][j])
                params[j] = pruned
                out.masks[i][j] = mask
            layer.set_params(params)

    steps = sched.application_steps()
    for idx, step in enumerate(steps):
        apply(step)
        if fine_tune is not None and idx < len(steps) - 1:
            try:
                result = train_adam(out, dataset, fine_tune, respect_masks=True)
            except TrainingDiverged as exc:
                notes.append(f"fine-tune diverged after step {step}: {exc}")
                break
            trained = result.graph
            trained.masks = out.masks
            out = trained

    report = OptimisationReport(
        mode="prune",
        baseline_bytes=baseline,
        optimised_bytes=serialized_size(out, "sparse"),
        layer_sparsity=measured_sparsity(out),
        notes=notes,
    )
    return out, report


# ---------------------------------------------------------------------------
# size accounting


def serialized_size(graph: ModelGraph, encoding: str = "dense") -> int:
    """Parameter payload bytes under the given encoding (headers excluded).

    Sparse encoding stores, for each masked tensor, the survivor bitmap plus
    only the surviving values; unmasked tensors and biases stay dense.
    """
    if encoding == "dense":
        return graph.param_payload_bytes()
    if encoding != "sparse":
        raise ValueError(f"encoding must be 'dense' or 'sparse', got {encoding!r}")
    total = 0
    for layer, mask_row in zip(graph.layers, graph.masks):
        for arr, mask in zip(layer.params(), mask_row):
            if mask is None:
                total += arr.nbytes
            else:
                total += (arr.size + 7) // 8
                total += int(mask.sum()) * arr.itemsize
    return total


def size_reduction(baseline_bytes: int, optimised_bytes: int) -> float:
    """Percentage shrink from baseline to optimised."""
    if baseline_bytes <= 0:
        raise ValueError("baseline size must be positive")
    return (1.0 - optimised_bytes / baseline_bytes) * 100.0
