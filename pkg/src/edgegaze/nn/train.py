"""Adam training loop.

Loss is the mean squared Euclidean distance (cm^2) between predicted and
true gaze points. The learning rate follows lr_t = lr / (1 + decay * t)
with t counting optimiser steps from 0. Given a fixed seed, training is
bit-reproducible: shuffling, batching and updates share one seeded PRNG
and run single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import ModelGraph


class TrainingDiverged(ArithmeticError):
    """Loss became non-finite; training aborted."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    decay: float = 0.0001
    batch_size: int = 32
    epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "decay", "batch_size", "epochs"):
            if getattr(self, name) < 0 or (name in ("learning_rate", "batch_size")
                                           and getattr(self, name) <= 0):
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass
class TrainResult:
    graph: ModelGraph
    epoch_losses: list[float] = field(default_factory=list)
    steps: int = 0


class AdamState:
    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8

    def __init__(self, params_per_layer):
        self.m = [[np.zeros_like(p) for p in row] for row in params_per_layer]
        self.v = [[np.zeros_like(p) for p in row] for row in params_per_layer]
        self.t = 0

    def update(self, params_per_layer, grads_per_layer, lr):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for li, (params, grads) in enumerate(zip(params_per_layer, grads_per_layer)):
            for pi, (p, g) in enumerate(zip(params, grads)):
                m = self.m[li][pi]
                v = self.v[li][pi]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                p -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def _forward_train(graph: ModelGraph, params, x):
    ridx = graph.recurrent_index
    caches = []
    if ridx is None:
        for layer, p in zip(graph.layers, params):
            x, cache = layer.forward_train(x, p)
            caches.append(cache)
        return x, caches, None
    b, t = x.shape[:2]
    x = x.reshape(b * t, *x.shape[2:])
    for layer, p in zip(graph.layers[:ridx], params[:ridx]):
        x, cache = layer.forward_train(x, p)
        caches.append(cache)
    trunk_out_shape = x.shape
    x = x.reshape(b, t, -1)
    for layer, p in zip(graph.layers[ridx:], params[ridx:]):
        x, cache = layer.forward_train(x, p)
        caches.append(cache)
    return x, caches, trunk_out_shape


def _backward(graph: ModelGraph, caches, trunk_out_shape, dy):
    ridx = graph.recurrent_index
    grads = [None] * len(graph.layers)
    if ridx is None:
        for i in range(len(graph.layers) - 1, -1, -1):
            dy, grads[i] = graph.layers[i].backward(dy, caches[i], need_dx=i > 0)
        return grads
    for i in range(len(graph.layers) - 1, ridx - 1, -1):
        dy, grads[i] = graph.layers[i].backward(dy, caches[i])
    dy = dy.reshape(trunk_out_shape)
    for i in range(ridx - 1, -1, -1):
        dy, grads[i] = graph.layers[i].backward(dy, caches[i], need_dx=i > 0)
    return grads


def train_adam(graph: ModelGraph, dataset, cfg: TrainConfig,
               respect_masks: bool = False) -> TrainResult:
    """Train a private copy of ``graph`` on (inputs, targets) arrays.

    With ``respect_masks`` the graph's sparsity masks are applied to weight
    gradients and re-applied after each update, so pruned weights never
    revive during fine-tuning.
    """
    if graph.dtype != "single":
        raise ValueError("training requires a single-precision graph")
    inputs, targets = dataset
    if isinstance(inputs, np.ndarray) or not hasattr(inputs, "__getitem__"):
        inputs = np.asarray(inputs, dtype=np.float32)
    targets = np.asarray(targets, dtype=np.float32)
    if len(inputs) == 0:
        raise ValueError("dataset is empty")
    if len(inputs) != len(targets):
        raise ValueError(f"{len(inputs)} inputs vs {len(targets)} targets")

    trained = graph.copy()
    result = TrainResult(graph=trained)
    if cfg.epochs == 0:
        return result

    params = [layer.params() for layer in trained.layers]
    state = AdamState(params)
    rng = np.random.default_rng(cfg.seed)
    n = len(inputs)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            x = inputs[batch]
            y = targets[batch]
            with np.errstate(over="ignore", invalid="ignore"):
                pred, caches, trunk_shape = _forward_train(trained, params, x)
                diff = pred - y
                loss = float(np.mean(np.sum(diff * diff, axis=-1)))
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} step {state.t}")
            dy = (2.0 / len(batch)) * diff
            grads = _backward(trained, caches, trunk_shape, dy)
            if respect_masks:
                _mask_grads(trained, grads)
            lr = cfg.learning_rate / (1.0 + cfg.decay * state.t)
            state.update(params, grads, lr)
            if respect_masks:
                _mask_weights(trained)
            epoch_loss += loss
            n_batches += 1
        result.epoch_losses.append(epoch_loss / n_batches)
    result.steps = state.t
    return result


def _mask_grads(graph: ModelGraph, grads) -> None:
    for layer, grad_row, mask_row in zip(graph.layers, grads, graph.masks):
        for i, mask in enumerate(mask_row):
            if mask is not None:
                grad_row[i] *= mask


def _mask_weights(graph: ModelGraph) -> None:
    for layer, mask_row in zip(graph.layers, graph.masks):
        params = layer.params()
        for i, mask in enumerate(mask_row):
            if mask is not None:
                params[i] *= mask


def predict_batched(graph: ModelGraph, inputs, batch_size: int = 64) -> np.ndarray:
    """Forward in batches; accepts arrays or lazy window views."""
    out = []
    for start in range(0, len(inputs), batch_size):
        out.append(graph.forward(inputs[start:start + batch_size]))
    return np.concatenate(out)


def evaluate_loss(graph: ModelGraph, dataset) -> float:
    """Mean squared Euclidean distance of the graph on a dataset."""
    inputs, targets = dataset
    pred = predict_batched(graph, inputs)
    diff = pred - np.asarray(targets, dtype=np.float32)
    return float(np.mean(np.sum(diff * diff, axis=-1)))
