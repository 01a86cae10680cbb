"""Model graphs: ordered layer stacks producing a 2-D gaze coordinate.

Three architectures are supported: a depthwise-separable CNN over a single
frame, and CNN trunks feeding a GRU or LSTM over a window of frames. Layer
stacks are declared in a JSON config file (see ``configs/models.json``);
reference configs approximate production-scale parameter counts, ``*_tiny``
configs stay under 50k parameters for tests.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .layers import Layer, ShapeError, layer_from_spec

RECURRENT_KINDS = ("gru", "lstm")

CONFIG_SCHEMA_VERSION = 1


class NonFiniteError(ArithmeticError):
    """A forward pass produced NaN or infinity (corrupt weights or inputs)."""


@dataclass
class ModelGraph:
    """An immutable-by-convention inference graph.

    ``forward``/``predict`` never mutate the graph, so one instance can be
    shared across worker threads. Training and optimisation operate on
    copies (see ``ModelGraph.copy``).
    """

    name: str
    layers: list[Layer]
    input_shape: tuple[int, int, int]
    dtype: str = "single"                      # "single" | "half"
    window: int | None = None                  # frames per sample, recurrent only
    masks: list[list[np.ndarray | None]] = field(default_factory=list)

    def __post_init__(self):
        if not self.masks:
            self.masks = [[None] * len(layer.params()) for layer in self.layers]

    # -- structure ----------------------------------------------------------

    @property
    def recurrent_index(self) -> int | None:
        for i, layer in enumerate(self.layers):
            if layer.kind in RECURRENT_KINDS:
                return i
        return None

    @property
    def is_recurrent(self) -> bool:
        return self.recurrent_index is not None

    def param_count(self) -> int:
        return sum(p.size for layer in self.layers for p in layer.params())

    def param_payload_bytes(self) -> int:
        return sum(p.nbytes for layer in self.layers for p in layer.params())

    def compute_params(self) -> list[list[np.ndarray]]:
        """Per-layer parameter lists widened to float32 for arithmetic."""
        out = []
        for layer in self.layers:
            params = layer.params()
            if self.dtype == "half":
                params = [p.astype(np.float32) for p in params]
            out.append(params)
        return out

    def copy(self) -> "ModelGraph":
        dup = ModelGraph(
            name=self.name,
            layers=copy.deepcopy(self.layers),
            input_shape=self.input_shape,
            dtype=self.dtype,
            window=self.window,
            masks=[[None if m is None else m.copy() for m in row] for row in self.masks],
        )
        return dup

    def config(self) -> dict:
        cfg = {
            "input": list(self.input_shape),
            "layers": [layer.spec() for layer in self.layers],
        }
        if self.window is not None:
            cfg["window"] = self.window
        return cfg

    # -- inference ----------------------------------------------------------

    def _check_frame_shape(self, shape):
        if tuple(shape) != tuple(self.input_shape):
            raise ShapeError(
                f"model {self.name} expects frames of shape {self.input_shape}, got {tuple(shape)}")

    def forward(self, batch: np.ndarray) -> np.ndarray:
        """Batched forward: (B,H,W,C) for cnn, (B,T,H,W,C) for recurrent models."""
        x = np.asarray(batch, dtype=np.float32)
        params = self.compute_params()
        ridx = self.recurrent_index
        if ridx is None:
            if x.ndim != 4:
                raise ShapeError(f"expected (B,H,W,C) input, got shape {x.shape}")
            self._check_frame_shape(x.shape[1:])
            for layer, p in zip(self.layers, params):
                x = layer.forward(x, p)
        else:
            if x.ndim != 5:
                raise ShapeError(f"expected (B,T,H,W,C) input, got shape {x.shape}")
            self._check_frame_shape(x.shape[2:])
            b, t = x.shape[:2]
            x = x.reshape(b * t, *x.shape[2:])
            for layer, p in zip(self.layers[:ridx], params[:ridx]):
                x = layer.forward(x, p)
            x = x.reshape(b, t, -1)
            for layer, p in zip(self.layers[ridx:], params[ridx:]):
                x = layer.forward(x, p)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"model {self.name} produced non-finite outputs")
        return x

    def predict(self, sample: np.ndarray) -> np.ndarray:
        """Single-sample forward: (H,W,C) frame or (T,H,W,C) frame window."""
        sample = np.asarray(sample)
        expected_ndim = 4 if self.is_recurrent else 3
        if sample.ndim != expected_ndim:
            raise ShapeError(
                f"model {self.name} takes a {expected_ndim}-d sample, got shape {sample.shape}")
        return self.forward(sample[None])[0]


def model_forward(graph: ModelGraph, sample: np.ndarray) -> tuple[float, float]:
    """Run one frame (cnn) or one frame window (recurrent) to an (x_cm, y_cm) pair."""
    out = graph.predict(sample)
    return float(out[0]), float(out[1])


def param_count(graph: ModelGraph) -> int:
    return graph.param_count()


def window_index_matrix(n: int, window: int) -> np.ndarray:
    """(n, window) trailing-window indices, clamped at 0 (left pad by repeat)."""
    if n == 0:
        raise ShapeError("cannot window an empty frame sequence")
    idx = np.arange(n)[:, None] - np.arange(window - 1, -1, -1)[None, :]
    return np.maximum(idx, 0)


def sliding_windows(frames: np.ndarray, window: int) -> np.ndarray:
    """Per-frame trailing windows, left-padded by repeating the first frame.

    frames (N, H, W, C) -> (N, window, H, W, C); window for frame i covers
    frames[i-window+1 .. i].
    """
    return frames[window_index_matrix(frames.shape[0], window)]


class WindowedFrames:
    """Lazy window view over a frame stack: windows materialise per batch.

    Supports the fancy indexing the training loop uses, without holding
    n * window copies of every frame in memory.
    """

    def __init__(self, frames: np.ndarray, window: int):
        self.frames = np.asarray(frames, dtype=np.float32)
        self.window = window
        self.index = window_index_matrix(self.frames.shape[0], window)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple:
        return (len(self), self.window, *self.frames.shape[1:])

    @property
    def dtype(self):
        return self.frames.dtype

    def __getitem__(self, idx) -> np.ndarray:
        return self.frames[self.index[idx]]

    def materialise(self) -> np.ndarray:
        return self.frames[self.index]


# ---------------------------------------------------------------------------
# config handling


def builtin_model_configs() -> dict:
    text = resources.files("edgegaze.configs").joinpath("models.json").read_text()
    return json.loads(text)


def load_model_configs(path=None) -> dict:
    if path is None:
        data = builtin_model_configs()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    version = data.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        raise ValueError(f"unsupported model config schema_version {version!r}")
    return data["models"]


def build_model(config: dict, *, name: str = "model", seed: int = 0,
                dtype: str = "single", window: int | None = None) -> ModelGraph:
    """Instantiate a graph from a config dict, seeding weight init."""
    if dtype not in ("single", "half"):
        raise ValueError(f"dtype must be 'single' or 'half', got {dtype!r}")
    input_shape = tuple(config["input"])
    if len(input_shape) != 3:
        raise ShapeError(f"model input must be (H, W, C), got {input_shape}")
    layers = [layer_from_spec(spec) for spec in config["layers"]]
    rng = np.random.default_rng(seed)
    shape = input_shape
    for layer in layers:
        shape = layer.build(shape, rng)
    if shape != (2,):
        raise ShapeError(f"output head must produce 2 units, config yields {shape}")
    win = window if window is not None else config.get("window")
    recurrent = any(layer.kind in RECURRENT_KINDS for layer in layers)
    if recurrent and win is None:
        win = 8
    if not recurrent:
        win = None
    graph = ModelGraph(name=name, layers=layers, input_shape=input_shape,
                       dtype=dtype, window=win)
    if dtype == "half":
        for layer in layers:
            layer.set_params([p.astype(np.float16) for p in layer.params()])
    return graph


def build_named_model(name: str, *, seed: int = 0, dtype: str = "single",
                      window: int | None = None, config_path=None) -> ModelGraph:
    configs = load_model_configs(config_path)
    if name not in configs:
        raise KeyError(f"unknown model config {name!r}; have {sorted(configs)}")
    return build_model(configs[name], name=name, seed=seed, dtype=dtype, window=window)
