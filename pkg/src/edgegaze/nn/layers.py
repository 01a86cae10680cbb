"""Layer primitives with forward and backward passes on plain numpy arrays.

All kernels are dtype-generic: arrays flow through in whatever float dtype
they arrive in (training uses float32, gradient checking float64).
Half-precision parameters are storage-only; callers widen them before
arithmetic (see ``ModelGraph.compute_params``).

Shape conventions: images are channels-last ``(H, W, C)``, batched images
``(B, H, W, C)``, sequences ``(B, T, N)``. Gate blocks are packed column-wise
in a single matrix: GRU order ``[update | reset | candidate]``, LSTM order
``[input | forget | output | cell]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Input and parameter shapes are inconsistent."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _pad_spec(size: int, k: int, stride: int, padding: str) -> tuple[int, int, int]:
    """Return (pad_before, pad_after, out_size) for one spatial axis."""
    if padding == "valid":
        if size < k:
            raise ShapeError(f"input size {size} smaller than kernel {k} with valid padding")
        return 0, 0, (size - k) // stride + 1
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + k - size, 0)
        return total // 2, total - total // 2, out
    raise ValueError(f"padding must be 'valid' or 'same', got {padding!r}")


def _extract_patches(x: np.ndarray, kh: int, kw: int, stride: int, padding: str):
    """im2col: return (patches (B,oh,ow,C,kh,kw), padded input shape)."""
    b, h, w, c = x.shape
    pt, pb, oh = _pad_spec(h, kh, stride, padding)
    pl, pr, ow = _pad_spec(w, kw, stride, padding)
    if pt or pb or pl or pr:
        x = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    patches = windows[:, ::stride, ::stride]
    return patches, (x.shape, oh, ow, pt, pl)


def _scatter_patches(dpatches: np.ndarray, padded_shape, h: int, w: int,
                     kh: int, kw: int, stride: int, pt: int, pl: int) -> np.ndarray:
    """col2im: accumulate patch gradients (B,oh,ow,kh,kw,C) back onto the input."""
    b, hp, wp, c = padded_shape
    oh, ow = dpatches.shape[1], dpatches.shape[2]
    dxp = np.zeros(padded_shape, dtype=dpatches.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + (oh - 1) * stride + 1:stride,
                j:j + (ow - 1) * stride + 1:stride, :] += dpatches[:, :, :, i, j, :]
    return dxp[:, pt:pt + h, pl:pl + w, :]


# ---------------------------------------------------------------------------
# batched kernels


def conv2d_batch(x, kernel, bias=None, stride=1, padding="valid"):
    b, h, w, c = x.shape
    kh, kw, kc, f = kernel.shape
    if kc != c:
        raise ShapeError(f"kernel expects {kc} input channels, input has {c}")
    patches, _ = _extract_patches(x, kh, kw, stride, padding)
    out = np.tensordot(patches, kernel, axes=((4, 5, 3), (0, 1, 2)))
    if bias is not None:
        out = out + bias
    return out


def conv2d_batch_train(x, kernel, bias, stride, padding):
    b, h, w, c = x.shape
    kh, kw, kc, f = kernel.shape
    if kc != c:
        raise ShapeError(f"kernel expects {kc} input channels, input has {c}")
    patches, meta = _extract_patches(x, kh, kw, stride, padding)
    out = np.tensordot(patches, kernel, axes=((4, 5, 3), (0, 1, 2)))
    if bias is not None:
        out = out + bias
    return out, (patches, meta, x.shape, kernel, stride)


def conv2d_batch_backward(dy, cache, need_dx=True):
    patches, (padded_shape, oh, ow, pt, pl), x_shape, kernel, stride = cache
    kh, kw, c, f = kernel.shape
    dkernel = np.tensordot(patches, dy, axes=((0, 1, 2), (0, 1, 2)))  # (C,kh,kw,F)
    dkernel = dkernel.transpose(1, 2, 0, 3)
    dbias = dy.sum(axis=(0, 1, 2))
    if not need_dx:
        return None, dkernel, dbias
    dpatches = np.tensordot(dy, kernel, axes=((3,), (3,)))  # (B,oh,ow,kh,kw,C)
    dx = _scatter_patches(dpatches, padded_shape, x_shape[1], x_shape[2],
                          kh, kw, stride, pt, pl)
    return dx, dkernel, dbias


def depthwise_batch(x, kernels, bias=None, stride=1, padding="valid"):
    b, h, w, c = x.shape
    kh, kw, kc = kernels.shape
    if kc != c:
        raise ShapeError(f"depthwise kernels cover {kc} channels, input has {c}")
    patches, _ = _extract_patches(x, kh, kw, stride, padding)
    out = np.einsum("bopcij,ijc->bopc", patches, kernels)
    if bias is not None:
        out = out + bias
    return out


def depthwise_batch_train(x, kernels, bias, stride, padding):
    b, h, w, c = x.shape
    kh, kw, kc = kernels.shape
    if kc != c:
        raise ShapeError(f"depthwise kernels cover {kc} channels, input has {c}")
    patches, meta = _extract_patches(x, kh, kw, stride, padding)
    out = np.einsum("bopcij,ijc->bopc", patches, kernels)
    if bias is not None:
        out = out + bias
    return out, (patches, meta, x.shape, kernels, stride)


def depthwise_batch_backward(dy, cache, need_dx=True):
    patches, (padded_shape, oh, ow, pt, pl), x_shape, kernels, stride = cache
    kh, kw, c = kernels.shape
    dkernels = np.einsum("bopcij,bopc->ijc", patches, dy)
    dbias = dy.sum(axis=(0, 1, 2))
    if not need_dx:
        return None, dkernels, dbias
    dpatches = np.einsum("bopc,ijc->bopijc", dy, kernels)
    dx = _scatter_patches(dpatches, padded_shape, x_shape[1], x_shape[2],
                          kh, kw, stride, pt, pl)
    return dx, dkernels, dbias


def pointwise_batch(x, kernel, bias=None):
    c_in, f = kernel.shape
    if x.shape[-1] != c_in:
        raise ShapeError(f"pointwise kernel mixes {c_in} channels, input has {x.shape[-1]}")
    out = x @ kernel
    if bias is not None:
        out = out + bias
    return out


# ---------------------------------------------------------------------------
# single-sample surface


def _require_image(x, name="input"):
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeError(f"{name} must be (H, W, C), got shape {x.shape}")
    return x


def conv2d_forward(image, kernel, bias=None, stride=1, padding="valid"):
    """Cross-correlate one (H, W, C) image with a (Kh, Kw, C, F) kernel."""
    image = _require_image(image)
    return conv2d_batch(image[None], np.asarray(kernel), bias, stride, padding)[0]


def depthwise_conv_forward(image, kernels, bias=None, stride=1, padding="valid"):
    """Per-channel convolution: output channel c depends only on input channel c."""
    image = _require_image(image)
    return depthwise_batch(image[None], np.asarray(kernels), bias, stride, padding)[0]


def pointwise_conv_forward(image, kernel, bias=None):
    """1x1 channel-mixing convolution; spatial dims are preserved."""
    image = _require_image(image)
    kernel = np.asarray(kernel)
    if kernel.ndim == 4:
        if kernel.shape[:2] != (1, 1):
            raise ShapeError(f"pointwise kernel must be 1x1xCxF, got {kernel.shape}")
        kernel = kernel[0, 0]
    return pointwise_batch(image[None], kernel, bias)[0]


def dense_forward(x, weights, bias):
    """Affine map: x @ weights + bias for a single vector or a batch."""
    x = np.asarray(x)
    weights = np.asarray(weights)
    if x.shape[-1] != weights.shape[0]:
        raise ShapeError(f"dense expects {weights.shape[0]} features, got {x.shape[-1]}")
    return x @ weights + bias


@dataclass
class GRUParams:
    """Packed GRU parameters; gate column order [update | reset | candidate]."""

    w_in: np.ndarray   # (N, 3H)
    w_rec: np.ndarray  # (H, 3H)
    bias: np.ndarray   # (3H,)


@dataclass
class LSTMParams:
    """Packed LSTM parameters; gate column order [input | forget | output | cell]."""

    w_in: np.ndarray   # (N, 4H)
    w_rec: np.ndarray  # (H, 4H)
    bias: np.ndarray   # (4H,)


def gru_step(x, h, params: GRUParams):
    """One GRU update.

    update = sigmoid(Wz x + Uz h + bz), reset = sigmoid(Wr x + Ur h + br),
    candidate = tanh(Wc x + Uc (reset * h) + bc),
    h' = (1 - update) * h + update * candidate.
    """
    x = np.asarray(x)
    h = np.asarray(h)
    n_units = h.shape[-1]
    if params.w_in.shape != (x.shape[-1], 3 * n_units):
        raise ShapeError(f"gru w_in must be ({x.shape[-1]}, {3 * n_units}), got {params.w_in.shape}")
    if params.w_rec.shape != (n_units, 3 * n_units):
        raise ShapeError(f"gru w_rec must be ({n_units}, {3 * n_units}), got {params.w_rec.shape}")
    a_in = x @ params.w_in + params.bias
    a_rec = h @ params.w_rec
    u = sigmoid(a_in[..., :n_units] + a_rec[..., :n_units])
    r = sigmoid(a_in[..., n_units:2 * n_units] + a_rec[..., n_units:2 * n_units])
    cand = np.tanh(a_in[..., 2 * n_units:] + (r * h) @ params.w_rec[:, 2 * n_units:])
    return (1.0 - u) * h + u * cand


def lstm_step(x, h, c, params: LSTMParams):
    """One LSTM update with input, forget and output gates.

    c' = forget * c + input * cell_candidate, h' = output * tanh(c').
    """
    x = np.asarray(x)
    h = np.asarray(h)
    c = np.asarray(c)
    n_units = h.shape[-1]
    if params.w_in.shape != (x.shape[-1], 4 * n_units):
        raise ShapeError(f"lstm w_in must be ({x.shape[-1]}, {4 * n_units}), got {params.w_in.shape}")
    if params.w_rec.shape != (n_units, 4 * n_units):
        raise ShapeError(f"lstm w_rec must be ({n_units}, {4 * n_units}), got {params.w_rec.shape}")
    a = x @ params.w_in + h @ params.w_rec + params.bias
    gi = sigmoid(a[..., :n_units])
    gf = sigmoid(a[..., n_units:2 * n_units])
    go = sigmoid(a[..., 2 * n_units:3 * n_units])
    gc = np.tanh(a[..., 3 * n_units:])
    c_new = gf * c + gi * gc
    return go * np.tanh(c_new), c_new


# ---------------------------------------------------------------------------
# layer classes (thread-safe inference: forward() never mutates state)


class Layer:
    kind = "layer"
    # indices into params() that magnitude pruning may zero (weight matrices only)
    prunable: tuple[int, ...] = ()

    def build(self, in_shape: tuple, rng: np.random.Generator) -> tuple:
        """Allocate parameters for the given input shape; return output shape."""
        raise NotImplementedError

    def params(self) -> list[np.ndarray]:
        return []

    def set_params(self, values: list[np.ndarray]) -> None:
        if values:
            raise ShapeError(f"{self.kind} takes no parameters")

    def spec(self) -> dict:
        return {"kind": self.kind}

    def forward(self, x: np.ndarray, params: list[np.ndarray]) -> np.ndarray:
        y, _ = self.forward_train(x, params)
        return y

    def forward_train(self, x, params):
        raise NotImplementedError

    def backward(self, dy, cache, need_dx: bool = True):
        """Return (dx, [dparam, ...]) matching params() order.

        ``need_dx=False`` (first layer of a stack) lets convolutions skip
        the input-gradient scatter, which nothing consumes."""
        raise NotImplementedError


def _he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype):
    limit = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    kind = "conv2d"
    prunable = (0,)

    def __init__(self, filters: int, kh: int = 3, kw: int = 3, stride: int = 1,
                 padding: str = "same"):
        self.filters = filters
        self.kh, self.kw = kh, kw
        self.stride = stride
        self.padding = padding
        self.kernel = None
        self.bias = None

    def build(self, in_shape, rng):
        h, w, c = in_shape
        self.kernel = _he_uniform(rng, (self.kh, self.kw, c, self.filters),
                                  self.kh * self.kw * c, np.float32)
        self.bias = np.zeros(self.filters, dtype=np.float32)
        _, _, oh = _pad_spec(h, self.kh, self.stride, self.padding)
        _, _, ow = _pad_spec(w, self.kw, self.stride, self.padding)
        return (oh, ow, self.filters)

    def params(self):
        return [self.kernel, self.bias]

    def set_params(self, values):
        self.kernel, self.bias = values

    def spec(self):
        return {"kind": self.kind, "filters": self.filters, "kh": self.kh,
                "kw": self.kw, "stride": self.stride, "padding": self.padding}

    def forward(self, x, params):
        kernel, bias = params
        return conv2d_batch(x, kernel, bias, self.stride, self.padding)

    def forward_train(self, x, params):
        kernel, bias = params
        return conv2d_batch_train(x, kernel, bias, self.stride, self.padding)

    def backward(self, dy, cache, need_dx=True):
        dx, dk, db = conv2d_batch_backward(dy, cache, need_dx)
        return dx, [dk, db]


class DepthwiseConv2D(Layer):
    kind = "depthwise_conv"
    prunable = (0,)

    def __init__(self, kh: int = 3, kw: int = 3, stride: int = 1, padding: str = "same"):
        self.kh, self.kw = kh, kw
        self.stride = stride
        self.padding = padding
        self.kernels = None
        self.bias = None

    def build(self, in_shape, rng):
        h, w, c = in_shape
        self.kernels = _he_uniform(rng, (self.kh, self.kw, c), self.kh * self.kw, np.float32)
        self.bias = np.zeros(c, dtype=np.float32)
        _, _, oh = _pad_spec(h, self.kh, self.stride, self.padding)
        _, _, ow = _pad_spec(w, self.kw, self.stride, self.padding)
        return (oh, ow, c)

    def params(self):
        return [self.kernels, self.bias]

    def set_params(self, values):
        self.kernels, self.bias = values

    def spec(self):
        return {"kind": self.kind, "kh": self.kh, "kw": self.kw,
                "stride": self.stride, "padding": self.padding}

    def forward(self, x, params):
        kernels, bias = params
        return depthwise_batch(x, kernels, bias, self.stride, self.padding)

    def forward_train(self, x, params):
        kernels, bias = params
        return depthwise_batch_train(x, kernels, bias, self.stride, self.padding)

    def backward(self, dy, cache, need_dx=True):
        dx, dk, db = depthwise_batch_backward(dy, cache, need_dx)
        return dx, [dk, db]


class PointwiseConv2D(Layer):
    kind = "pointwise_conv"
    prunable = (0,)

    def __init__(self, filters: int):
        self.filters = filters
        self.kernel = None
        self.bias = None

    def build(self, in_shape, rng):
        h, w, c = in_shape
        self.kernel = _he_uniform(rng, (c, self.filters), c, np.float32)
        self.bias = np.zeros(self.filters, dtype=np.float32)
        return (h, w, self.filters)

    def params(self):
        return [self.kernel, self.bias]

    def set_params(self, values):
        self.kernel, self.bias = values

    def spec(self):
        return {"kind": self.kind, "filters": self.filters}

    def forward(self, x, params):
        kernel, bias = params
        return pointwise_batch(x, kernel, bias)

    def forward_train(self, x, params):
        kernel, bias = params
        return pointwise_batch(x, kernel, bias), (x, kernel)

    def backward(self, dy, cache, need_dx=True):
        x, kernel = cache
        dk = np.tensordot(x, dy, axes=((0, 1, 2), (0, 1, 2)))
        db = dy.sum(axis=(0, 1, 2))
        dx = dy @ kernel.T if need_dx else None
        return dx, [dk, db]


class MaxPool2D(Layer):
    kind = "max_pool"

    def __init__(self, size: int = 2):
        self.size = size

    def build(self, in_shape, rng):
        h, w, c = in_shape
        if h % self.size or w % self.size:
            raise ShapeError(f"max_pool size {self.size} does not tile input {h}x{w}")
        return (h // self.size, w // self.size, c)

    def spec(self):
        return {"kind": self.kind, "size": self.size}

    def _windows(self, x):
        b, h, w, c = x.shape
        s = self.size
        xr = x.reshape(b, h // s, s, w // s, s, c)
        return xr.transpose(0, 1, 3, 2, 4, 5).reshape(b, h // s, w // s, s * s, c)

    def forward(self, x, params):
        return self._windows(x).max(axis=3)

    def forward_train(self, x, params):
        win = self._windows(x)
        idx = win.argmax(axis=3)
        out = np.take_along_axis(win, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        return out, (x.shape, idx)

    def backward(self, dy, cache, need_dx=True):
        x_shape, idx = cache
        b, h, w, c = x_shape
        s = self.size
        dwin = np.zeros((b, h // s, w // s, s * s, c), dtype=dy.dtype)
        np.put_along_axis(dwin, idx[:, :, :, None, :], dy[:, :, :, None, :], axis=3)
        dx = dwin.reshape(b, h // s, w // s, s, s, c).transpose(0, 1, 3, 2, 4, 5)
        return dx.reshape(b, h, w, c), []


class Activation(Layer):
    kind = "activation"

    def __init__(self, fn: str = "relu"):
        if fn not in ("relu", "linear"):
            raise ValueError(f"unsupported activation {fn!r}")
        self.fn = fn

    def build(self, in_shape, rng):
        return in_shape

    def spec(self):
        return {"kind": self.kind, "fn": self.fn}

    def forward(self, x, params):
        if self.fn == "relu":
            return np.maximum(x, 0)
        return x

    def forward_train(self, x, params):
        if self.fn == "relu":
            mask = x > 0
            return x * mask, mask
        return x, None

    def backward(self, dy, cache, need_dx=True):
        if self.fn == "relu":
            return dy * cache, []
        return dy, []


class Flatten(Layer):
    kind = "flatten"

    def build(self, in_shape, rng):
        return (int(np.prod(in_shape)),)

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1)

    def forward_train(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache, need_dx=True):
        return dy.reshape(cache), []


class Dense(Layer):
    kind = "dense"
    prunable = (0,)

    def __init__(self, units: int):
        self.units = units
        self.weights = None
        self.bias = None

    def build(self, in_shape, rng):
        if len(in_shape) != 1:
            raise ShapeError(f"dense expects a flat input, got shape {in_shape}")
        n = in_shape[0]
        self.weights = _he_uniform(rng, (n, self.units), n, np.float32)
        self.bias = np.zeros(self.units, dtype=np.float32)
        return (self.units,)

    def params(self):
        return [self.weights, self.bias]

    def set_params(self, values):
        self.weights, self.bias = values

    def spec(self):
        return {"kind": self.kind, "units": self.units}

    def forward(self, x, params):
        weights, bias = params
        return dense_forward(x, weights, bias)

    def forward_train(self, x, params):
        weights, bias = params
        return dense_forward(x, weights, bias), (x, weights)

    def backward(self, dy, cache, need_dx=True):
        x, weights = cache
        dx = dy @ weights.T if need_dx else None
        return dx, [x.T @ dy, dy.sum(axis=0)]


class GRULayer(Layer):
    """Consumes a (B, T, N) sequence, emits the final hidden state (B, units)."""

    kind = "gru"
    prunable = (0, 1)
    n_gates = 3

    def __init__(self, units: int):
        self.units = units
        self.w_in = None
        self.w_rec = None
        self.bias = None

    def build(self, in_shape, rng):
        if len(in_shape) != 1:
            raise ShapeError(f"{self.kind} expects flat per-frame features, got {in_shape}")
        n = in_shape[0]
        cols = self.n_gates * self.units
        self.w_in = _he_uniform(rng, (n, cols), n, np.float32)
        self.w_rec = _he_uniform(rng, (self.units, cols), self.units, np.float32)
        self.bias = np.zeros(cols, dtype=np.float32)
        return (self.units,)

    def params(self):
        return [self.w_in, self.w_rec, self.bias]

    def set_params(self, values):
        self.w_in, self.w_rec, self.bias = values

    def spec(self):
        return {"kind": self.kind, "units": self.units}

    def forward(self, x, params):
        w_in, w_rec, bias = params
        nh = self.units
        h = np.zeros((x.shape[0], nh), dtype=x.dtype)
        p = GRUParams(w_in, w_rec, bias)
        for t in range(x.shape[1]):
            h = gru_step(x[:, t, :], h, p)
        return h

    def forward_train(self, x, params):
        w_in, w_rec, bias = params
        nh = self.units
        b, steps, _ = x.shape
        h = np.zeros((b, nh), dtype=x.dtype)
        caches = []
        for t in range(steps):
            xt = x[:, t, :]
            a_in = xt @ w_in + bias
            a_rec = h @ w_rec
            u = sigmoid(a_in[:, :nh] + a_rec[:, :nh])
            r = sigmoid(a_in[:, nh:2 * nh] + a_rec[:, nh:2 * nh])
            rh = r * h
            cand = np.tanh(a_in[:, 2 * nh:] + rh @ w_rec[:, 2 * nh:])
            caches.append((xt, h, u, r, cand, rh))
            h = (1.0 - u) * h + u * cand
        return h, (caches, x.shape, (w_in, w_rec))

    def backward(self, dy, cache, need_dx=True):
        caches, x_shape, (w_in, w_rec) = cache
        nh = self.units
        dw_in = np.zeros_like(w_in)
        dw_rec = np.zeros_like(w_rec)
        dbias = np.zeros(w_in.shape[1], dtype=w_in.dtype)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dh = dy
        for t in range(len(caches) - 1, -1, -1):
            xt, h_prev, u, r, cand, rh = caches[t]
            du = dh * (cand - h_prev)
            dcand = dh * u
            dh_prev = dh * (1.0 - u)
            da_c = dcand * (1.0 - cand * cand)
            dw_in[:, 2 * nh:] += xt.T @ da_c
            dw_rec[:, 2 * nh:] += rh.T @ da_c
            dbias[2 * nh:] += da_c.sum(axis=0)
            drh = da_c @ w_rec[:, 2 * nh:].T
            dr = drh * h_prev
            dh_prev += drh * r
            da_u = du * u * (1.0 - u)
            da_r = dr * r * (1.0 - r)
            dw_in[:, :nh] += xt.T @ da_u
            dw_rec[:, :nh] += h_prev.T @ da_u
            dbias[:nh] += da_u.sum(axis=0)
            dh_prev += da_u @ w_rec[:, :nh].T
            dw_in[:, nh:2 * nh] += xt.T @ da_r
            dw_rec[:, nh:2 * nh] += h_prev.T @ da_r
            dbias[nh:2 * nh] += da_r.sum(axis=0)
            dh_prev += da_r @ w_rec[:, nh:2 * nh].T
            dx[:, t, :] = (da_u @ w_in[:, :nh].T + da_r @ w_in[:, nh:2 * nh].T
                           + da_c @ w_in[:, 2 * nh:].T)
            dh = dh_prev
        return dx, [dw_in, dw_rec, dbias]


class LSTMLayer(Layer):
    """Consumes a (B, T, N) sequence, emits the final hidden state (B, units)."""

    kind = "lstm"
    prunable = (0, 1)
    n_gates = 4

    def __init__(self, units: int):
        self.units = units
        self.w_in = None
        self.w_rec = None
        self.bias = None

    build = GRULayer.build
    params = GRULayer.params
    set_params = GRULayer.set_params
    spec = GRULayer.spec

    def forward(self, x, params):
        w_in, w_rec, bias = params
        h = np.zeros((x.shape[0], self.units), dtype=x.dtype)
        c = np.zeros_like(h)
        p = LSTMParams(w_in, w_rec, bias)
        for t in range(x.shape[1]):
            h, c = lstm_step(x[:, t, :], h, c, p)
        return h

    def forward_train(self, x, params):
        w_in, w_rec, bias = params
        nh = self.units
        b, steps, _ = x.shape
        h = np.zeros((b, nh), dtype=x.dtype)
        c = np.zeros_like(h)
        caches = []
        for t in range(steps):
            xt = x[:, t, :]
            a = xt @ w_in + h @ w_rec + bias
            gi = sigmoid(a[:, :nh])
            gf = sigmoid(a[:, nh:2 * nh])
            go = sigmoid(a[:, 2 * nh:3 * nh])
            gc = np.tanh(a[:, 3 * nh:])
            c_new = gf * c + gi * gc
            tc = np.tanh(c_new)
            caches.append((xt, h, c, gi, gf, go, gc, tc))
            h = go * tc
            c = c_new
        return h, (caches, x.shape, (w_in, w_rec))

    def backward(self, dy, cache, need_dx=True):
        caches, x_shape, (w_in, w_rec) = cache
        nh = self.units
        dw_in = np.zeros_like(w_in)
        dw_rec = np.zeros_like(w_rec)
        dbias = np.zeros(w_in.shape[1], dtype=w_in.dtype)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dh = dy
        dc = np.zeros_like(dy)
        for t in range(len(caches) - 1, -1, -1):
            xt, h_prev, c_prev, gi, gf, go, gc, tc = caches[t]
            do = dh * tc
            dtc = dh * go * (1.0 - tc * tc) + dc
            df = dtc * c_prev
            dc = dtc * gf
            di = dtc * gc
            dg = dtc * gi
            da = np.concatenate([di * gi * (1.0 - gi),
                                 df * gf * (1.0 - gf),
                                 do * go * (1.0 - go),
                                 dg * (1.0 - gc * gc)], axis=1)
            dw_in += xt.T @ da
            dw_rec += h_prev.T @ da
            dbias += da.sum(axis=0)
            dx[:, t, :] = da @ w_in.T
            dh = da @ w_rec.T
        return dx, [dw_in, dw_rec, dbias]


LAYER_KINDS = {
    cls.kind: cls
    for cls in (Conv2D, DepthwiseConv2D, PointwiseConv2D, MaxPool2D,
                Activation, Flatten, Dense, GRULayer, LSTMLayer)
}


def layer_from_spec(spec: dict) -> Layer:
    kind = spec.get("kind")
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    return LAYER_KINDS[kind](**kwargs)
