"""Central finite-difference validation of every backward pass.

The difference quotient is evaluated in float64 (values start from a seeded
draw, as in training) so the check measures the analytic gradient, not
round-off. Relative error uses |a - n| / max(|a|, |n|, 1e-6).
"""

from __future__ import annotations

import numpy as np

from . import layers as L

_DEFAULT_SHAPES = {
    "dense": {"batch": 3, "features": 5, "units": 4},
    "conv2d": {"batch": 2, "h": 6, "w": 6, "c": 2, "filters": 3,
               "kh": 3, "kw": 3, "stride": 1, "padding": "valid"},
    "depthwise_conv": {"batch": 2, "h": 6, "w": 6, "c": 3,
                       "kh": 3, "kw": 3, "stride": 1, "padding": "valid"},
    "pointwise_conv": {"batch": 2, "h": 4, "w": 4, "c": 3, "filters": 2},
    "max_pool": {"batch": 2, "h": 6, "w": 6, "c": 2, "size": 2},
    "activation": {"batch": 3, "h": 4, "w": 4, "c": 2, "fn": "relu"},
    "gru": {"batch": 3, "steps": 4, "features": 5, "units": 4},
    "lstm": {"batch": 3, "steps": 4, "features": 5, "units": 4},
}


def _make_layer(kind: str, s: dict):
    if kind == "dense":
        return L.Dense(s["units"]), (s["batch"], s["features"])
    if kind == "conv2d":
        return (L.Conv2D(s["filters"], s["kh"], s["kw"], s["stride"], s["padding"]),
                (s["batch"], s["h"], s["w"], s["c"]))
    if kind == "depthwise_conv":
        return (L.DepthwiseConv2D(s["kh"], s["kw"], s["stride"], s["padding"]),
                (s["batch"], s["h"], s["w"], s["c"]))
    if kind == "pointwise_conv":
        return L.PointwiseConv2D(s["filters"]), (s["batch"], s["h"], s["w"], s["c"])
    if kind == "max_pool":
        return L.MaxPool2D(s["size"]), (s["batch"], s["h"], s["w"], s["c"])
    if kind == "activation":
        return L.Activation(s["fn"]), (s["batch"], s["h"], s["w"], s["c"])
    if kind == "gru":
        return L.GRULayer(s["units"]), (s["batch"], s["steps"], s["features"])
    if kind == "lstm":
        return L.LSTMLayer(s["units"]), (s["batch"], s["steps"], s["features"])
    raise ValueError(f"no gradient check for layer kind {kind!r}")


def grad_check(layer_kind: str, shapes: dict | None = None,
               eps: float = 1e-5, seed: int = 0) -> float:
    """Return the max relative error between analytic and numeric gradients."""
    s = dict(_DEFAULT_SHAPES[layer_kind])
    if shapes:
        s.update(shapes)
    layer, x_shape = _make_layer(layer_kind, s)
    rng = np.random.default_rng(seed)
    build_shape = (x_shape[-1],) if layer_kind in ("gru", "lstm", "dense") else x_shape[1:]
    layer.build(build_shape, rng)
    params = [p.astype(np.float64) for p in layer.params()]
    # non-zero biases exercise every term in the backward pass
    for p in params:
        p += rng.normal(scale=0.1, size=p.shape)
    layer.set_params(params)
    x = rng.normal(size=x_shape)
    dy_proj = rng.normal(size=layer.forward(x, params).shape)

    def loss(xv):
        return float(np.sum(layer.forward(xv, layer.params()) * dy_proj))

    out, cache = layer.forward_train(x, params)
    dx, dparams = layer.backward(dy_proj, cache)

    worst = 0.0

    def compare(analytic, numeric):
        nonlocal worst
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, rel)

    flat_x = x.ravel()
    dx_flat = dx.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + eps
        up = loss(x)
        flat_x[i] = orig - eps
        down = loss(x)
        flat_x[i] = orig
        compare(dx_flat[i], (up - down) / (2.0 * eps))

    for arr, grad in zip(params, dparams):
        flat = arr.ravel()
        gflat = grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss(x)
            flat[i] = orig - eps
            down = loss(x)
            flat[i] = orig
            compare(gflat[i], (up - down) / (2.0 * eps))
    return worst
