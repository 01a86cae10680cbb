from .layers import (
    Activation,
    Conv2D,
    Dense,
    DepthwiseConv2D,
    Flatten,
    GRULayer,
    GRUParams,
    LSTMLayer,
    LSTMParams,
    MaxPool2D,
    PointwiseConv2D,
    ShapeError,
    conv2d_forward,
    dense_forward,
    depthwise_conv_forward,
    gru_step,
    layer_from_spec,
    lstm_step,
    pointwise_conv_forward,
)
from .graph import (
    ModelGraph,
    NonFiniteError,
    WindowedFrames,
    build_model,
    build_named_model,
    builtin_model_configs,
    load_model_configs,
    model_forward,
    param_count,
    sliding_windows,
    window_index_matrix,
)
from .container import ContainerError, dump_bytes, load_bytes, load_model, save_model, verify_crc
from .train import (
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    evaluate_loss,
    predict_batched,
    train_adam,
)
from .gradcheck import grad_check

__all__ = [
    "Activation", "Conv2D", "Dense", "DepthwiseConv2D", "Flatten", "GRULayer",
    "GRUParams", "LSTMLayer", "LSTMParams", "MaxPool2D", "PointwiseConv2D",
    "ShapeError", "conv2d_forward", "dense_forward", "depthwise_conv_forward",
    "gru_step", "layer_from_spec", "lstm_step", "pointwise_conv_forward",
    "ModelGraph", "NonFiniteError", "WindowedFrames", "build_model",
    "build_named_model", "builtin_model_configs", "load_model_configs",
    "model_forward", "param_count", "sliding_windows", "window_index_matrix",
    "ContainerError", "dump_bytes", "load_bytes", "load_model", "save_model",
    "verify_crc", "TrainConfig", "TrainResult", "TrainingDiverged",
    "evaluate_loss", "predict_batched", "train_adam", "grad_check",
]
