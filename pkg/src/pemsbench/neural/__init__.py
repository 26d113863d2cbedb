"""Minimal neural networks with hand-written backpropagation."""

from .layers import (
    dense_backward,
    dense_forward,
    gru_backward,
    gru_cell,
    gru_forward,
    lstm_backward,
    lstm_cell,
    lstm_forward,
)
from .network import (
    LayerSpec,
    NetSpec,
    TrainConfig,
    TrainedNet,
    load_net,
    mlp_spec,
    predict_net,
    recurrent_spec,
    save_net,
    train_net,
)
from .optim import AdamState, adam_step, clip_by_global_norm

__all__ = [
    "AdamState",
    "LayerSpec",
    "NetSpec",
    "TrainConfig",
    "TrainedNet",
    "adam_step",
    "clip_by_global_norm",
    "dense_backward",
    "dense_forward",
    "gru_backward",
    "gru_cell",
    "gru_forward",
    "load_net",
    "lstm_backward",
    "lstm_cell",
    "lstm_forward",
    "mlp_spec",
    "predict_net",
    "recurrent_spec",
    "save_net",
    "train_net",
]
