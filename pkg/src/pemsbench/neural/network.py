"""Stacked networks, training loop and weight serialization.

A network is an ordered list of layers. Recurrent layers must come first;
every recurrent layer but the last emits its full hidden sequence and the
last emits only its final hidden state, which feeds the dense head.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import layers as L
from .optim import AdamState, adam_step, clip_by_global_norm

RECURRENT = ("lstm", "gru")


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "dense", "lstm" or "gru"
    width: int
    activation: str = "linear"

    def __post_init__(self) -> None:
        if self.kind not in ("dense", *RECURRENT):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.width < 1:
            raise ValueError("layer width must be >= 1")
        if self.activation not in L.ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class NetSpec:
    n_inputs: int
    layers: tuple[LayerSpec, ...]
    seed: int = 0
    loss: str = "mse"

    def __post_init__(self) -> None:
        kinds = [layer.kind for layer in self.layers]
        if not kinds:
            raise ValueError("network has no layers")
        n_rec = sum(k in RECURRENT for k in kinds)
        if any(k in RECURRENT for k in kinds[n_rec:]):
            raise ValueError("recurrent layers must precede dense layers")
        if self.layers[-1].kind != "dense":
            raise ValueError("the output layer must be dense")

    @property
    def is_recurrent(self) -> bool:
        return self.layers[0].kind in RECURRENT

    def to_dict(self) -> dict:
        return {"n_inputs": self.n_inputs, "layers": [asdict(l) for l in self.layers], "seed": self.seed, "loss": self.loss}

    @classmethod
    def from_dict(cls, d: dict) -> "NetSpec":
        return cls(int(d["n_inputs"]), tuple(LayerSpec(**l) for l in d["layers"]), int(d["seed"]), d.get("loss", "mse"))


def mlp_spec(n_inputs: int, seed: int = 0, widths=(256, 128, 64, 32)) -> NetSpec:
    """ReLU dense stack followed by one linear output unit."""
    body = tuple(LayerSpec("dense", w, "relu") for w in widths)
    return NetSpec(n_inputs, body + (LayerSpec("dense", 1, "linear"),), seed)


def recurrent_spec(kind: str, n_inputs: int, seed: int = 0, recurrent=(64, 32), dense=(128, 64, 32)) -> NetSpec:
    """Stacked ``kind`` cells, a ReLU dense head and one linear output unit."""
    rec = tuple(LayerSpec(kind, w, "tanh") for w in recurrent)
    head = tuple(LayerSpec("dense", w, "relu") for w in dense)
    return NetSpec(n_inputs, rec + head + (LayerSpec("dense", 1, "linear"),), seed)


@dataclass(frozen=True)
class TrainConfig:
    num_epochs: int = 100
    learning_rate: float = 0.01
    batch_size: int = 64
    seed: int = 0
    clip_norm: float | None = 5.0  # applied to recurrent nets only
    dtype: str = "float64"

    def __post_init__(self) -> None:
        if self.num_epochs < 0:
            raise ValueError("num_epochs must be >= 0")
        if not self.learning_rate > 0 or self.batch_size < 1:
            raise ValueError("learning_rate and batch_size must be positive")


def init_params(spec: NetSpec, dtype=np.float64) -> list[dict[str, np.ndarray]]:
    """Seeded uniform initialisation scaled by fan-in.

    Dense ReLU layers use ``U(+-sqrt(6/fan_in))``, other dense layers
    ``U(+-sqrt(3/fan_in))``; recurrent matrices use ``U(+-1/sqrt(width))``.
    LSTM forget-gate biases start at 1.
    """
    rng = np.random.default_rng(spec.seed)
    params = []
    fan_in = spec.n_inputs
    for layer in spec.layers:
        H = layer.width
        if layer.kind == "dense":
            lim = math.sqrt((6.0 if layer.activation == "relu" else 3.0) / fan_in)
            p = {"W": rng.uniform(-lim, lim, size=(fan_in, H)), "b": np.zeros(H)}
        else:
            G = 4 * H if layer.kind == "lstm" else 3 * H
            lim = 1.0 / math.sqrt(H)
            p = {
                "Wx": rng.uniform(-lim, lim, size=(fan_in, G)),
                "Wh": rng.uniform(-lim, lim, size=(H, G)),
                "b": np.zeros(G),
            }
            if layer.kind == "lstm":
                p["b"][H : 2 * H] = 1.0
        params.append({k: v.astype(dtype) for k, v in p.items()})
        fan_in = H
    return params


def forward(spec: NetSpec, params, x: np.ndarray):
    """Network output of shape ``(N,)`` and the per-layer caches."""
    caches = []
    h = x
    n_rec = sum(l.kind in RECURRENT for l in spec.layers)
    for k, (layer, p) in enumerate(zip(spec.layers, params)):
        if layer.kind == "dense":
            h, c = L.dense_forward(p["W"], p["b"], h, layer.activation)
        elif layer.kind == "lstm":
            h, c = L.lstm_forward(h, p, return_sequences=k < n_rec - 1)
        else:
            h, c = L.gru_forward(h, p, return_sequences=k < n_rec - 1)
        caches.append(c)
    return h[:, 0], caches


def backward(spec: NetSpec, params, caches, dout: np.ndarray):
    """Parameter gradients given ``d loss / d output`` of shape ``(N,)``."""
    grads: list[dict] = [None] * len(params)  # type: ignore[list-item]
    d = dout[:, None]
    for k in range(len(params) - 1, -1, -1):
        layer, p, c = spec.layers[k], params[k], caches[k]
        if layer.kind == "dense":
            d, grads[k] = L.dense_backward(d, c, p["W"])
        elif layer.kind == "lstm":
            d, grads[k] = L.lstm_backward(d, c, p)
        else:
            d, grads[k] = L.gru_backward(d, c, p)
    return grads


def mse_loss(pred: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    diff = pred - y
    return float(np.mean(diff * diff)), (2.0 / diff.shape[0]) * diff


@dataclass(frozen=True)
class TrainedNet:
    spec: NetSpec
    params: tuple[dict[str, np.ndarray], ...]
    history: tuple[float, ...] = ()
    config: TrainConfig = field(default_factory=TrainConfig)

    def predict(self, X, batch_size: int = 4096) -> np.ndarray:
        return predict_net(self, X, batch_size)


def _check_input(spec: NetSpec, X: np.ndarray) -> None:
    want = 3 if spec.is_recurrent else 2
    if X.ndim != want or X.shape[-1] != spec.n_inputs:
        raise ValueError(f"network expects {want}-D input with {spec.n_inputs} features, got shape {X.shape}")


def train_net(spec: NetSpec, X, y, cfg: TrainConfig = TrainConfig()) -> TrainedNet:
    """Mini-batch Adam on mean squared error.

    Rows are reshuffled each epoch from a generator seeded by ``cfg.seed``;
    the per-epoch history is the sample-weighted mean batch loss.
    Recurrent nets have their gradients clipped to ``cfg.clip_norm``.
    """
    dtype = np.dtype(cfg.dtype)
    X = np.asarray(X, dtype=dtype)
    y = np.asarray(y, dtype=dtype).ravel()
    _check_input(spec, X)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y have different lengths")
    params = init_params(spec, dtype)
    state = AdamState.like(params)
    rng = np.random.default_rng(cfg.seed)
    clip = cfg.clip_norm if spec.is_recurrent else None
    n = X.shape[0]
    history = []
    for _ in range(cfg.num_epochs):
        perm = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = perm[s : s + cfg.batch_size]
            pred, caches = forward(spec, params, X[idx])
            loss, dout = mse_loss(pred, y[idx])
            grads = backward(spec, params, caches, dout)
            if clip is not None:
                clip_by_global_norm(grads, clip)
            adam_step(params, grads, state, cfg.learning_rate)
            total += loss * idx.shape[0]
        history.append(total / n)
    for p in params:
        for a in p.values():
            a.setflags(write=False)
    return TrainedNet(spec, tuple(params), tuple(history), cfg)


def predict_net(net: TrainedNet, X, batch_size: int = 4096) -> np.ndarray:
    dtype = net.params[0][next(iter(net.params[0]))].dtype
    X = np.asarray(X, dtype=dtype)
    _check_input(net.spec, X)
    out = np.empty(X.shape[0], dtype=np.float64)
    for s in range(0, X.shape[0], batch_size):
        out[s : s + batch_size] = forward(net.spec, net.params, X[s : s + batch_size])[0]
    return out


# ---------------------------------------------------------------------------
# serialization
#
# Layout (little endian):
#   8 bytes  magic b"PEMSNET1"
#   uint32   length of the UTF-8 JSON header, then the header itself
#            {"spec": ..., "config": ..., "history": [...], "tensors": [[layer, name], ...]}
#   per tensor, in header order:
#     uint32 ndim, ndim x uint64 dims, prod(dims) float64 values (row-major)

MAGIC = b"PEMSNET1"


def save_net(net: TrainedNet, path: str | Path) -> None:
    names = [(k, name) for k, p in enumerate(net.params) for name in sorted(p)]
    header = {
        "spec": net.spec.to_dict(),
        "config": asdict(net.config),
        "history": list(net.history),
        "tensors": names,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for k, name in names:
            a = np.ascontiguousarray(net.params[k][name], dtype="<f8")
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
            fh.write(a.tobytes(order="C"))


def load_net(path: str | Path) -> TrainedNet:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a serialized network")
    (hlen,) = struct.unpack_from("<I", raw, 8)
    pos = 12 + hlen
    header = json.loads(raw[12:pos].decode("utf-8"))
    spec = NetSpec.from_dict(header["spec"])
    cfg = TrainConfig(**header["config"])
    params: list[dict[str, np.ndarray]] = [{} for _ in spec.layers]
    for k, name in header["tensors"]:
        (ndim,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        dims = struct.unpack_from(f"<{ndim}Q", raw, pos)
        pos += 8 * ndim
        count = int(np.prod(dims)) if ndim else 1
        a = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(dims).astype(cfg.dtype)
        pos += 8 * count
        a.setflags(write=False)
        params[k][name] = a
    return TrainedNet(spec, tuple(params), tuple(header["history"]), cfg)


def history_csv(net: TrainedNet) -> str:
    lines = ["epoch,train_mse"]
    lines += [f"{e + 1},{loss!r}" for e, loss in enumerate(net.history)]
    return "\n".join(lines) + "\n"
