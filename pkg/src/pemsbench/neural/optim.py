"""Adaptive-moment (Adam) optimizer and gradient clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Params = list[dict[str, np.ndarray]]


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=list)
    v: Params = field(default_factory=list)

    @classmethod
    def like(cls, params: Params, **kw) -> "AdamState":
        zeros = [{k: np.zeros_like(a) for k, a in layer.items()} for layer in params]
        return cls(m=zeros, v=[{k: np.zeros_like(a) for k, a in layer.items()} for layer in params], **kw)


def adam_step(params: Params, grads: Params, state: AdamState, lr: float) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update, applied in place; returns ``(params, state)``."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        for k, w in p.items():
            gk = g[k]
            m[k] *= b1
            m[k] += (1.0 - b1) * gk
            v[k] *= b2
            v[k] += (1.0 - b2) * gk * gk
            w -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + state.eps)
    return params, state


def global_norm(grads: Params) -> float:
    return math.sqrt(sum(float(np.vdot(g, g)) for layer in grads for g in layer.values()))


def clip_by_global_norm(grads: Params, max_norm: float) -> float:
    """Rescale ``grads`` in place so their joint L2 norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for layer in grads:
            for g in layer.values():
                g *= scale
    return norm
