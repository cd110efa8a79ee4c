"""Supervised-training machinery: feed-forward nets, loss gradients, Adam.

Only the frame classifier trains anything in this toolkit; policy networks
stay frozen. The net here is a plain conv/fc stack with ReLU between layers
and raw logits at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError


@dataclass
class FeedForwardNet:
    """Conv layers then fc layers, ReLU everywhere except after the last.

    ``conv_layers`` entries are (out_channels, kernel, stride); ``fc_widths``
    ends with the number of classes.
    """

    input_shape: tuple[int, int, int]
    conv_layers: tuple[tuple[int, int, int], ...]
    fc_widths: tuple[int, ...]
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def initialize(
        input_shape: tuple[int, int, int],
        conv_layers,
        fc_widths,
        seed: int = 0,
        dtype=np.float32,
    ) -> "FeedForwardNet":
        rng = np.random.Generator(np.random.PCG64(seed))
        net = FeedForwardNet(tuple(input_shape), tuple(map(tuple, conv_layers)), tuple(fc_widths))
        c, h, w = input_shape
        for i, (o, k, s) in enumerate(net.conv_layers, start=1):
            net.params[f"conv{i}.w"] = rng.normal(0, np.sqrt(2.0 / (c * k * k)), (o, c, k, k)).astype(dtype)
            net.params[f"conv{i}.b"] = np.zeros(o, dtype=dtype)
            h = ops.conv_output_size(h, k, s)
            w = ops.conv_output_size(w, k, s)
            c = o
        d = c * h * w
        for i, m in enumerate(net.fc_widths, start=1):
            net.params[f"fc{i}.w"] = rng.normal(0, np.sqrt(2.0 / d), (m, d)).astype(dtype)
            net.params[f"fc{i}.b"] = np.zeros(m, dtype=dtype)
            d = m
        return net

    @property
    def n_classes(self) -> int:
        return self.fc_widths[-1]

    def _forward(self, x: np.ndarray):
        conv_pre, conv_caches = [], []
        h = x
        for i, (_o, _k, s) in enumerate(self.conv_layers, start=1):
            pre, cc = ops.conv2d_forward_batch(h, self.params[f"conv{i}.w"], self.params[f"conv{i}.b"], s)
            conv_pre.append(pre)
            conv_caches.append(cc)
            h = ops.relu(pre)
        flat = h.reshape(h.shape[0], -1)
        fc_pre, fc_caches = [], []
        h = flat
        for i in range(1, len(self.fc_widths) + 1):
            pre, fcc = ops.fc_forward_batch(h, self.params[f"fc{i}.w"], self.params[f"fc{i}.b"])
            fc_pre.append(pre)
            fc_caches.append(fcc)
            h = pre if i == len(self.fc_widths) else ops.relu(pre)
        return h, (conv_pre, conv_caches, flat, fc_pre, fc_caches)

    def logits(self, x: np.ndarray) -> np.ndarray:
        out, _ = self._forward(x)
        return out

    def clone_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of integer labels under softmax(logits)."""
    n = logits.shape[0]
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(n), labels].mean())


def param_gradient(net: FeedForwardNet, batch: np.ndarray, labels: np.ndarray):
    """Gradients of the mean cross-entropy over the batch with respect to
    every parameter. Returns (loss, grads) with grads keyed like params."""
    if batch.shape[0] == 0:
        raise ShapeError("batch must be nonempty")
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= net.n_classes:
        raise ConfigError(f"label out of range [0, {net.n_classes})")
    logits, (conv_pre, conv_caches, flat, fc_pre, fc_caches) = net._forward(batch)
    n = batch.shape[0]
    p = ops.softmax(logits.astype(np.float64))
    loss = cross_entropy(logits, labels)
    dlogits = p.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits = (dlogits / n).astype(batch.dtype)

    grads: dict[str, np.ndarray] = {}
    dh = dlogits
    for i in range(len(net.fc_widths), 0, -1):
        dx, dw, db = ops.fc_backward_batch(dh, fc_caches[i - 1])
        grads[f"fc{i}.w"] = dw
        grads[f"fc{i}.b"] = db
        dh = dx if i == 1 else ops.relu_backward(dx, fc_pre[i - 2])
    if not net.conv_layers:
        return loss, grads
    dh = dh.reshape(conv_pre[-1].shape) * (conv_pre[-1] > 0)
    for i in range(len(net.conv_layers), 0, -1):
        dx, dw, db = ops.conv2d_backward_batch(dh, conv_caches[i - 1])
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db
        if i > 1:
            dh = ops.relu_backward(dx, conv_pre[i - 2])
    return loss, grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place Adam descent update. Optimizer state is single-owner."""
    state.t += 1
    t = state.t
    for k, g in grads.items():
        g64 = g.astype(np.float64)
        m = state.m.get(k)
        if m is None:
            m = np.zeros_like(g64)
            state.m[k] = m
            state.v[k] = np.zeros_like(g64)
        v = state.v[k]
        m *= beta1
        m += (1 - beta1) * g64
        v *= beta2
        v += (1 - beta2) * g64 * g64
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        params[k] = (params[k] - lr * mhat / (np.sqrt(vhat) + eps)).astype(params[k].dtype)
