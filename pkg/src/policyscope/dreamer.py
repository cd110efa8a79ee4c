"""Synthesizing observations that maximize chosen network responses.

Gradient ascent from uniform noise, with per-iteration circular-shift
jitter (to discourage pixel-exact adversarial textures), optional total
variation and L1 penalties, and clipping to the valid observation range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model_io import FrozenModel
from .network import Objective, input_gradient, objective_value


@dataclass(frozen=True)
class DreamConfig:
    iterations: int = 512
    step_size: float = 0.05
    jitter_max: int = 4
    lambda_tv: float = 0.0
    lambda_l1: float = 0.0
    seed: int = 0
    clip: tuple[float, float] = (0.0, 1.0)
    optimizer: str = "adam"  # or "sgd"

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if min(self.step_size, self.jitter_max, self.lambda_tv, self.lambda_l1) < 0:
            raise ConfigError("dream parameters must be nonnegative")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


def total_variation(x: np.ndarray) -> float:
    """Anisotropic L1 total variation, summed over channels."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    dv = np.abs(np.diff(x, axis=1)).sum()
    dh = np.abs(np.diff(x, axis=2)).sum()
    return float(dv + dh)


def tv_gradient(x: np.ndarray) -> np.ndarray:
    """Subgradient of `total_variation` (sign of each finite difference,
    scattered back to both endpoints)."""
    x64 = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x64)
    sv = np.sign(np.diff(x64, axis=1))
    g[:, 1:, :] += sv
    g[:, :-1, :] -= sv
    sh = np.sign(np.diff(x64, axis=2))
    g[:, :, 1:] += sh
    g[:, :, :-1] -= sh
    return g.astype(x.dtype, copy=False)


def synthesize(model: FrozenModel, objective: Objective, config: DreamConfig = DreamConfig()):
    """Gradient-ascend an input for the objective. Returns the synthesized
    observation and the per-iteration objective history (length
    iterations+1, starting at the noise initialization)."""
    objective.validate(model.spec)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    shape = (model.spec.in_channels, *model.spec.input_hw)
    x = rng.uniform(0.4, 0.6, size=shape).astype(np.float32)
    lo, hi = config.clip

    m = np.zeros(shape, dtype=np.float64)
    v = np.zeros(shape, dtype=np.float64)
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    history = [objective_value(model, x, objective)]
    for t in range(1, config.iterations + 1):
        if config.jitter_max > 0:
            dy, dx = rng.integers(-config.jitter_max, config.jitter_max + 1, size=2)
        else:
            dy = dx = 0
        xj = np.roll(x, (dy, dx), axis=(1, 2))
        g = input_gradient(model, xj, objective).astype(np.float64)
        if config.lambda_tv > 0:
            g -= config.lambda_tv * tv_gradient(xj)
        if config.lambda_l1 > 0:
            g -= config.lambda_l1 * np.sign(xj)
        g = np.roll(g, (-dy, -dx), axis=(1, 2))

        if config.optimizer == "adam":
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g * g
            mhat = m / (1 - beta1**t)
            vhat = v / (1 - beta2**t)
            step = config.step_size * mhat / (np.sqrt(vhat) + eps)
        else:
            step = config.step_size * g
        x = np.clip(x + step.astype(np.float32), lo, hi).astype(np.float32)
        history.append(objective_value(model, x, objective))
    return x, history


def dream_strip(x: np.ndarray, scale: int = 2, pad: int = 2) -> np.ndarray:
    """The synthesized channels laid out oldest to newest as one horizontal
    grayscale strip."""
    c, h, w = x.shape
    strip = np.full((h * scale + 2 * pad, c * (w * scale + pad) + pad), 16, dtype=np.uint8)
    for i in range(c):
        tile = np.round(np.clip(x[i], 0, 1) * 255).astype(np.uint8)
        tile = np.kron(tile, np.ones((scale, scale), dtype=np.uint8))
        x0 = pad + i * (w * scale + pad)
        strip[pad : pad + tile.shape[0], x0 : x0 + tile.shape[1]] = tile
    return strip
