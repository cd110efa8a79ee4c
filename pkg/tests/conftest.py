"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from policyscope.model_io import FrozenModel, ModelMeta, random_model
from policyscope.network import C51Params, HeadKind, NetworkSpec


def naive_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    """Quadruple-loop reference convolution (valid padding), float64."""
    c, h, wd = x.shape
    o, _c, k, _k = w.shape
    ho = (h - k) // stride + 1
    wo = (wd - k) // stride + 1
    out = np.zeros((o, ho, wo), dtype=np.float64)
    for oc in range(o):
        for y in range(ho):
            for xx in range(wo):
                acc = float(b[oc])
                for ic in range(c):
                    for i in range(k):
                        for j in range(k):
                            acc += float(w[oc, ic, i, j]) * float(x[ic, y * stride + i, xx * stride + j])
                out[oc, y, xx] = acc
    return out


def naive_fc(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, n = w.shape
    out = np.zeros(m, dtype=np.float64)
    for i in range(m):
        acc = float(b[i])
        for j in range(n):
            acc += float(w[i, j]) * float(x[j])
        out[i] = acc
    return out


def fd_gradient(f, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central finite differences of a scalar function over every coordinate
    of x (x must be float64 and is restored afterwards)."""
    assert x.dtype == np.float64
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_error(analytic: np.ndarray, reference: np.ndarray, floor: float = 1e-6) -> float:
    """Max relative error over coordinates where the reference is
    meaningfully nonzero."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    r = np.asarray(reference, dtype=np.float64).ravel()
    mask = np.abs(r) > floor
    if not mask.any():
        return 0.0
    denom = np.maximum(np.abs(a[mask]), np.abs(r[mask]))
    return float(np.max(np.abs(a[mask] - r[mask]) / denom))


def tiny_spec(head: HeadKind = HeadKind.Q, n_actions: int = 3) -> NetworkSpec:
    """A reduced-size architecture for gradient and oracle tests."""
    c51 = C51Params(n_atoms=5, v_min=-2.0, v_max=2.0) if head is HeadKind.C51 else None
    return NetworkSpec(
        n_actions=n_actions,
        head=head,
        conv_layers=((3, 3, 2), (4, 3, 1)),
        fc_width=8,
        c51=c51,
        in_channels=4,
        input_hw=(9, 9),
    )


def tiny_model(head: HeadKind = HeadKind.Q, seed: int = 0, dtype=np.float64) -> FrozenModel:
    return random_model(tiny_spec(head), seed=seed, dtype=dtype, bias_scale=0.05)


def texture_frame(kind: str, rng: np.random.Generator) -> np.ndarray:
    """Deterministic 84x84 texture generator: horizontal stripes or a
    checkerboard, with seeded phase and pixel noise so every frame is
    distinct."""
    if kind == "stripes":
        phase = int(rng.integers(0, 8))
        rows = (np.arange(84)[:, None] + phase) % 8 < 4
        base = np.where(rows, 0.8, 0.2) * np.ones((84, 84))
    elif kind == "checker":
        phase = int(rng.integers(0, 2))
        yy, xx = np.meshgrid(np.arange(84) // 6, np.arange(84) // 6, indexing="ij")
        base = np.where((yy + xx + phase) % 2 == 0, 0.8, 0.2)
    elif kind == "flat":
        base = np.full((84, 84), float(rng.uniform(0, 1)))
    else:
        raise ValueError(kind)
    noisy = base + rng.normal(0.0, 0.05, size=(84, 84))
    return np.clip(noisy, 0.0, 1.0).astype(np.float32)


def texture_rollout(algorithm: str, run_id: str, n: int, kind: str, seed: int):
    """A synthetic rollout whose present channel carries a texture class."""
    from policyscope.model_io import ModelMeta
    from policyscope.rollout import Rollout, RolloutMeta, StepRecord

    rng = np.random.Generator(np.random.PCG64(seed))
    steps = []
    for _ in range(n):
        obs = np.zeros((4, 84, 84), np.float32)
        obs[3] = texture_frame(kind, rng)
        steps.append(
            StepRecord(
                frame=np.zeros((210, 160, 3), np.uint8), obs=obs, ram=np.zeros(128, np.uint8),
                action=0, reward=0.0, score=0.0, done=False,
            )
        )
    return Rollout(meta=RolloutMeta(ModelMeta(algorithm=algorithm, run_id=run_id), "synthetic", seed, "greedy"), steps=steps)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def default_meta():
    return ModelMeta(game="toy-catch", algorithm="DQN", run_id="run0")
