"""Observation- and parameter-noise degradation sweeps.

Scores are averaged over seeded episodes; every random stream (environment
seeds, noise draws, random play) derives deterministically from the sweep
seed, so curves are exactly reproducible and the sigma=0 entry coincides
with the noiseless baseline bit for bit.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateInputError
from .model_io import FrozenModel, perturb_conv_weights
from .network import forward_with_trace
from .preprocessing import FrameStacker, grayscale_downsample

ALGORITHM_BEST = "algorithm_best"
OVERALL_BEST = "overall_best"

DEFAULT_OBS_SIGMAS = (0.0, 0.05, 0.1, 0.2, 0.4, 0.8)
DEFAULT_PARAM_SIGMAS = (0.0, 0.005, 0.01, 0.02, 0.05, 0.1)

_MAX_EPISODE_STEPS = 100_000


def _rng(*keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(keys))))


@dataclass
class SweepCurve:
    label: str
    sigmas: tuple[float, ...]
    mean_scores: tuple[float, ...]
    std_scores: tuple[float, ...]
    episodes: int
    seed: int

    def baseline(self) -> float:
        return self.mean_scores[0]


@dataclass
class NormalizedCurves:
    mode: str
    random_baseline: float
    labels: list[str] = field(default_factory=list)
    sigmas: list[tuple[float, ...]] = field(default_factory=list)
    values: list[tuple[float, ...]] = field(default_factory=list)
    exclusions: list[dict] = field(default_factory=list)


def _check_sigmas(sigmas) -> tuple[float, ...]:
    sigmas = tuple(float(s) for s in sigmas)
    if not sigmas or sigmas[0] != 0.0:
        raise ConfigError("sigma schedule must start at 0")
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ConfigError("sigma schedule must be strictly ascending")
    return sigmas


def _run_episode(model: FrozenModel | None, env, env_seed: int, obs_sigma: float = 0.0,
                 noise_rng: np.random.Generator | None = None,
                 action_rng: np.random.Generator | None = None) -> float:
    """One greedy episode; final cumulative score. With ``action_rng`` set
    the policy is uniform random play instead of the model."""
    frame, _ram = env.reset(env_seed)
    stacker = FrameStacker()
    obs = stacker.push(grayscale_downsample(frame))
    score = 0.0
    for _ in range(_MAX_EPISODE_STEPS):
        if action_rng is not None:
            action = int(action_rng.integers(0, env.n_actions))
        else:
            x = obs
            if obs_sigma > 0.0:
                x = np.clip(obs + noise_rng.normal(0.0, obs_sigma, obs.shape), 0.0, 1.0).astype(np.float32)
            action = forward_with_trace(model, x).chosen_action
        frame, _ram, reward, done = env.step(action)
        score += reward
        if done:
            return score
        obs = stacker.push(grayscale_downsample(frame))
    raise ConfigError("episode exceeded the step safety limit without terminating")


def eval_score(model: FrozenModel, env_factory, episodes: int, seed: int) -> float:
    """Mean final score of the greedy policy over seeded episodes."""
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    scores = [_run_episode(model, env_factory(), int(_rng(seed, ep).integers(2**31))) for ep in range(episodes)]
    return float(np.mean(scores))


def random_play_baseline(env_factory, episodes: int, seed: int) -> float:
    """Mean final score of uniform-random play over seeded episodes."""
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    scores = []
    for ep in range(episodes):
        env_seed = int(_rng(seed, ep).integers(2**31))
        scores.append(_run_episode(None, env_factory(), env_seed, action_rng=_rng(seed, ep, 101)))
    return float(np.mean(scores))


def observation_noise_sweep(model: FrozenModel, env_factory, sigmas=DEFAULT_OBS_SIGMAS,
                            episodes: int = 5, seed: int = 0, label: str | None = None) -> SweepCurve:
    """Score degradation as clipped Gaussian noise is added to every
    observation. The model itself is never modified."""
    sigmas = _check_sigmas(sigmas)
    means, stds = [], []
    for si, sigma in enumerate(sigmas):
        scores = []
        for ep in range(episodes):
            env_seed = int(_rng(seed, ep).integers(2**31))
            scores.append(_run_episode(model, env_factory(), env_seed, obs_sigma=sigma,
                                       noise_rng=_rng(seed, si, ep, 7)))
        means.append(float(np.mean(scores)))
        stds.append(float(np.std(scores)))
    return SweepCurve(label or model.label(), sigmas, tuple(means), tuple(stds), episodes, seed)


def parameter_noise_sweep(model: FrozenModel, env_factory, sigmas=DEFAULT_PARAM_SIGMAS,
                          episodes: int = 5, seed: int = 0, label: str | None = None) -> SweepCurve:
    """Score degradation as the convolutional weights (only) are perturbed
    with Gaussian noise, freshly drawn per episode on a copy of the model."""
    sigmas = _check_sigmas(sigmas)
    means, stds = [], []
    for si, sigma in enumerate(sigmas):
        scores = []
        for ep in range(episodes):
            env_seed = int(_rng(seed, ep).integers(2**31))
            noised = model if sigma == 0.0 else perturb_conv_weights(model, sigma, _rng(seed, si, ep, 11))
            scores.append(_run_episode(noised, env_factory(), env_seed))
        means.append(float(np.mean(scores)))
        stds.append(float(np.std(scores)))
    return SweepCurve(label or model.label(), sigmas, tuple(means), tuple(stds), episodes, seed)


def normalize_curves(curves: list[SweepCurve], random_baseline: float, mode: str) -> NormalizedCurves:
    """Rescale raw curves so random play maps to 0.

    ``algorithm_best`` anchors each curve's own noiseless score at 1 and
    excludes curves whose baseline does not beat random play;
    ``overall_best`` anchors the best noiseless score across curves.
    """
    if mode not in (ALGORITHM_BEST, OVERALL_BEST):
        raise ConfigError(f"unknown normalization mode: {mode!r}")
    out = NormalizedCurves(mode=mode, random_baseline=float(random_baseline))
    r = float(random_baseline)
    if mode == OVERALL_BEST:
        b_all = max(c.baseline() for c in curves)
        if b_all - r <= 0:
            raise DegenerateInputError("no curve beats random play; overall-best normalization undefined")
        for c in curves:
            out.labels.append(c.label)
            out.sigmas.append(c.sigmas)
            out.values.append(tuple((s - r) / (b_all - r) for s in c.mean_scores))
        return out
    for c in curves:
        b = c.baseline()
        if b - r <= 0:
            out.exclusions.append(
                {"label": c.label, "baseline": b, "random_baseline": r,
                 "reason": "baseline does not exceed random play"}
            )
            continue
        out.labels.append(c.label)
        out.sigmas.append(c.sigmas)
        out.values.append(tuple((s - r) / (b - r) for s in c.mean_scores))
    return out


def curves_to_csv(curves: list[SweepCurve]) -> str:
    buf = io.StringIO()
    buf.write("label,sigma,mean,stddev,n\n")
    for c in curves:
        for sigma, mean, std in zip(c.sigmas, c.mean_scores, c.std_scores):
            buf.write(f"{c.label},{sigma!r},{mean!r},{std!r},{c.episodes}\n")
    return buf.getvalue()


def report_json(curves: list[SweepCurve], random_baseline: float) -> str:
    """Full JSON report: raw curves plus both normalizations and any
    exclusion records."""
    payload = {
        "random_baseline": random_baseline,
        "curves": [
            {"label": c.label, "sigmas": list(c.sigmas), "mean_scores": list(c.mean_scores),
             "std_scores": list(c.std_scores), "episodes": c.episodes, "seed": c.seed}
            for c in curves
        ],
    }
    for mode in (ALGORITHM_BEST, OVERALL_BEST):
        try:
            norm = normalize_curves(curves, random_baseline, mode)
            payload[mode] = {
                "curves": [
                    {"label": l, "sigmas": list(s), "values": list(v)}
                    for l, s, v in zip(norm.labels, norm.sigmas, norm.values)
                ],
                "exclusions": norm.exclusions,
            }
        except DegenerateInputError as e:
            payload[mode] = {"error": str(e)}
    return json.dumps(payload, indent=1)
