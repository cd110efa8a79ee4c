"""Exact-gradient t-SNE.

Affinities use per-point Gaussian bandwidths found by binary search until
the conditional distribution's entropy hits log(perplexity); the embedding
descends the KL divergence with early exaggeration, momentum and per-
coordinate gains. Everything is O(N^2) and deterministic given the seed,
which keeps it honest to verify at the rollout sizes this toolkit handles
(a few thousand states).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from ..errors import ConfigError

_EPS = 1e-12


def pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def conditional_gaussians(d2: np.ndarray, perplexity: float, tol: float = 1e-7,
                          max_iter: int = 200):
    """Row-stochastic conditional affinities P(j|i) with per-row precision
    beta_i binary-searched so each row's entropy is log(perplexity).

    Returns (P, betas). Entropy converges to within ``tol`` nats, far inside
    the documented 1e-4 contract, so achieved perplexities sit within about
    perplexity*tol of the target.
    """
    n = d2.shape[0]
    target = np.log(perplexity)
    beta = np.ones(n)
    beta_lo = np.full(n, -np.inf)
    beta_hi = np.full(n, np.inf)
    mask = ~np.eye(n, dtype=bool)
    p = np.zeros((n, n))
    for _ in range(max_iter):
        w = np.exp(-d2 * beta[:, None])
        w[~mask] = 0.0
        sw = w.sum(axis=1)
        sw[sw == 0] = _EPS
        p = w / sw[:, None]
        # H = log(sum w) + beta * E[d2]
        h = np.log(sw) + beta * (d2 * p).sum(axis=1)
        diff = h - target
        if np.all(np.abs(diff) < tol):
            break
        too_high = diff > 0  # entropy too high -> sharpen (raise beta)
        beta_lo = np.where(too_high, beta, beta_lo)
        beta_hi = np.where(too_high, beta_hi, beta)
        beta = np.where(
            too_high,
            np.where(np.isinf(beta_hi), beta * 2.0, (beta + beta_hi) / 2.0),
            np.where(np.isinf(beta_lo), beta / 2.0, (beta + beta_lo) / 2.0),
        )
    return p, beta


def row_perplexities(p_cond: np.ndarray) -> np.ndarray:
    """exp(entropy) of each conditional row; the oracle for the bandwidth
    search."""
    q = np.where(p_cond > 0, p_cond, 1.0)
    h = -(p_cond * np.log(q)).sum(axis=1)
    return np.exp(h)


def joint_probabilities(x: np.ndarray, perplexity: float) -> np.ndarray:
    p_cond, _ = conditional_gaussians(pairwise_sq_dists(np.asarray(x, dtype=np.float64)), perplexity)
    p = (p_cond + p_cond.T) / (2.0 * x.shape[0])
    return np.maximum(p, _EPS)


def _student_t_q(y: np.ndarray):
    num = 1.0 / (1.0 + pairwise_sq_dists(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), _EPS)
    return q, num


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * np.log(p / q)))


class TSNE(BaseEstimator):
    def __init__(self, perplexity: float = 30.0, n_iter: int = 3000,
                 learning_rate: float = 200.0, early_exaggeration: float = 12.0,
                 exaggeration_iters: int = 250, momentum_switch_iter: int = 250,
                 initial_momentum: float = 0.5, final_momentum: float = 0.8,
                 min_gain: float = 0.01, random_state: int = 0):
        self.perplexity = perplexity
        self.n_iter = n_iter
        self.learning_rate = learning_rate
        self.early_exaggeration = early_exaggeration
        self.exaggeration_iters = exaggeration_iters
        self.momentum_switch_iter = momentum_switch_iter
        self.initial_momentum = initial_momentum
        self.final_momentum = final_momentum
        self.min_gain = min_gain
        self.random_state = random_state

    def fit_transform(self, X, y=None) -> np.ndarray:
        X = check_array(X, dtype=np.float64)
        n = X.shape[0]
        if n <= 3 * self.perplexity:
            raise ConfigError(
                f"{n} points is too few for perplexity {self.perplexity} (need > {3 * self.perplexity:g})"
            )
        p = joint_probabilities(X, self.perplexity)
        rng = np.random.Generator(np.random.PCG64(self.random_state))
        emb = rng.normal(0.0, 1e-4, size=(n, 2))
        inc = np.zeros_like(emb)
        gains = np.ones_like(emb)

        q0, _ = _student_t_q(emb)
        self.kl_initial_ = kl_divergence(p, q0)

        for t in range(self.n_iter):
            p_eff = p * self.early_exaggeration if t < self.exaggeration_iters else p
            q, num = _student_t_q(emb)
            w = (p_eff - q) * num
            grad = 4.0 * (emb * w.sum(axis=1)[:, None] - w @ emb)
            momentum = self.initial_momentum if t < self.momentum_switch_iter else self.final_momentum
            same_sign = np.sign(grad) == np.sign(inc)
            gains = np.where(same_sign, gains * 0.8, gains + 0.2)
            np.maximum(gains, self.min_gain, out=gains)
            inc = momentum * inc - self.learning_rate * gains * grad
            emb = emb + inc
            emb = emb - emb.mean(axis=0)

        q, _ = _student_t_q(emb)
        self.kl_divergence_ = kl_divergence(p, q)
        self.embedding_ = emb
        return emb


def tsne(X: np.ndarray, perplexity: float = 30.0, iterations: int = 3000, seed: int = 0) -> np.ndarray:
    """Embed rows of X into 2-D."""
    return TSNE(perplexity=perplexity, n_iter=iterations, random_state=seed).fit_transform(X)
