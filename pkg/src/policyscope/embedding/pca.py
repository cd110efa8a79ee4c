"""Principal component analysis via SVD, with deterministic sign fixing."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from ..errors import ConfigError, DegenerateInputError


class PCA(BaseEstimator, TransformerMixin):
    """Linear projection onto the top variance directions.

    Components are ordered by descending explained variance; each is sign
    fixed so its largest-magnitude coordinate is positive, making fits
    reproducible.
    """

    def __init__(self, n_components: int = 50):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        n, d = X.shape
        if n < 2:
            raise ConfigError("PCA needs at least 2 samples")
        self.mean_ = X.mean(axis=0)
        xc = X - self.mean_
        if not np.any(np.abs(xc) > 1e-12):
            raise DegenerateInputError("input has zero variance")
        _u, s, vt = np.linalg.svd(xc, full_matrices=False)
        k = min(self.n_components, d, n)
        comps = vt[:k]
        flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
        flip[flip == 0] = 1.0
        self.components_ = comps * flip[:, None]
        self.explained_variance_ = (s[:k] ** 2) / (n - 1)
        return self

    def _check_fitted(self):
        if not hasattr(self, "components_"):
            raise NotFittedError("PCA is not fitted")

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Y) -> np.ndarray:
        self._check_fitted()
        return np.asarray(Y, dtype=np.float64) @ self.components_ + self.mean_


def pca_reduce(X: np.ndarray, dims: int = 50):
    """Project rows of X onto the top principal directions.

    Returns (Y, basis, mean) with orthonormal basis columns, so
    Y = (X - mean) @ basis.
    """
    p = PCA(n_components=dims).fit(X)
    return p.transform(X), p.components_.T, p.mean_
