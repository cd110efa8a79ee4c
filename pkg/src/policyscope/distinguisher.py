"""Which algorithm produced this frame? A small convnet classifier over
single grayscale frames, with confusion-matrix and F1 reporting.

Frames come from cached rollouts, one class per generating algorithm, using
only the present (newest) channel of each observation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import ConfigError, InsufficientDataError
from .rollout import Rollout
from .training import AdamState, FeedForwardNet, adam_step, cross_entropy, param_gradient

TEST_FRACTION = 0.20
VAL_FRACTION = 0.10
DEFAULT_FRAMES_PER_MODEL = 2501


@dataclass
class FrameDataset:
    frames: np.ndarray  # (N, 84, 84) float32
    labels: np.ndarray  # (N,) int64
    class_names: list[str]
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def build_dataset(rollouts: list[Rollout], frames_per_model: int = DEFAULT_FRAMES_PER_MODEL,
                  seed: int = 0) -> FrameDataset:
    """Assemble a labeled frame dataset from rollouts.

    Rollouts are grouped by generating algorithm (the class) and, within a
    class, by run id (the model); each model contributes its first
    ``frames_per_model`` present-channel frames. The split is a stratified
    seeded shuffle: per class, 20% (floored) to test, then 10% of the
    remainder to validation.
    """
    by_model: dict[tuple[str, str], list[np.ndarray]] = {}
    for r in rollouts:
        key = (r.meta.model_meta.algorithm, r.meta.model_meta.run_id)
        by_model.setdefault(key, []).extend(s.obs[-1] for s in r.steps)
    class_names = sorted({alg for alg, _ in by_model})
    if len(class_names) < 2:
        raise ConfigError("need rollouts from at least two algorithms")

    frames, labels = [], []
    for (alg, run), fs in sorted(by_model.items()):
        if len(fs) < frames_per_model:
            raise InsufficientDataError(
                f"model {alg}/{run} supplied {len(fs)} frames, need {frames_per_model}"
            )
        frames.extend(fs[:frames_per_model])
        labels.extend([class_names.index(alg)] * frames_per_model)
    frames = np.stack(frames).astype(np.float32)
    labels = np.asarray(labels, dtype=np.int64)

    rng = np.random.Generator(np.random.PCG64(seed))
    train_parts, val_parts, test_parts = [], [], []
    for c in range(len(class_names)):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(len(idx) * TEST_FRACTION)
        rest = idx[n_test:]
        n_val = int(len(rest) * VAL_FRACTION)
        test_parts.append(idx[:n_test])
        val_parts.append(rest[:n_val])
        train_parts.append(rest[n_val:])
    return FrameDataset(
        frames=frames,
        labels=labels,
        class_names=class_names,
        train_idx=np.sort(np.concatenate(train_parts)),
        val_idx=np.sort(np.concatenate(val_parts)),
        test_idx=np.sort(np.concatenate(test_parts)),
    )


class FrameClassifier(BaseEstimator, ClassifierMixin):
    """Two conv layers, two fully-connected layers, Adam on cross-entropy,
    early stopping on validation loss with best-weight restoration."""

    def __init__(self, max_epochs=40, patience=5, lr=1e-4, batch_size=64,
                 conv_channels=(16, 32), hidden=256, random_state=0):
        self.max_epochs = max_epochs
        self.patience = patience
        self.lr = lr
        self.batch_size = batch_size
        self.conv_channels = conv_channels
        self.hidden = hidden
        self.random_state = random_state

    def _as_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 3:
            X = X[:, None]
        if X.ndim != 4 or X.shape[1] != 1:
            raise ConfigError(f"expected (N, 84, 84) or (N, 1, 84, 84) frames, got {X.shape}")
        return X

    def fit(self, X, y, X_val=None, y_val=None):
        X = self._as_batch(X)
        y = np.asarray(y, dtype=np.int64)
        self.classes_ = np.unique(y)
        n_classes = int(self.classes_.max()) + 1
        c1, c2 = self.conv_channels
        net = FeedForwardNet.initialize(
            X.shape[1:], [(c1, 8, 4), (c2, 4, 2)], (self.hidden, n_classes), seed=self.random_state
        )
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.random_state, 2])))
        state = AdamState()
        has_val = X_val is not None and len(X_val) > 0
        if has_val:
            X_val = self._as_batch(X_val)
            y_val = np.asarray(y_val, dtype=np.int64)

        best_loss = np.inf
        best_params = net.clone_params()
        best_epoch = 0
        since_best = 0
        self.history_ = {"train_loss": [], "val_loss": []}
        for epoch in range(self.max_epochs):
            order = rng.permutation(len(X))
            epoch_losses = []
            for start in range(0, len(order), self.batch_size):
                sel = order[start : start + self.batch_size]
                loss, grads = param_gradient(net, X[sel], y[sel])
                adam_step(net.params, grads, state, lr=self.lr)
                epoch_losses.append(loss)
            self.history_["train_loss"].append(float(np.mean(epoch_losses)))
            if has_val:
                val_loss = cross_entropy(net.logits(X_val), y_val)
                self.history_["val_loss"].append(val_loss)
                if val_loss < best_loss:
                    best_loss = val_loss
                    best_params = net.clone_params()
                    best_epoch = epoch
                    since_best = 0
                else:
                    since_best += 1
                    if since_best >= self.patience:
                        break
            else:
                best_params = net.clone_params()
                best_epoch = epoch
        net.params = best_params
        self.net_ = net
        self.best_epoch_ = best_epoch
        self.best_val_loss_ = None if not has_val else best_loss
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("classifier is not fitted")

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        X = self._as_batch(X)
        out = []
        for start in range(0, len(X), 256):
            out.append(self.net_.logits(X[start : start + 256]))
        return np.concatenate(out)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def predict_proba(self, X) -> np.ndarray:
        from .ops import softmax

        return softmax(self.decision_function(X).astype(np.float64))


def train_classifier(dataset: FrameDataset, max_epochs: int = 40, patience: int = 5,
                     seed: int = 0, lr: float = 1e-4, batch_size: int = 64) -> FrameClassifier:
    clf = FrameClassifier(max_epochs=max_epochs, patience=patience, lr=lr,
                          batch_size=batch_size, random_state=seed)
    tr, va = dataset.train_idx, dataset.val_idx
    clf.fit(dataset.frames[tr], dataset.labels[tr], dataset.frames[va], dataset.labels[va])
    return clf


@dataclass
class ConfusionMatrix:
    """counts[i, j]: frames of true class i predicted as class j."""

    counts: np.ndarray
    class_names: list[str]

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def per_class_f1(self) -> list[float]:
        return [
            f1_score(
                _safe_div(self.counts[i, i], self.counts[:, i].sum()),
                _safe_div(self.counts[i, i], self.counts[i, :].sum()),
            )
            for i in range(len(self.class_names))
        ]

    def mean_f1(self) -> float:
        return float(np.mean(self.per_class_f1()))


def _safe_div(a: float, b: float) -> float:
    return float(a) / float(b) if b else 0.0


def f1_score(precision: float, recall: float) -> float:
    """2 p r / (p + r), defined as 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate(classifier: FrameClassifier, dataset: FrameDataset):
    """Test-split confusion matrix, per-class F1 and unweighted mean F1."""
    te = dataset.test_idx
    if len(te) == 0:
        raise ConfigError("test split is empty")
    pred = classifier.predict(dataset.frames[te])
    true = dataset.labels[te]
    k = dataset.n_classes
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    cm = ConfusionMatrix(counts, list(dataset.class_names))
    f1s = cm.per_class_f1()
    return cm, f1s, float(np.mean(f1s))


def sum_confusions(matrices: list[ConfusionMatrix], zero_diagonal: bool = True) -> ConfusionMatrix:
    """Elementwise sum; optionally zero the diagonal to emphasize the
    misclassifications."""
    if not matrices:
        raise ConfigError("no confusion matrices to sum")
    names = matrices[0].class_names
    for m in matrices[1:]:
        if m.class_names != names:
            raise ConfigError(f"class sets differ: {m.class_names} vs {names}")
    total = np.sum([m.counts for m in matrices], axis=0)
    if zero_diagonal:
        np.fill_diagonal(total, 0)
    return ConfusionMatrix(total, list(names))


def confusion_to_csv(cm: ConfusionMatrix) -> str:
    buf = io.StringIO()
    buf.write("true\\pred," + ",".join(cm.class_names) + "\n")
    for i, name in enumerate(cm.class_names):
        buf.write(name + "," + ",".join(str(int(v)) for v in cm.counts[i]) + "\n")
    return buf.getvalue()


def f1_to_csv(cm: ConfusionMatrix) -> str:
    buf = io.StringIO()
    buf.write("class,f1\n")
    for name, f1 in zip(cm.class_names, cm.per_class_f1()):
        buf.write(f"{name},{f1!r}\n")
    buf.write(f"mean,{cm.mean_f1()!r}\n")
    return buf.getvalue()


def confusion_heatmap(cm: ConfusionMatrix, cell: int = 32) -> np.ndarray:
    """Blue-intensity heatmap of the counts, one cell per matrix entry."""
    k = len(cm.class_names)
    peak = max(int(cm.counts.max()), 1)
    img = np.zeros((k * cell, k * cell, 3), dtype=np.uint8)
    for i in range(k):
        for j in range(k):
            v = cm.counts[i, j] / peak
            color = (int(24 + 40 * v), int(32 + 80 * v), int(48 + 200 * v))
            img[i * cell : (i + 1) * cell, j * cell : (j + 1) * cell] = color
    return img
