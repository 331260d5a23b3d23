"""Plain concatenation baseline: one CE-trained MLP on [x1; x2].

This is the comparison fixture for the robustness experiments: no
per-modality heads, no evidential terms, no ranking regularizer, just a
softmax head on concatenated features.  Mirroring the full-scale pipelines
it stands in for, it is deliberately overparameterized relative to the
synthetic datasets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

__all__ = ["BaselineConfig", "BaselineModel", "train_baseline"]

BASELINE_HIDDEN = (256, 256)


@dataclass(frozen=True)
class BaselineConfig:
    hidden: tuple[int, ...] = BASELINE_HIDDEN
    learning_rate: float = 1e-2
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0


@dataclass
class BaselineModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def logits(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        h = np.concatenate([x1, x2], axis=1)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ w + b)
        return h @ self.weights[-1] + self.biases[-1]

    def predict(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x1, x2), axis=1)

    def confidence(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        z = self.logits(x1, x2)
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return (e / e.sum(axis=1, keepdims=True)).max(axis=1)


def train_baseline(config: BaselineConfig, dataset: Dataset) -> BaselineModel:
    """Adam on softmax cross-entropy; returns the best-validation-accuracy
    checkpoint (earliest epoch on ties), like the main model."""
    x = np.concatenate([dataset.train.x1, dataset.train.x2], axis=1)
    y = dataset.train.labels
    xv = np.concatenate([dataset.val.x1, dataset.val.x2], axis=1)
    yv = dataset.val.labels
    k = dataset.config.classes
    rng = np.random.default_rng(config.seed)

    dims = [x.shape[1], *config.hidden, k]
    weights = [
        rng.normal(0.0, 1.0 / np.sqrt(dims[i]), (dims[i], dims[i + 1]))
        for i in range(len(dims) - 1)
    ]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    tensors = weights + biases
    mom = [np.zeros_like(t) for t in tensors]
    vel = [np.zeros_like(t) for t in tensors]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    n_layers = len(weights)

    best: tuple[list[np.ndarray], list[np.ndarray]] | None = None
    best_acc = -1.0

    def forward(xb):
        hs = [xb]
        h = xb
        for w, b in zip(weights[:-1], biases[:-1]):
            h = np.tanh(h @ w + b)
            hs.append(h)
        return hs, h @ weights[-1] + biases[-1]

    for _epoch in range(config.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            hs, z = forward(xb)
            p = np.exp(z - z.max(axis=1, keepdims=True))
            p /= p.sum(axis=1, keepdims=True)
            g = p
            g[np.arange(len(yb)), yb] -= 1.0
            g /= len(yb)
            grads_w = [None] * n_layers
            grads_b = [None] * n_layers
            for layer in range(n_layers - 1, -1, -1):
                grads_w[layer] = hs[layer].T @ g
                grads_b[layer] = g.sum(axis=0)
                if layer > 0:
                    g = (g @ weights[layer].T) * (1.0 - hs[layer] ** 2)
            grads = grads_w + grads_b
            step += 1
            for j, t in enumerate(tensors):
                mom[j] = beta1 * mom[j] + (1 - beta1) * grads[j]
                vel[j] = beta2 * vel[j] + (1 - beta2) * grads[j] ** 2
                t -= config.learning_rate * (mom[j] / (1 - beta1**step)) / (
                    np.sqrt(vel[j] / (1 - beta2**step)) + eps
                )
        model = BaselineModel(weights=weights, biases=biases)
        val_acc = float((model.predict(dataset.val.x1, dataset.val.x2) == yv).mean())
        if val_acc > best_acc:
            best_acc = val_acc
            best = ([w.copy() for w in weights], [b.copy() for b in biases])

    assert best is not None
    return BaselineModel(weights=best[0], biases=best[1])
