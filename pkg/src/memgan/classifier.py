"""MLP digit classifier used as the generation-quality judge."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from memgan.mnist import Dataset

DIMS = (784, 128, 10)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ClassifierModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    epochs: int = 0
    test_accuracy: float = float("nan")

    def logits(self, x):
        h = np.maximum(np.asarray(x, dtype=float) @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2

    def proba(self, x):
        return softmax(self.logits(x))

    def predict(self, x):
        return np.argmax(self.logits(x), axis=-1)

    def accuracy(self, ds: Dataset) -> float:
        return 100.0 * float(np.mean(self.predict(ds.images) == ds.labels))

    def save(self, path) -> Path:
        path = Path(path)
        with open(path, "wb") as fh:
            np.savez(fh, w1=self.w1, b1=self.b1, w2=self.w2, b2=self.b2,
                     epochs=self.epochs, test_accuracy=self.test_accuracy)
        return path

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        with np.load(path) as z:
            return cls(z["w1"], z["b1"], z["w2"], z["b2"], int(z["epochs"]), float(z["test_accuracy"]))


def train_classifier(train: Dataset, epochs: int = 20, seed: int = 0, lr: float = 0.1,
                     batch_size: int = 64, test: Dataset | None = None) -> ClassifierModel:
    """Plain SGD on softmax cross-entropy with a 128-unit ReLU hidden layer."""
    if len(train) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    d_in, d_h, d_out = DIMS
    m = ClassifierModel(
        w1=rng.normal(0.0, np.sqrt(2.0 / d_in), (d_in, d_h)), b1=np.zeros(d_h),
        w2=rng.normal(0.0, np.sqrt(1.0 / d_h), (d_h, d_out)), b2=np.zeros(d_out),
    )
    x_all, y_all = train.images, train.labels
    n = len(train)
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in range(0, n, batch_size):
            idx = order[i:i + batch_size]
            x, y = x_all[idx], y_all[idx]
            z1 = x @ m.w1 + m.b1
            h = np.maximum(z1, 0.0)
            p = softmax(h @ m.w2 + m.b2)
            p[np.arange(len(y)), y] -= 1.0
            d_out_ = p / len(y)
            d_h_ = (d_out_ @ m.w2.T) * (z1 > 0)
            m.w2 -= lr * (h.T @ d_out_)
            m.b2 -= lr * d_out_.sum(axis=0)
            m.w1 -= lr * (x.T @ d_h_)
            m.b1 -= lr * d_h_.sum(axis=0)
        m.epochs += 1
    if test is not None:
        m.test_accuracy = m.accuracy(test)
    return m


def generation_accuracy(classifier: ClassifierModel, generator, noise_source,
                        n: int = 1024, digit: int = 3) -> float:
    """Percentage of ``n`` generated images the classifier assigns to ``digit``.

    ``generator`` is anything with ``generate(noise)`` and ``gen_dims``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    noise = noise_source.noise_batch(n, generator.gen_dims[0])
    images = generator.generate(noise)
    return 100.0 * float(np.mean(classifier.predict(images) == digit))
