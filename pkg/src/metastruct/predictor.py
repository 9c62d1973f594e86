"""Pixel predictors for the iGTT loop.

:class:`LogisticPredictor` is a per-pixel logistic model on a handful of
local intensity statistics. Any object with the same ``fit_epoch`` /
``predict`` pair can stand in for it (a CNN, for instance).
"""

from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import ndimage

from metastruct.losses import combined_gradient

FEATURE_NAMES = ("intensity", "mean_r1", "mean_r2", "mean_r4", "std_r2")


class Predictor(Protocol):
    def fit_epoch(self, images: Sequence[np.ndarray], labels: Sequence[np.ndarray],
                  rng: np.random.Generator) -> None: ...

    def predict(self, image: np.ndarray) -> np.ndarray: ...


def _box_mean(img: np.ndarray, r: int) -> np.ndarray:
    return ndimage.uniform_filter(img, size=2 * r + 1, mode="reflect")


def pixel_features(image) -> np.ndarray:
    """``(H*W, 5)`` matrix: intensity, box means at radii 1/2/4, box std at radius 2.

    Columns are standardized per image so one learning rate suits all of them.
    """
    img = np.asarray(image, dtype=float)
    m2 = _box_mean(img, 2)
    std2 = np.sqrt(np.maximum(_box_mean(img * img, 2) - m2 * m2, 0.0))
    cols = [img, _box_mean(img, 1), m2, _box_mean(img, 4), std2]
    f = np.stack([c.ravel() for c in cols], axis=1)
    sd = f.std(axis=0)
    return (f - f.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LogisticPredictor:
    """Per-pixel logistic regression trained by mini-batch SGD.

    Weights start with a small positive push on the intensity features,
    i.e. a prior that objects are brighter than background (as in
    fluorescence microscopy). ``loss_grad(p, s)`` returns dLoss/dp for one
    batch; by default the equal-weight DMI + soft-IoU loss.
    """

    def __init__(self, lr: float = 0.1, batch_size: int = 256, init_scale: float = 0.01,
                 max_grad_norm: float = 0.25,
                 loss_grad: Callable[[np.ndarray, np.ndarray], np.ndarray] = combined_gradient):
        self.lr = lr
        self.batch_size = batch_size
        self.max_grad_norm = max_grad_norm
        self.loss_grad = loss_grad
        self.w = np.array([1.0, 1.0, 1.0, 1.0, 0.0]) * init_scale
        self.b = 0.0
        self._cache: dict[int, np.ndarray] = {}

    def _features(self, image):
        key = id(image)
        cached = self._cache.get(key)
        if cached is None or cached[0] is not image:
            cached = (image, pixel_features(image))
            self._cache[key] = cached
        return cached[1]

    def predict(self, image) -> np.ndarray:
        f = self._features(image)
        return _sigmoid(f @ self.w + self.b).reshape(np.shape(image))

    def fit_epoch(self, images, labels, rng):
        """One pass over every pixel of every image, in shuffled mini-batches."""
        for k in rng.permutation(len(images)):
            f = self._features(images[k])
            s = np.asarray(labels[k], dtype=float).ravel()
            order = rng.permutation(s.size)
            for start in range(0, s.size, self.batch_size):
                idx = order[start:start + self.batch_size]
                fb, sb = f[idx], s[idx]
                p = _sigmoid(fb @ self.w + self.b)
                gz = self.loss_grad(p, sb) * p * (1.0 - p)
                gw = fb.T @ gz
                gb = float(gz.sum())
                norm = np.sqrt(gw @ gw + gb * gb)
                if norm > self.max_grad_norm:
                    gw *= self.max_grad_norm / norm
                    gb *= self.max_grad_norm / norm
                self.w -= self.lr * gw
                self.b -= self.lr * gb

    def state(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "features": list(FEATURE_NAMES)}
