"""Stochastic gradient oracles the workers sample from.

Every task exposes ``dim``, ``init_params(seed)``, ``sample_gradient(params,
batch_size, rng)`` and ``evaluate(params) -> (loss, accuracy)``. Accuracy is
``nan`` for tasks without a notion of it (gaussian, quadratic).
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

import numpy as np

from .attack import GaussianModel
from .idx import MnistDataset, load_mnist_idx

TASK_IDS = ("gaussian", "quadratic", "logistic", "mnist-mlp")


class GradientTask:
    kind: str = ""
    dim: int = 0
    has_accuracy: bool = False

    def init_params(self, seed: int = 0) -> np.ndarray:
        return np.zeros(self.dim)

    def sample_gradient(self, params, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, params) -> tuple[float, float]:
        raise NotImplementedError

    def _check(self, params) -> np.ndarray:
        x = np.asarray(params, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"{self.kind}: params have shape {x.shape}, expected ({self.dim},)")
        return x


class GaussianTask(GradientTask):
    """Gradients are i.i.d. ``N(mu, diag(sigma^2))`` whatever the parameters.

    The implied objective is linear, ``Q(x) = <mu, x>``.
    """

    kind = "gaussian"

    def __init__(self, model: GaussianModel):
        self.model = model
        self.dim = model.dim

    def sample_gradient(self, params, batch_size, rng):
        self._check(params)
        return self.model.sample(rng, 1)[0]

    def evaluate(self, params):
        x = self._check(params)
        return float(self.model.mu @ x), float("nan")


class QuadraticTask(GradientTask):
    """``Q(x) = |x - target|^2 / 2`` with ``N(0, noise^2)`` added to each gradient coordinate."""

    kind = "quadratic"

    def __init__(self, target, noise: float = 1.0):
        self.target = np.asarray(target, dtype=np.float64)
        self.noise = float(noise)
        self.dim = self.target.size

    @classmethod
    def random(cls, dim: int, noise: float = 1.0, target_scale: float = 1.0, seed: int = 0) -> "QuadraticTask":
        rng = np.random.default_rng([seed, 0x51])
        return cls(target_scale * rng.standard_normal(dim), noise)

    def true_gradient(self, params) -> np.ndarray:
        return self._check(params) - self.target

    def sample_gradient(self, params, batch_size, rng):
        g = self.true_gradient(params)
        if self.noise:
            g = g + self.noise * rng.standard_normal(self.dim)
        return g

    def evaluate(self, params):
        r = self._check(params) - self.target
        return float(0.5 * r @ r), float("nan")

    def distance_to_optimum(self, params) -> float:
        return float(np.linalg.norm(self._check(params) - self.target))


def _batch(n_rows: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return rng.integers(0, n_rows, size=batch_size)


class LogisticTask(GradientTask):
    """Binary logistic regression on two Gaussian blobs at ``+/- separation/2``
    along a random unit direction; the last parameter is the bias.

    Loss is the mean binary cross-entropy plus ``l2/2 * |w|^2`` (bias excluded).
    """

    kind = "logistic"
    has_accuracy = True

    def __init__(self, n_features: int = 20, n_train: int = 2000, n_test: int = 1000,
                 separation: float = 4.0, l2: float = 1e-4, seed: int = 0):
        rng = np.random.default_rng([seed, 0x10])
        direction = rng.standard_normal(n_features)
        direction /= np.linalg.norm(direction)
        self.l2 = l2
        self.dim = n_features + 1

        def blobs(count):
            y = rng.integers(0, 2, size=count)
            x = rng.standard_normal((count, n_features)) + np.outer(2 * y - 1, direction) * separation / 2
            return x, y.astype(np.float64)

        self.x_train, self.y_train = blobs(n_train)
        self.x_test, self.y_test = blobs(n_test)

    def _logits(self, x, data):
        return data @ x[:-1] + x[-1]

    def sample_gradient(self, params, batch_size, rng):
        x = self._check(params)
        rows = _batch(len(self.y_train), batch_size, rng)
        data, y = self.x_train[rows], self.y_train[rows]
        prob = 1.0 / (1.0 + np.exp(-self._logits(x, data)))
        err = (prob - y) / batch_size
        grad = np.empty(self.dim)
        grad[:-1] = data.T @ err + self.l2 * x[:-1]
        grad[-1] = err.sum()
        return grad

    def evaluate(self, params):
        x = self._check(params)
        z = self._logits(x, self.x_test)
        # log(1 + exp(-|z|)) form keeps the loss finite for large logits
        loss = np.mean(np.maximum(z, 0) - z * self.y_test + np.log1p(np.exp(-np.abs(z))))
        loss += 0.5 * self.l2 * x[:-1] @ x[:-1]
        acc = np.mean((z > 0) == (self.y_test > 0.5))
        return float(loss), float(acc)


class MlpTask(GradientTask):
    """Fully connected ``inputs -> hidden (ReLU) -> classes (softmax)`` classifier.

    Flat parameter layout: ``W1 (inputs x hidden)``, ``b1``, ``W2 (hidden x
    classes)``, ``b2``, row-major. Loss is the mean softmax cross-entropy plus
    ``l2/2`` times the squared norm of the weight matrices.
    """

    kind = "mnist-mlp"
    has_accuracy = True

    def __init__(self, train: MnistDataset, test: MnistDataset, hidden: int = 100,
                 classes: int = 10, l2: float = 1e-4):
        self.train, self.test = train, test
        self.inputs = train.images.shape[1]
        self.hidden, self.classes, self.l2 = hidden, classes, l2
        sizes = [self.inputs * hidden, hidden, hidden * classes, classes]
        self._bounds = np.cumsum([0] + sizes)
        self.dim = int(self._bounds[-1])

    def unpack(self, params):
        x = self._check(params)
        b = self._bounds
        w1 = x[b[0]:b[1]].reshape(self.inputs, self.hidden)
        b1 = x[b[1]:b[2]]
        w2 = x[b[2]:b[3]].reshape(self.hidden, self.classes)
        b2 = x[b[3]:b[4]]
        return w1, b1, w2, b2

    def init_params(self, seed: int = 0) -> np.ndarray:
        """Xavier-uniform weights, zero biases."""
        rng = np.random.default_rng([seed, 0x1417])
        x = np.zeros(self.dim)
        b = self._bounds
        for lo, fan_in, fan_out in ((b[0], self.inputs, self.hidden), (b[2], self.hidden, self.classes)):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            x[lo:lo + fan_in * fan_out] = rng.uniform(-limit, limit, fan_in * fan_out)
        return x

    def _forward(self, params, images):
        w1, b1, w2, b2 = self.unpack(params)
        pre = images @ w1 + b1
        hid = np.maximum(pre, 0.0)
        logits = hid @ w2 + b2
        logits -= logits.max(axis=1, keepdims=True)
        logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        return pre, hid, logp

    def loss_and_grad(self, params, images, labels) -> tuple[float, np.ndarray]:
        w1, _, w2, _ = self.unpack(params)
        count = labels.shape[0]
        pre, hid, logp = self._forward(params, images)
        loss = -logp[np.arange(count), labels].mean()
        loss += 0.5 * self.l2 * (np.sum(w1 * w1) + np.sum(w2 * w2))

        dlogits = np.exp(logp)
        dlogits[np.arange(count), labels] -= 1.0
        dlogits /= count
        dhid = (dlogits @ w2.T) * (pre > 0)
        grad = np.concatenate([
            (images.T @ dhid + self.l2 * w1).ravel(),
            dhid.sum(axis=0),
            (hid.T @ dlogits + self.l2 * w2).ravel(),
            dlogits.sum(axis=0),
        ])
        return float(loss), grad

    def sample_gradient(self, params, batch_size, rng):
        rows = _batch(len(self.train), batch_size, rng)
        return self.loss_and_grad(params, self.train.images[rows], self.train.labels[rows])[1]

    def evaluate(self, params):
        w1, _, w2, _ = self.unpack(params)
        _, _, logp = self._forward(params, self.test.images)
        labels = self.test.labels
        loss = -logp[np.arange(len(labels)), labels].mean()
        loss += 0.5 * self.l2 * (np.sum(w1 * w1) + np.sum(w2 * w2))
        acc = np.mean(logp.argmax(axis=1) == labels)
        return float(loss), float(acc)


DEFAULT_MNIST_DIR = Path(os.environ.get("BYZSGD_MNIST_DIR", Path(__file__).resolve().parents[2] / "data" / "mnist"))


def make_task(task_id: str, params: Optional[dict] = None, seed: int = 0) -> GradientTask:
    """Build a task from its identifier and a JSON-style parameter dict."""
    params = dict(params or {})
    if task_id == "gaussian":
        dim = int(params.get("dim", 100))
        mu = params.get("mu", 0.0)
        sigma = params.get("sigma", 1.0)
        model = GaussianModel(np.broadcast_to(np.asarray(mu, float), (dim,)).copy(),
                              np.broadcast_to(np.asarray(sigma, float), (dim,)).copy())
        return GaussianTask(model)
    if task_id == "quadratic":
        return QuadraticTask.random(
            int(params.get("dim", 100)),
            noise=float(params.get("noise", 1.0)),
            target_scale=float(params.get("target_scale", 1.0)),
            seed=int(params.get("target_seed", seed)),
        )
    if task_id == "logistic":
        keys = ("n_features", "n_train", "n_test", "separation", "l2")
        kw = {k: params[k] for k in keys if k in params}
        return LogisticTask(seed=int(params.get("data_seed", seed)), **kw)
    if task_id == "mnist-mlp":
        root = Path(params.get("data_dir", DEFAULT_MNIST_DIR))

        def path(key, default):
            return Path(params.get(key, root / default))

        train = load_mnist_idx(path("train_images", "train-images-idx3-ubyte.gz"),
                               path("train_labels", "train-labels-idx1-ubyte.gz"),
                               params.get("train_limit"))
        test = load_mnist_idx(path("test_images", "t10k-images-idx3-ubyte.gz"),
                              path("test_labels", "t10k-labels-idx1-ubyte.gz"),
                              params.get("test_limit"))
        return MlpTask(train, test, hidden=int(params.get("hidden", 100)), l2=float(params.get("l2", 1e-4)))
    raise ValueError(f"unknown task {task_id!r}; choose from {', '.join(TASK_IDS)}")
