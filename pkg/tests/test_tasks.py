import numpy as np
import pytest

from byzsgd.attack import GaussianModel
from byzsgd.idx import MnistDataset
from byzsgd.tasks import (
    DEFAULT_MNIST_DIR,
    GaussianTask,
    LogisticTask,
    MlpTask,
    QuadraticTask,
    make_task,
)


def tiny_mlp(seed=0, n_train=60, n_test=40, inputs=784, hidden=100):
    rng = np.random.default_rng(seed)
    train = MnistDataset(rng.uniform(0, 1, (n_train, inputs)), rng.integers(0, 10, n_train))
    test = MnistDataset(rng.uniform(0, 1, (n_test, inputs)), np.arange(n_test) % 10)
    return MlpTask(train, test, hidden=hidden)


class TestQuadratic:
    def test_zero_gradient_at_optimum(self):
        task = QuadraticTask(np.array([1.0, -2.0, 0.5]), noise=0.0)
        np.testing.assert_array_equal(task.sample_gradient(task.target, 1, np.random.default_rng(0)), 0.0)
        assert task.evaluate(task.target) == (0.0, pytest.approx(np.nan, nan_ok=True))

    def test_unbiased(self):
        task = QuadraticTask.random(5, noise=2.0, seed=1)
        x = np.ones(5)
        rng = np.random.default_rng(2)
        draws = np.stack([task.sample_gradient(x, 1, rng) for _ in range(10_000)])
        se = 2.0 / np.sqrt(10_000)
        assert np.all(np.abs(draws.mean(axis=0) - task.true_gradient(x)) < 5 * se)

    def test_variance_is_noise(self):
        task = QuadraticTask.random(200, noise=0.5)
        rng = np.random.default_rng(3)
        for x in (np.zeros(200), np.full(200, 7.0)):
            g = np.stack([task.sample_gradient(x, 1, rng) for _ in range(500)])
            var = np.mean(np.sum((g - task.true_gradient(x)) ** 2, axis=1))
            assert var == pytest.approx(200 * 0.25, rel=0.05)

    def test_init_zeros(self):
        np.testing.assert_array_equal(QuadraticTask(np.ones(3)).init_params(), np.zeros(3))

    def test_dimension_check(self):
        with pytest.raises(ValueError, match="shape"):
            QuadraticTask(np.ones(3)).sample_gradient(np.ones(4), 1, np.random.default_rng(0))


class TestGaussian:
    def test_draws_follow_model(self):
        model = GaussianModel(np.array([1.0, -1.0]), np.array([0.5, 2.0]))
        task = GaussianTask(model)
        rng = np.random.default_rng(4)
        g = np.stack([task.sample_gradient(np.zeros(2), 1, rng) for _ in range(20_000)])
        np.testing.assert_allclose(g.mean(axis=0), model.mu, atol=0.05)
        np.testing.assert_allclose(g.std(axis=0), model.sigma, rtol=0.03)

    def test_ignores_parameters(self):
        task = GaussianTask(GaussianModel.uniform(3, 1.0))
        a = task.sample_gradient(np.zeros(3), 1, np.random.default_rng(5))
        b = task.sample_gradient(np.full(3, 9.0), 1, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)


class TestLogistic:
    def test_sgd_separates_blobs(self):
        task = LogisticTask(seed=6)
        x = task.init_params()
        rng = np.random.default_rng(7)
        for _ in range(500):
            x -= 0.5 * task.sample_gradient(x, 16, rng)
        assert task.evaluate(x)[1] >= 0.95

    def test_gradient_matches_finite_differences(self):
        task = LogisticTask(n_features=4, seed=8)
        x = np.random.default_rng(9).standard_normal(task.dim)
        # a batch of the whole training set makes the gradient deterministic
        rows = np.arange(len(task.y_train))

        def loss(v):
            z = task.x_train[rows] @ v[:-1] + v[-1]
            y = task.y_train[rows]
            return np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))) + 0.5 * task.l2 * v[:-1] @ v[:-1]

        class AllRows:
            def integers(self, lo, hi, size):
                return rows

        g = task.sample_gradient(x, len(rows), AllRows())
        eps = 1e-6
        num = [(loss(x + eps * e) - loss(x - eps * e)) / (2 * eps) for e in np.eye(task.dim)]
        np.testing.assert_allclose(g, num, rtol=1e-6, atol=1e-8)


class TestMlp:
    def test_dimension(self):
        assert tiny_mlp().dim == 784 * 100 + 100 + 100 * 10 + 10 == 79510

    def test_finite_differences(self):
        task = tiny_mlp(1)
        x = task.init_params(3)
        x[task._bounds[1]:task._bounds[2]] = 0.05  # nonzero biases exercise their gradient
        images, labels = task.train.images[:20], task.train.labels[:20]
        _, grad = task.loss_and_grad(x, images, labels)
        rng = np.random.default_rng(4)
        h = 1e-5
        for i in rng.choice(task.dim, 50, replace=False):
            e = np.zeros(task.dim)
            e[i] = h
            num = (task.loss_and_grad(x + e, images, labels)[0] - task.loss_and_grad(x - e, images, labels)[0]) / (2 * h)
            assert abs(num - grad[i]) <= 1e-4 * max(abs(num), abs(grad[i]), 1e-6) + 1e-9

    def test_xavier_variance(self):
        task = tiny_mlp()
        w1 = task.unpack(task.init_params(0))[0]
        assert w1.var() == pytest.approx(2 / (784 + 100), rel=0.1)

    def test_biases_start_at_zero(self):
        _, b1, _, b2 = tiny_mlp().unpack(tiny_mlp().init_params(5))
        assert not b1.any() and not b2.any()

    def test_init_deterministic(self):
        task = tiny_mlp()
        np.testing.assert_array_equal(task.init_params(7), task.init_params(7))
        assert not np.array_equal(task.init_params(7), task.init_params(8))

    def test_zero_parameters_are_chance(self):
        task = tiny_mlp()
        loss, acc = task.evaluate(np.zeros(task.dim))
        assert loss == pytest.approx(np.log(10))
        assert acc == pytest.approx(0.1, abs=0.03)

    def test_same_stream_same_gradient(self):
        task = tiny_mlp()
        x = task.init_params(0)
        a = task.sample_gradient(x, 8, np.random.default_rng([1, 2, 3]))
        b = task.sample_gradient(x, 8, np.random.default_rng([1, 2, 3]))
        assert a.tobytes() == b.tobytes()


@pytest.mark.skipif(not (DEFAULT_MNIST_DIR / "train-images-idx3-ubyte.gz").exists(), reason="MNIST files not prepared")
class TestMnistFiles:
    def test_bundled_subset(self):
        task = make_task("mnist-mlp", {"test_limit": 1000})
        assert task.dim == 79510
        assert len(task.train) == 4000 and len(task.test) == 1000
        assert np.bincount(task.test.labels, minlength=10).tolist() == [100] * 10

    def test_zero_parameters_are_chance(self):
        task = make_task("mnist-mlp", {"train_limit": 10})
        assert task.evaluate(np.zeros(task.dim))[1] == pytest.approx(0.1, abs=0.03)


class TestFactory:
    def test_quadratic_params(self):
        task = make_task("quadratic", {"dim": 7, "noise": 0.0}, seed=3)
        assert task.dim == 7 and task.noise == 0.0
        np.testing.assert_array_equal(task.target, make_task("quadratic", {"dim": 7}, seed=3).target)

    def test_gaussian_params(self):
        task = make_task("gaussian", {"dim": 4, "mu": 1.0, "sigma": [1, 2, 3, 4]})
        np.testing.assert_array_equal(task.model.sigma, [1, 2, 3, 4])

    def test_unknown(self):
        with pytest.raises(ValueError, match="unknown task"):
            make_task("cifar")
