import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from colabel.classifier import (
    MLP,
    OptimizerConfig,
    accuracy,
    fine_tune,
    init_classifier,
    init_mlp,
    loss_and_grads,
    predict_proba,
    soft_cross_entropy,
    train_epochs,
)
from colabel.core import TrustedDataset, one_hot

from oracles import finite_difference_grads, max_relative_error, random_simplex


def test_soft_cross_entropy_examples():
    assert soft_cross_entropy([0.7, 0.2, 0.1], [0.5, 0.5, 0.0]) == pytest.approx(0.9830564, abs=1e-6)
    assert soft_cross_entropy(np.full(10, 0.1), np.eye(10)[3]) == pytest.approx(np.log(10))
    # a zero prediction is floored rather than producing inf
    assert np.isfinite(soft_cross_entropy([0.0, 1.0], [1.0, 0.0]))


def test_init_bounds_and_zero_bias():
    net = init_mlp(16, (8,), 3, np.random.default_rng(0))
    assert np.abs(net.weights[0]).max() <= 0.25
    assert np.abs(net.weights[1]).max() <= 1 / np.sqrt(8)
    assert all(np.all(b == 0) for b in net.biases)


def test_predict_proba_rows_sum_to_one_and_checks_dim():
    net = init_classifier(4, (5,), 3, seed=1)
    P = predict_proba(net, np.random.default_rng(0).normal(size=(6, 4)) * 100)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        predict_proba(net, np.zeros((2, 3)))


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, d, C = 5, 3, 3
    net = init_mlp(d, (4,), C, rng)
    X = rng.normal(size=(n, d))
    T = random_simplex(rng, n, C)
    w = rng.uniform(0.5, 2.0, n)
    _, analytic = loss_and_grads(net, X, T, w)
    numeric = finite_difference_grads(lambda: loss_and_grads(net, X, T, w)[0], net.params())
    assert max_relative_error(analytic, numeric) < 1e-5


def test_loss_matches_soft_cross_entropy():
    rng = np.random.default_rng(4)
    net = init_mlp(3, (5,), 4, rng)
    X = rng.normal(size=(8, 3))
    T = random_simplex(rng, 8, 4)
    loss, _ = loss_and_grads(net, X, T)
    assert loss == pytest.approx(soft_cross_entropy(predict_proba(net, X), T).mean(), rel=1e-10)


def test_training_is_deterministic():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(100, 2))
    T = one_hot((X[:, 0] > 0).astype(int), 2)
    net = init_classifier(2, (8,), 2, seed=3)
    a, ta = train_epochs(net, X, T, OptimizerConfig(epochs=3), np.random.default_rng(7))
    b, tb = train_epochs(net, X, T, OptimizerConfig(epochs=3), np.random.default_rng(7))
    assert ta == tb
    for p, q in zip(a.params(), b.params()):
        np.testing.assert_array_equal(p, q)
    # the input network is left untouched
    np.testing.assert_array_equal(net.weights[0], init_classifier(2, (8,), 2, seed=3).weights[0])


def test_learns_separable_blobs():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 3, 600)
    centers = np.array([[0, 0], [6, 0], [0, 6]])
    X = centers[y] + rng.normal(size=(600, 2)) * 0.5
    net = init_classifier(2, (32,), 3, seed=0)
    net, trace = train_epochs(net, X, one_hot(y, 3), OptimizerConfig(lr=0.05, epochs=30, batch_size=32), rng)
    assert trace[-1] < trace[0]
    assert accuracy(predict_proba(net, X), y) >= 0.99


def test_fine_tune_overfits_small_trusted_set():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 3))
    y = np.arange(12) % 3
    D = TrustedDataset([str(i) for i in range(12)], X, y)
    net = init_classifier(3, (32,), 3, seed=0)
    opt = OptimizerConfig(lr=0.05, momentum=0.9, weight_decay=0.0, batch_size=4, epochs=400)
    tuned, _ = fine_tune(net, D, opt, rng)
    assert accuracy(predict_proba(tuned, X), y) == 1.0


def test_adam_and_schedule():
    opt = OptimizerConfig(lr=0.1, schedule=[(0, 1.0), (5, 0.1), (8, 0.01)])
    assert [opt.lr_at(e) for e in (0, 4, 5, 7, 8, 20)] == pytest.approx([0.1, 0.1, 0.01, 0.01, 0.001, 0.001])
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 2))
    T = one_hot((X.sum(axis=1) > 0).astype(int), 2)
    net, trace = train_epochs(init_classifier(2, (8,), 2, 0), X, T, OptimizerConfig(lr=1e-2, method="adam", epochs=20), rng)
    assert trace[-1] < trace[0]
    with pytest.raises(ValueError):
        OptimizerConfig(method="rmsprop")


def test_non_finite_loss_raises():
    net = init_classifier(1, (2,), 2, 0)
    with pytest.raises(FloatingPointError):
        train_epochs(net, np.array([[np.nan]]), np.array([[1.0, 0.0]]), OptimizerConfig(), np.random.default_rng(0))


@given(seed=st.integers(0, 2**31))
def test_checkpoint_round_trip(tmp_path_factory, seed):
    net = init_mlp(3, (4, 2), 5, np.random.default_rng(seed))
    path = tmp_path_factory.mktemp("ck") / "net.json"
    net.save(path, variant="tcl")
    back = MLP.load(path)
    for p, q in zip(net.params(), back.params()):
        np.testing.assert_array_equal(p, q)


def test_soft_cross_entropy_worked_example_and_entropy():
    assert soft_cross_entropy([0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.7803, abs=1e-4)
    assert soft_cross_entropy([0.0, 1.0], [0.0, 1.0]) == pytest.approx(0.0)
    p = np.array([0.2, 0.5, 0.3])
    assert soft_cross_entropy(p, p) == pytest.approx(-(p * np.log(p)).sum(), abs=1e-9)


def test_zero_hidden_layers_is_softmax_regression():
    net = init_mlp(4, (), 3, np.random.default_rng(0))
    X = np.random.default_rng(1).normal(size=(5, 4))
    z = X @ net.weights[0] + net.biases[0]
    e = np.exp(z - z.max(axis=1, keepdims=True))
    np.testing.assert_allclose(predict_proba(net, X), e / e.sum(axis=1, keepdims=True), atol=1e-12)


def test_zero_final_layer_and_logit_scaling():
    net = init_classifier(3, (6,), 4, seed=2)
    X = np.random.default_rng(3).normal(size=(10, 3))
    doubled = net.copy()
    doubled.weights[-1] *= 2
    doubled.biases[-1] *= 2
    np.testing.assert_array_equal(predict_proba(net, X).argmax(1), predict_proba(doubled, X).argmax(1))
    net.weights[-1][:] = 0.0
    np.testing.assert_allclose(predict_proba(net, X), 0.25)


def test_fine_tune_zero_epochs_and_single_example():
    net = init_classifier(2, (16,), 3, seed=0)
    D = TrustedDataset(["a"], np.array([[0.5, -1.0]]), np.array([2]))
    same, trace = fine_tune(net, D, OptimizerConfig(epochs=0), np.random.default_rng(0))
    assert trace == []
    np.testing.assert_array_equal(same.weights[0], net.weights[0])
    tuned, _ = fine_tune(net, D, OptimizerConfig(lr=0.05, epochs=50, batch_size=1), np.random.default_rng(0))
    assert predict_proba(tuned, D.features).argmax() == 2


def test_different_seeds_give_different_params():
    a, b = init_classifier(3, (4,), 2, seed=0), init_classifier(3, (4,), 2, seed=1)
    assert not np.array_equal(a.weights[0], b.weights[0])
