import json

import numpy as np
import pytest

from bcpnn.errors import ConfigError, ContractViolation
from bcpnn.readout import (
    ClassifierParams,
    LinearModel,
    adam_step,
    evaluate,
    loss_and_grad,
    train_classifier,
)


def test_params_validation():
    for kw in (dict(lr=0.0), dict(beta1=1.0), dict(beta2=0.0), dict(batch_size=0), dict(n_classes=1)):
        with pytest.raises(ConfigError):
            ClassifierParams(**kw)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        n, d, k = rng.integers(2, 9), rng.integers(1, 6), rng.integers(2, 5)
        x = rng.normal(size=(n, d))
        y = rng.integers(0, k, n)
        model = LinearModel(rng.normal(size=(d, k)), rng.normal(size=k))
        _, gw, gb = loss_and_grad(model, x, y)
        h = 1e-6
        for arr, g in ((model.weights, gw), (model.bias, gb)):
            num = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                lp = loss_and_grad(model, x, y)[0]
                arr[idx] = old - h
                lm = loss_and_grad(model, x, y)[0]
                arr[idx] = old
                num[idx] = (lp - lm) / (2 * h)
            rel = np.linalg.norm(num - g) / max(np.linalg.norm(num) + np.linalg.norm(g), 1e-12)
            worst = max(worst, rel)
    assert worst < 1e-5


def test_single_adam_step_by_hand():
    params = ClassifierParams(n_classes=2, lr=0.1)
    model = LinearModel.zeros(1, 2)
    x, y = np.array([[2.0]]), np.array([1])
    _, gw, gb = loss_and_grad(model, x, y)
    # softmax of zeros is (0.5, 0.5); grad = x * (p - onehot) = (1, -1); bias grad = (0.5, -0.5)
    np.testing.assert_allclose(gw, [[1.0, -1.0]])
    np.testing.assert_allclose(gb, [0.5, -0.5])
    adam_step(model, gw, gb, params)
    # first bias-corrected Adam step moves each parameter by lr * g / (|g| + eps)
    np.testing.assert_allclose(model.weights, [[-0.1 / (1 + 1e-8), 0.1 / (1 + 1e-8)]], rtol=1e-12)
    np.testing.assert_allclose(model.bias, [-0.1 * 0.5 / (0.5 + 1e-8), 0.1 * 0.5 / (0.5 + 1e-8)], rtol=1e-12)
    assert model.step == 1


def test_separable_blobs_reach_full_train_accuracy():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(-2, 0.5, (100, 2)), rng.normal(2, 0.5, (100, 2))])
    y = np.repeat([0, 1], 100)
    model, curve = train_classifier(x, y, ClassifierParams(n_classes=2, n_epochs=100, seed=3))
    assert evaluate(model, x, y).accuracy == 1.0
    assert curve[-1] < curve[0]


def test_zero_features_learn_class_prior():
    y = np.array([0] * 60 + [1] * 30 + [2] * 10)
    x = np.zeros((100, 4))
    model, curve = train_classifier(x, y, ClassifierParams(n_classes=3, n_epochs=300, lr=0.05, batch_size=100))
    prior = np.array([0.6, 0.3, 0.1])
    entropy = -(prior * np.log(prior)).sum()
    assert curve[-1] == pytest.approx(entropy, abs=1e-3)
    e = np.exp(model.bias - model.bias.max())
    np.testing.assert_allclose(e / e.sum(), prior, atol=1e-3)


def test_same_seed_same_weights_and_different_seed_differs():
    rng = np.random.default_rng(2)
    x, y = rng.random((300, 5)), rng.integers(0, 10, 300)
    p = ClassifierParams(n_epochs=3, seed=7)
    a, _ = train_classifier(x, y, p)
    b, _ = train_classifier(x, y, p)
    c, _ = train_classifier(x, y, ClassifierParams(n_epochs=3, seed=8))
    np.testing.assert_array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, c.weights)


def test_feature_permutation_leaves_predictions_unchanged():
    rng = np.random.default_rng(3)
    model = LinearModel(rng.normal(size=(6, 4)), rng.normal(size=4))
    x = rng.random((50, 6))
    perm = rng.permutation(6)
    permuted = LinearModel(model.weights[perm], model.bias)
    np.testing.assert_array_equal(model.predict(x), permuted.predict(x[:, perm]))


def test_nan_loss_aborts():
    # finite features, but a huge step sends the logits to inf - inf
    x = np.array([[1e300], [-1e300]])
    with np.errstate(all="ignore"), pytest.raises(ContractViolation, match="non-finite loss"):
        train_classifier(x, np.array([0, 1]), ClassifierParams(n_classes=2, n_epochs=3, lr=1e300, batch_size=1))


def test_rejects_bad_inputs():
    with pytest.raises(ContractViolation):
        train_classifier(np.array([[np.nan]]), np.array([0]))
    with pytest.raises(ContractViolation):
        train_classifier(np.zeros((2, 1)), np.array([0, 10]))
    with pytest.raises(ContractViolation):
        train_classifier(np.zeros((2, 1)), np.array([0]))


def test_evaluate_perfect_and_constant_predictors():
    y = np.repeat(np.arange(10), 10)
    x = np.eye(10)[y]
    perfect = LinearModel(np.eye(10), np.zeros(10))
    rep = evaluate(perfect, x, y)
    assert rep.accuracy == 1.0
    np.testing.assert_array_equal(np.array(rep.confusion), 10 * np.eye(10, dtype=int))
    constant = LinearModel(np.zeros((10, 10)), np.zeros(10))
    rep = evaluate(constant, x, y)
    assert rep.accuracy == pytest.approx(0.1)
    # every tie resolves to class 0
    assert np.array(rep.confusion)[:, 0].sum() == 100


def test_evaluate_report_json_and_feature_mismatch():
    model = LinearModel.zeros(3, 2)
    rep = evaluate(model, np.zeros((4, 3)), np.array([0, 0, 1, 1]))
    data = json.loads(rep.to_json())
    assert set(data) == {"accuracy", "per_class_accuracy", "confusion"}
    assert data["per_class_accuracy"] == [1.0, 0.0]
    with pytest.raises(ContractViolation):
        evaluate(model, np.zeros((4, 2)), np.zeros(4, dtype=int))


def test_model_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    x, y = rng.random((40, 3)), rng.integers(0, 3, 40)
    model, _ = train_classifier(x, y, ClassifierParams(n_classes=3, n_epochs=2))
    model.save(tmp_path / "m.zip")
    back = LinearModel.load(tmp_path / "m.zip")
    np.testing.assert_array_equal(back.weights, model.weights)
    np.testing.assert_array_equal(back.v_b, model.v_b)
    assert back.step == model.step
    model.save(tmp_path / "m2.zip")
    assert (tmp_path / "m.zip").read_bytes() == (tmp_path / "m2.zip").read_bytes()
