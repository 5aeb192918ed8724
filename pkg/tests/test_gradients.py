"""Backpropagation checked coordinate-by-coordinate against central
finite differences of the loss.  The differencing code below only uses the
forward pass, so the two routes share no derivative code."""

import numpy as np
import pytest

from fedcast.errors import NumericalError, ValidationError
from fedcast.nn import compute_gradients, forward_batch, init_model, mse_loss
from fedcast.nn.lstm import flatten, param_count, unflatten

STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-8


def loss_at(vec, windows, targets, feature_dim, hidden):
    model = unflatten(vec, feature_dim, hidden)
    return mse_loss(forward_batch(windows, model), targets)


def finite_difference(vec, windows, targets, feature_dim, hidden):
    grad = np.empty_like(vec)
    for j in range(len(vec)):
        bumped = vec.copy()
        bumped[j] = vec[j] + STEP
        up = loss_at(bumped, windows, targets, feature_dim, hidden)
        bumped[j] = vec[j] - STEP
        down = loss_at(bumped, windows, targets, feature_dim, hidden)
        grad[j] = (up - down) / (2 * STEP)
    return grad


def assert_grad_close(analytic, numeric):
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    err = np.abs(analytic - numeric)
    bad = err > np.maximum(REL_TOL * scale, ABS_FLOOR)
    assert not bad.any(), (
        f"{bad.sum()} coordinates disagree; worst at "
        f"{int(np.argmax(err))}: {err.max():.3e}")


@pytest.mark.parametrize("feature_dim,hidden,k,batch", [
    (2, 3, 4, 3),
    (3, 2, 6, 5),
    (1, 1, 2, 1),
])
def test_gradient_matches_finite_differences(feature_dim, hidden, k, batch):
    gen = np.random.default_rng(100 + feature_dim + hidden)
    model = init_model(feature_dim, gen, hidden=hidden)
    windows = gen.uniform(0.0, 1.0, size=(batch, k, feature_dim))
    targets = gen.uniform(0.0, 1.0, size=batch)
    grad, loss = compute_gradients(windows, targets, model)
    assert loss == pytest.approx(
        loss_at(flatten(model), windows, targets, feature_dim, hidden))
    numeric = finite_difference(flatten(model), windows, targets,
                                feature_dim, hidden)
    assert_grad_close(grad, numeric)


def test_zero_model_on_zero_targets_has_zero_gradient():
    vec = np.zeros(param_count(2, 3))
    model = unflatten(vec, 2, 3)
    windows = np.random.default_rng(7).uniform(size=(4, 5, 2))
    grad, loss = compute_gradients(windows, np.zeros(4), model)
    # the prediction is exactly head_b = 0, so loss and gradient vanish
    assert loss == 0.0
    assert np.array_equal(grad, np.zeros_like(grad))


def test_head_bias_gradient_is_analytic(rng):
    model = init_model(2, rng, hidden=3)
    windows = rng.uniform(size=(8, 4, 2))
    targets = rng.uniform(size=8)
    grad, _ = compute_gradients(windows, targets, model)
    preds = forward_batch(windows, model)
    # d/db of mean (pred - target)^2 is 2 * mean(pred - target); the head
    # bias is the last flat coordinate
    assert grad[-1] == pytest.approx(2.0 * np.mean(preds - targets), rel=1e-12)


def test_gradient_of_sample_list_matches_array_form(tiny_datasets):
    ds = tiny_datasets[0]
    gen = np.random.default_rng(3)
    model = init_model(ds.feature_dim, gen, hidden=4)
    samples = [ds.train[i] for i in range(6)]
    g_list, l_list = compute_gradients(samples, ds.train.labels[:6], model)
    g_arr, l_arr = compute_gradients(ds.train.windows[:6], ds.train.labels[:6],
                                     model)
    assert l_list == l_arr
    assert np.array_equal(g_list, g_arr)


def test_non_finite_input_is_rejected(rng):
    model = init_model(2, rng, hidden=3)
    windows = rng.uniform(size=(2, 3, 2))
    windows[1, 1, 0] = np.nan
    with pytest.raises(ValidationError):
        compute_gradients(windows, np.zeros(2), model)


def test_overflowing_loss_is_a_numerical_error(rng):
    # A huge head weight sends the squared residual past float64 range;
    # that must surface as a numerical failure, not silent inf.
    model = init_model(2, rng, hidden=3)
    vec = flatten(model)
    vec[-4:-1] = 1e200  # head weights
    model = unflatten(vec, 2, 3)
    windows = rng.uniform(0.5, 1.0, size=(2, 3, 2))
    with pytest.raises(NumericalError):
        compute_gradients(windows, np.zeros(2), model)
