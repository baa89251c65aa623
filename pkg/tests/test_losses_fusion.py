import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcasc.errors import ShapeError, ValidationError
from lcasc.fusion import FusionInput, PredictionSet, average_patches, predict_label, prod_fusion
from lcasc.losses import cross_entropy_loss, kl_mixup_loss, l2_penalty

from oracles import numeric_grad


def onehots(labels, c):
    return np.eye(c)[labels]


# --- losses ----------------------------------------------------------------------

def test_ce_perfect_prediction():
    y = onehots([1, 4, 0], 5)
    loss, _ = cross_entropy_loss(y, y)
    assert 0 <= loss <= 1e-6


def test_ce_uniform_is_ln10(rng):
    y = onehots(rng.integers(0, 10, 7), 10)
    loss, _ = cross_entropy_loss(np.full((7, 10), 0.1), y)
    assert loss == pytest.approx(math.log(10), abs=1e-6)


def test_ce_nonnegative(rng):
    p = rng.dirichlet(np.ones(6), 20)
    assert cross_entropy_loss(p, onehots(rng.integers(0, 6, 20), 6))[0] >= 0


def test_kl_identity_and_penalty(rng):
    p = rng.dirichlet(np.ones(4), 3)
    assert kl_mixup_loss(p, p)[0] == pytest.approx(0.0, abs=1e-12)
    params = [rng.standard_normal((3, 3)), rng.standard_normal(5)]
    lam = 0.01
    expected = lam / 2 * sum(float(np.sum(t ** 2)) for t in params)
    assert kl_mixup_loss(p, p, params, lam)[0] == pytest.approx(expected, abs=1e-15)
    assert l2_penalty(params, lam) == expected


def test_kl_zero_label_convention():
    # 0 * log(0 / q) contributes nothing even when q is tiny
    y = np.array([[1.0, 0.0]])
    q = np.array([[0.5, 0.5]])
    assert kl_mixup_loss(q, y)[0] == pytest.approx(math.log(2))


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1), st.integers(1, 16), st.integers(2, 12))
def test_kl_onehot_equals_n_times_ce(seed, n, c):
    r = np.random.default_rng(seed)
    p = r.dirichlet(np.ones(c), n)
    y = onehots(r.integers(0, c, n), c)
    kl = kl_mixup_loss(p, y)[0]
    ce = cross_entropy_loss(p, y)[0]
    assert kl == pytest.approx(n * ce, abs=1e-6)


def test_loss_shape_errors():
    with pytest.raises(ShapeError):
        cross_entropy_loss(np.ones((2, 3)) / 3, np.ones((2, 4)))
    with pytest.raises(ShapeError):
        kl_mixup_loss(np.ones((2, 3)) / 3, np.ones((3, 3)))


@pytest.mark.parametrize("seed", range(10))
def test_loss_gradients(seed):
    r = np.random.default_rng(seed)
    p = r.dirichlet(np.full(5, 4.0), 4)
    y_soft = r.dirichlet(np.ones(5), 4)
    y_hard = onehots(r.integers(0, 5, 4), 5)
    for fn, y in ((cross_entropy_loss, y_hard), (kl_mixup_loss, y_soft)):
        analytic = fn(p, y)[1]
        numeric = numeric_grad(lambda: fn(p, y)[0], p, h=1e-6)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)


def test_clamped_entries_have_zero_gradient():
    p = np.array([[1.0, 0.0]])
    y = np.array([[0.5, 0.5]])
    loss, grad = kl_mixup_loss(p, y)
    assert np.isfinite(loss) and grad[0, 1] == 0.0


# --- fusion ----------------------------------------------------------------------

def test_average_patches_basic():
    row = np.array([[0.2, 0.3, 0.5]])
    np.testing.assert_array_equal(average_patches(PredictionSet(row)), row[0])
    np.testing.assert_array_equal(average_patches(PredictionSet([[1, 0], [0, 1]])), [0.5, 0.5])
    with pytest.raises(ValidationError):
        average_patches(PredictionSet(np.zeros((0, 3))))


def test_average_patches_against_reordered_sum(rng):
    probs = rng.dirichlet(np.ones(10), 10)
    ref = np.zeros(10)
    for row in probs[::-1]:
        ref = ref + row
    np.testing.assert_allclose(average_patches(PredictionSet(probs)), ref / 10, atol=1e-7)


def test_prediction_set_requires_simplex():
    with pytest.raises(ValidationError):
        PredictionSet([[0.5, 0.6]])


def test_predict_label():
    assert predict_label([0.1, 0.7, 0.2]) == 1
    assert predict_label(np.full(10, 0.1)) == 0
    assert predict_label([0.3, 0.5, 0.5]) == 1
    with pytest.raises(ValidationError):
        predict_label([0.1, np.nan])


def test_prod_fusion_examples():
    np.testing.assert_allclose(prod_fusion(FusionInput([[0.6, 0.4], [0.3, 0.7]])), [0.09, 0.14])
    assert predict_label(prod_fusion(FusionInput([[0.6, 0.4], [0.3, 0.7]]))) == 1
    row = np.array([0.1, 0.6, 0.3])
    np.testing.assert_array_equal(prod_fusion(FusionInput([row])), row)
    with pytest.raises(ValidationError):
        prod_fusion(FusionInput([[0.5, -0.1]]))


@settings(max_examples=200)
@given(st.integers(0, 2**31 - 1), st.integers(1, 4), st.integers(2, 10))
def test_prod_fusion_matches_log_sum(seed, s, c):
    r = np.random.default_rng(seed)
    probs = r.dirichlet(np.ones(c), s)
    log_sum = np.log(probs).sum(axis=0)
    fused = prod_fusion(FusionInput(probs))
    assert predict_label(fused) == int(np.argmax(log_sum)) or np.isclose(
        np.sort(log_sum)[-1], np.sort(log_sum)[-2])
