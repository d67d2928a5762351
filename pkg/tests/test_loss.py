import numpy as np
import pytest

from fleetrec.energymodel import batch_loss, batch_loss_grad, per_trip_loss, trip_loss_terms


@pytest.mark.parametrize("e", [0.0, 1.0, -2.5, 0.3])
def test_single_link_is_three_squares(e):
    err = np.array([[[e]]])
    assert batch_loss(err) == pytest.approx(3 * e * e)


def test_two_link_worked_example():
    err = np.array([[[1.0], [2.0]]])
    c_sum, c_trip, c_link = trip_loss_terms(err)
    assert (c_sum[0], c_trip[0], c_link[0]) == (5.0, 9.0, 2.5)
    assert batch_loss(err) == 16.5


def test_channels_add_and_batch_averages():
    a = np.array([[[1.0, 0.0], [2.0, 0.0]]])
    b = np.array([[[0.0, 1.0], [0.0, 2.0]]])
    assert batch_loss(a + b) == pytest.approx(33.0)
    assert batch_loss(np.concatenate([a, 2 * a])) == pytest.approx((16.5 + 66.0) / 2)


def test_weights_select_terms():
    err = np.array([[[1.0], [2.0]]])
    assert per_trip_loss(err, (0, 1, 0))[0] == 9.0
    assert per_trip_loss(err, (1, 0, 0))[0] == 5.0


def test_mixed_length_batch_rejected():
    with pytest.raises(ValueError):
        batch_loss(np.zeros((3, 2)))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    err = rng.normal(size=(3, 5, 2))
    w = (0.7, 1.3, 0.4)
    g = batch_loss_grad(err, w)
    h = 1e-6
    num = np.zeros_like(err)
    for idx in np.ndindex(err.shape):
        e1, e2 = err.copy(), err.copy()
        e1[idx] += h
        e2[idx] -= h
        num[idx] = (batch_loss(e1, w) - batch_loss(e2, w)) / (2 * h)
    np.testing.assert_allclose(g, num, rtol=1e-6, atol=1e-8)
