import math

import numpy as np
import pytest
from conftest import make_route, make_vehicle, randomized, small_model

from fleetrec.domain import Powertrain
from fleetrec.energymodel import (
    cross_layer,
    forward_batch,
    forward_deep,
    forward_linear,
    forward_recurrent,
    predict_candidates,
    predict_links,
    predict_trip,
    tensor_shapes,
    vocab_index,
)
from fleetrec.energymodel.network import trip_inputs


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def test_cross_layer_examples():
    x = np.array([1.0, 2.0])
    W = np.array([[1.0, 0.0], [0.0, 1.0]])
    b = np.array([0.5, -1.0])
    # x * (W x + b) + x = [1*1.5+1, 2*1+2]
    np.testing.assert_allclose(cross_layer(x, x, W, b), [2.5, 4.0])
    np.testing.assert_allclose(cross_layer(x, x, np.zeros((2, 2)), np.zeros(2)), x)
    with pytest.raises(ValueError, match="dimension"):
        cross_layer(x, x, np.zeros((3, 3)), np.zeros(3))


def test_lstm_matches_hand_unrolled_loop():
    p = randomized(small_model(d=4, hidden=2), seed=1)
    X = np.random.default_rng(2).normal(size=(3, 4))
    Wx, Wh, bias = p["rnn.Wx"], p["rnn.Wh"], p["rnn.b"]
    H = 2
    h, c = [0.0] * H, [0.0] * H
    expected = []
    for t in range(3):
        z = [sum(X[t, d] * Wx[d, j] for d in range(4)) + sum(h[k] * Wh[k, j] for k in range(H)) + bias[j]
             for j in range(4 * H)]
        new_h = []
        for k in range(H):
            i, f = _sig(z[k]), _sig(z[H + k])
            g, o = math.tanh(z[2 * H + k]), _sig(z[3 * H + k])
            c[k] = f * c[k] + i * g
            new_h.append(o * math.tanh(c[k]))
        h = new_h
        head = [sum(h[k] * p["rnn.w_out"][k, j] for k in range(H)) + p["rnn.b_out"][j] for j in range(2)]
        expected.append([max(v, 0.0) for v in head])
    np.testing.assert_allclose(forward_recurrent(X, p), expected, rtol=1e-12, atol=1e-14)


def test_recurrent_component_is_causal():
    p = randomized(small_model(), seed=4)
    X = np.random.default_rng(0).normal(size=(6, 4))
    Y = X.copy()
    Y[3:] += 5.0
    a, b = forward_recurrent(X, p), forward_recurrent(Y, p)
    np.testing.assert_array_equal(a[:3], b[:3])


def test_linear_component_oracle():
    p = randomized(small_model(), seed=5)
    X = np.random.default_rng(1).normal(size=(2, 4))
    expected = []
    for x in X:
        cr = x * (p["lin.W_cross"] @ x + p["lin.b_cross"]) + x
        expected.append(np.maximum(x @ p["lin.w1"] + cr @ p["lin.w2"] + p["lin.b"], 0.0))
    np.testing.assert_allclose(forward_linear(X, p), expected, rtol=1e-12)


def test_deep_component_oracle_and_oov():
    p = randomized(small_model(n_vehicles=3, n_links=5), seed=6)
    def oracle(v_row, l_row):
        a = np.concatenate([p["deep.veh_emb"][v_row], p["deep.link_emb"][l_row]])
        a = np.maximum(a @ p["deep.W1"] + p["deep.b1"], 0)
        a = np.maximum(a @ p["deep.W2"] + p["deep.b2"], 0)
        return np.maximum(a @ p["deep.W3"] + p["deep.b3"], 0)
    out = forward_deep(1, [0, 4, 9], p)
    np.testing.assert_allclose(out[0], oracle(2, 1), rtol=1e-12)
    np.testing.assert_allclose(out[2], oracle(2, 0), rtol=1e-12)
    # ids outside the vocabulary share the reserved row
    np.testing.assert_array_equal(forward_deep(3, [0], p), forward_deep(99, [0], p))
    assert vocab_index([0, 2, 3, 7], 3).tolist() == [1, 3, 0, 0]
    with pytest.raises(ValueError):
        vocab_index([-1], 3)


def test_deep_shapes_follow_config():
    shapes = tensor_shapes(small_model(emb=32, deep=(64, 32)).config)
    assert shapes["deep.W1"] == (64, 64)
    assert shapes["deep.W2"] == (64, 32)
    assert shapes["deep.W3"] == (32, 2)


def test_full_prediction_is_relu_of_component_sum(tiny_params, small_dataset):
    p = randomized(tiny_params, seed=7, scale=0.4)
    tr = small_dataset.trips[1]
    X, *_ = trip_inputs(tr.route, tr.vehicle, p)
    s = forward_recurrent(X[0], p) + forward_linear(X[0], p) + forward_deep(tr.vehicle.vehicle_id, tr.route.link_ids(), p)
    expected = s * tr.vehicle.powertrain.channel_mask() * p.output_scale
    np.testing.assert_allclose(predict_links(tr.route, tr.vehicle, p), expected, rtol=1e-12)


def test_channel_mask_zeroes_unused_outputs(tiny_params, small_dataset):
    p = randomized(tiny_params, seed=8)
    route = small_dataset.trips[0].route
    for pt in Powertrain:
        out = predict_links(route, make_vehicle(pt, vid=int(pt)), p)
        assert (out >= 0).all()
        if not pt.consumes_fuel:
            assert (out[:, 0] == 0).all()
        if not pt.consumes_electric:
            assert (out[:, 1] == 0).all()


def test_zero_parameters_predict_zero(tiny_params, small_dataset):
    p = tiny_params.copy()
    for v in p.tensors.values():
        v[...] = 0.0
    tr = small_dataset.trips[0]
    assert (predict_links(tr.route, tr.vehicle, p) == 0).all()


def test_predict_trip_sums_links(tiny_params, small_dataset):
    p = randomized(tiny_params, seed=9)
    tr = small_dataset.trips[2]
    links = predict_links(tr.route, tr.vehicle, p)
    tot = predict_trip(tr.route, tr.vehicle, p)
    assert (tot.fuel_g, tot.electric_wh) == pytest.approx(tuple(links.sum(axis=0)), rel=1e-12)


def test_candidate_batch_matches_single_predictions(tiny_params, small_dataset):
    p = randomized(tiny_params, seed=10)
    route = small_dataset.trips[3].route
    vehicles = small_dataset.vehicles[:7]
    batch = predict_candidates(route, vehicles, p)
    for k, v in enumerate(vehicles):
        np.testing.assert_allclose(batch[k], predict_links(route, v, p), rtol=1e-12, atol=1e-12)


def test_sigmoid_output_mode(small_dataset):
    from conftest import TINY_TRAIN
    from fleetrec.energymodel import TrainConfig, build_model
    cfg = TrainConfig(**TINY_TRAIN, output_activation="sigmoid")
    p = randomized(build_model(small_dataset.trips, cfg), seed=11)
    zero = p.copy()
    for v in zero.tensors.values():
        v[...] = 0.0
    tr = next(t for t in small_dataset.trips if t.vehicle.powertrain == Powertrain.PHEV)
    X, veh, links, mask = trip_inputs(tr.route, tr.vehicle, p)
    out, _ = forward_batch(p, X, veh, links, mask)
    assert ((out > 0) & (out < 1)).all()
    half, _ = forward_batch(zero, X, veh, links, mask)
    np.testing.assert_allclose(half, 0.5)
    # scale is the per-channel maximum, so predictions stay within the observed range
    y = np.vstack([t.y for t in small_dataset.trips])
    np.testing.assert_allclose(p.output_scale, y.max(axis=0))


def test_single_link_route(tiny_params):
    route = make_route(speeds=(11.0,))
    out = predict_links(route, make_vehicle(Powertrain.CONV, vid=1), randomized(tiny_params, seed=12))
    assert out.shape == (1, 2)
