import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fleetrec.assignment import brute_force_assign, dual_feasible, greedy_assign, kuhn_munkres
from fleetrec.energymodel import batch_loss, per_trip_loss
from fleetrec.metrics import mae_rmse, mape_maape
from fleetrec.recommender import star_rank

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 1e4, allow_nan=False, allow_infinity=False)


@st.composite
def cost_matrices(draw):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(m, 6))
    return draw(arrays(np.float64, (n, m), elements=st.floats(-50, 50, allow_nan=False, width=32)))


@settings(max_examples=150, deadline=None)
@given(cost_matrices())
def test_hungarian_is_optimal_and_dual_feasible(w):
    km = kuhn_munkres(w)
    assert km.total_cost == brute_force_assign(w).total_cost
    assert km.total_cost <= greedy_assign(w).total_cost + 1e-9
    assert dual_feasible(w, km)
    assert len(set(km.vehicle_of_trip)) == w.shape[1]


@settings(max_examples=200, deadline=None)
@given(st.lists(positive, min_size=1, max_size=30), st.floats(0.01, 100.0))
def test_star_properties(tcos, c):
    s = star_rank(tcos)
    y = np.array(tcos)
    assert s[int(np.argmin(y))] == 5
    assert set(s.tolist()) <= {1, 2, 3, 4, 5}
    order = np.argsort(y, kind="stable")
    assert (np.diff(s[order]) <= 0).all()
    assert (star_rank(y * c) == s).all()


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=finite), arrays(np.float64, 40, elements=finite))
def test_rmse_variance_identity(truth, noise):
    pred = truth + noise[: truth.size]
    mae, rmse = mae_rmse(truth, pred)
    e = np.abs(truth - pred)
    assert math.isclose(rmse**2, e.var() + mae**2, rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 30), elements=positive), arrays(np.float64, 30, elements=finite))
def test_maape_bounded_by_mape(truth, pred):
    mape, maape = mape_maape(truth, pred[: truth.size])
    assert maape <= min(mape, math.pi / 2) + 1e-15


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**31))
def test_batch_loss_is_mean_of_trip_losses(B, T, seed):
    err = np.random.default_rng(seed).normal(size=(B, T, 2))
    per = [per_trip_loss(err[b : b + 1])[0] for b in range(B)]
    assert math.isclose(batch_loss(err), math.fsum(per) / B, rel_tol=1e-10)
