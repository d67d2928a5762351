"""Forward and reverse passes of the three-component link-energy ensemble.

All batched tensors are (B, T, ...) with every trip in the batch sharing T.
Predictions are produced on the normalized label scale; ``predict_links``
rescales them to grams and watt-hours.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import kernels
from ..domain import EnergyVector, Powertrain, RouteTrip, VehicleSpec
from ..features import assemble_design_matrix
from .params import ModelParams


def vocab_index(ids, vocab_size: int) -> np.ndarray:
    """Map catalog ids onto embedding rows; row 0 is the out-of-vocabulary row."""
    ids = np.asarray(ids, dtype=np.int64)
    if (ids < 0).any():
        raise ValueError("ids must be nonnegative")
    return np.where(ids < vocab_size, ids + 1, 0)


def _relu(z):
    return np.maximum(z, 0.0)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def cross_layer(x0: np.ndarray, xprev: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x0 * (W xprev + b) + xprev, applied over the last axis."""
    D = x0.shape[-1]
    if xprev.shape != x0.shape or W.shape != (D, D) or b.shape != (D,):
        raise ValueError(
            f"cross layer dimension mismatch: x0 {x0.shape}, xprev {xprev.shape}, W {W.shape}, b {b.shape}"
        )
    return x0 * (xprev @ W.T + b) + xprev


@dataclass
class Cache:
    X: np.ndarray
    veh_rows: np.ndarray
    link_rows: np.ndarray
    mask: np.ndarray
    hs: np.ndarray
    cs: np.ndarray
    gates: np.ndarray
    z_rnn: np.ndarray
    q_cross: np.ndarray
    cross: np.ndarray
    z_lin: np.ndarray
    deep_acts: list
    z_deep: np.ndarray
    s: np.ndarray
    out: np.ndarray


def _component_act(params: ModelParams):
    if params.config.output_activation == "relu":
        return _relu, lambda z: (z > 0).astype(np.float64)
    return (lambda z: z), np.ones_like


def _rnn_part(p: ModelParams, X):
    xw = X @ p["rnn.Wx"] + p["rnn.b"]
    hs, cs, gates = kernels.lstm_forward(np.transpose(xw, (1, 0, 2)), p["rnn.Wh"])
    hs_b = np.transpose(hs, (1, 0, 2))
    z = hs_b @ p["rnn.w_out"] + p["rnn.b_out"]
    return hs, cs, gates, z


def _linear_part(p: ModelParams, X):
    q = X @ p["lin.W_cross"].T + p["lin.b_cross"]
    cross = X * q + X
    z = X @ p["lin.w1"] + cross @ p["lin.w2"] + p["lin.b"]
    return q, cross, z


def _deep_part(p: ModelParams, veh_rows, link_rows):
    B, T = link_rows.shape
    ve = p["deep.veh_emb"][veh_rows]
    le = p["deep.link_emb"][link_rows]
    a = np.concatenate([np.broadcast_to(ve[:, None, :], (B, T, ve.shape[1])), le], axis=-1)
    acts = [a]
    L = p.n_deep_layers
    for k in range(1, L):
        a = _relu(a @ p[f"deep.W{k}"] + p[f"deep.b{k}"])
        acts.append(a)
    z = a @ p[f"deep.W{L}"] + p[f"deep.b{L}"]
    return acts, z


def forward_batch(p: ModelParams, X, veh_rows, link_rows, mask) -> tuple[np.ndarray, Cache]:
    """Normalized predictions (B, T, 2) and the activations backward needs."""
    g, _ = _component_act(p)
    hs, cs, gates, z_rnn = _rnn_part(p, X)
    q, cross, z_lin = _linear_part(p, X)
    acts, z_deep = _deep_part(p, veh_rows, link_rows)
    s = g(z_rnn) + g(z_lin) + g(z_deep)
    out = (_relu(s) if p.config.output_activation == "relu" else _sigmoid(s)) * mask[:, None, :]
    cache = Cache(X, veh_rows, link_rows, mask, hs, cs, gates, z_rnn, q, cross, z_lin, acts, z_deep, s, out)
    return out, cache


def backward_batch(p: ModelParams, cache: Cache, dout: np.ndarray, active: Sequence[str] = ("recurrent", "linear", "deep")):
    """Gradients of a scalar loss given dL/d(out); frozen components get zeros."""
    grads = p.zeros_like()
    _, gprime = _component_act(p)
    if p.config.output_activation == "relu":
        ds = dout * cache.mask[:, None, :] * (cache.s > 0)
    else:
        ds = dout * cache.mask[:, None, :] * cache.out * (1.0 - cache.out)
    X = cache.X
    B, T, D = X.shape
    Xf = X.reshape(B * T, D)

    if "recurrent" in active:
        dz = ds * gprime(cache.z_rnn)
        hs_b = np.transpose(cache.hs, (1, 0, 2))
        H = hs_b.shape[-1]
        grads["rnn.w_out"] = hs_b.reshape(-1, H).T @ dz.reshape(-1, 2)
        grads["rnn.b_out"] = dz.sum(axis=(0, 1))
        dhs = np.transpose(dz @ p["rnn.w_out"].T, (1, 0, 2))
        dgate = kernels.lstm_backward(dhs, cache.gates, cache.cs, p["rnn.Wh"])
        dgate_b = np.transpose(dgate, (1, 0, 2)).reshape(B * T, 4 * H)
        grads["rnn.Wx"] = Xf.T @ dgate_b
        grads["rnn.b"] = dgate_b.sum(axis=0)
        hprev = np.concatenate([np.zeros((1, B, H)), cache.hs[:-1]], axis=0)
        grads["rnn.Wh"] = hprev.reshape(-1, H).T @ dgate.reshape(-1, 4 * H)

    if "linear" in active:
        dz = (ds * gprime(cache.z_lin)).reshape(B * T, 2)
        grads["lin.w1"] = Xf.T @ dz
        grads["lin.w2"] = cache.cross.reshape(B * T, D).T @ dz
        grads["lin.b"] = dz.sum(axis=0)
        dq = (dz @ p["lin.w2"].T) * Xf
        grads["lin.W_cross"] = dq.T @ Xf
        grads["lin.b_cross"] = dq.sum(axis=0)

    if "deep" in active:
        L = p.n_deep_layers
        dz = (ds * gprime(cache.z_deep)).reshape(B * T, 2)
        acts = cache.deep_acts
        for k in range(L, 0, -1):
            a_in = acts[k - 1].reshape(B * T, -1)
            grads[f"deep.W{k}"] = a_in.T @ dz
            grads[f"deep.b{k}"] = dz.sum(axis=0)
            da = dz @ p[f"deep.W{k}"].T
            if k > 1:
                dz = da * (a_in > 0)
        E = p["deep.veh_emb"].shape[1]
        da = da.reshape(B, T, 2 * E)
        np.add.at(grads["deep.veh_emb"], cache.veh_rows, da[:, :, :E].sum(axis=1))
        np.add.at(grads["deep.link_emb"], cache.link_rows.reshape(-1), da[:, :, E:].reshape(B * T, E))
    return grads


# ---------------------------------------------------------------------------
# single-trip component views
# ---------------------------------------------------------------------------


def forward_recurrent(X: np.ndarray, p: ModelParams) -> np.ndarray:
    """Recurrent component output for one trip, T x 2."""
    g, _ = _component_act(p)
    *_, z = _rnn_part(p, X[None])
    return g(z)[0]


def forward_linear(X: np.ndarray, p: ModelParams) -> np.ndarray:
    g, _ = _component_act(p)
    *_, z = _linear_part(p, X[None])
    return g(z)[0]


def forward_deep(vehicle_id: int, link_ids, p: ModelParams) -> np.ndarray:
    g, _ = _component_act(p)
    link_ids = np.asarray(link_ids, dtype=np.int64)
    veh = vocab_index([vehicle_id], p.config.n_vehicles)
    links = vocab_index(link_ids, p.config.n_links)[None]
    _, z = _deep_part(p, veh, links)
    return g(z)[0]


def trip_inputs(route: RouteTrip, vehicle: VehicleSpec, p: ModelParams):
    X = assemble_design_matrix(route, vehicle, p.schema)
    veh = vocab_index([vehicle.vehicle_id], p.config.n_vehicles)
    links = vocab_index(route.link_ids(), p.config.n_links)[None]
    return X[None], veh, links, vehicle.powertrain.channel_mask()[None]


def predict_links(route: RouteTrip, vehicle: VehicleSpec, params: ModelParams) -> np.ndarray:
    """Per-link (fuel_g, electric_wh) predictions, T x 2."""
    out, _ = forward_batch(params, *trip_inputs(route, vehicle, params))
    return out[0] * params.output_scale


def predict_trip(route: RouteTrip, vehicle: VehicleSpec, params: ModelParams) -> EnergyVector:
    tot = predict_links(route, vehicle, params).sum(axis=0)
    return EnergyVector(float(tot[0]), float(tot[1]))


def predict_candidates(route: RouteTrip, vehicles: Sequence[VehicleSpec], params: ModelParams) -> np.ndarray:
    """Per-link predictions for many vehicles on one route in a single batch, (n, T, 2)."""
    from ..features import link_feature_matrix

    u = link_feature_matrix(route)
    T = u.shape[0]
    raw = np.concatenate(
        [np.broadcast_to(u, (len(vehicles), T, u.shape[1])),
         np.broadcast_to(np.stack([v.encode() for v in vehicles])[:, None, :], (len(vehicles), T, params.schema.d1))],
        axis=-1,
    )
    X = params.schema.transform(raw)
    veh = vocab_index([v.vehicle_id for v in vehicles], params.config.n_vehicles)
    links = np.broadcast_to(vocab_index(route.link_ids(), params.config.n_links), (len(vehicles), T))
    mask = np.stack([v.powertrain.channel_mask() for v in vehicles])
    out, _ = forward_batch(params, X, veh, links, mask)
    return out * params.output_scale


def channel_mask(powertrain: Powertrain) -> np.ndarray:
    return powertrain.channel_mask()
