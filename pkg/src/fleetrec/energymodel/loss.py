"""Cumulative-link training objective and its gradient."""
from __future__ import annotations

import numpy as np

DEFAULT_WEIGHTS = (1.0, 1.0, 1.0)


def trip_loss_terms(err: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-trip (prefix, whole-trip, per-link) terms for errors of shape (B, T, C).

    Terms are summed over channels and returned with shape (B,).
    """
    err = np.asarray(err, dtype=np.float64)
    T = err.shape[1]
    prefix = np.cumsum(err, axis=1)
    c_sum = (prefix**2).sum(axis=(1, 2)) / T
    c_trip = (prefix[:, -1, :] ** 2).sum(axis=-1)
    c_link = (err**2).sum(axis=(1, 2)) / T
    return c_sum, c_trip, c_link


def per_trip_loss(err: np.ndarray, weights=DEFAULT_WEIGHTS) -> np.ndarray:
    c_sum, c_trip, c_link = trip_loss_terms(err)
    return weights[0] * c_sum + weights[1] * c_trip + weights[2] * c_link


def batch_loss(err: np.ndarray, weights=DEFAULT_WEIGHTS) -> float:
    """Mean over trips of the weighted three-term objective."""
    if err.ndim != 3:
        raise ValueError("errors must be (B, T, C); mixed-length batches are not allowed")
    return float(per_trip_loss(err, weights).mean())


def batch_loss_grad(err: np.ndarray, weights=DEFAULT_WEIGHTS, *, denom: int | None = None) -> np.ndarray:
    """d(batch_loss)/d(err). ``denom`` overrides the batch size used for the mean."""
    B, T, _ = err.shape
    n = B if denom is None else denom
    prefix = np.cumsum(err, axis=1)
    suffix_of_prefix = np.flip(np.cumsum(np.flip(prefix, axis=1), axis=1), axis=1)
    g = (
        weights[0] * (2.0 / T) * suffix_of_prefix
        + weights[1] * 2.0 * prefix[:, -1:, :]
        + weights[2] * (2.0 / T) * err
    )
    return g / n
