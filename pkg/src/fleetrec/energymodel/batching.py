"""Length-grouped batching and pre-assembled trip tensors."""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence

import numpy as np

from ..domain import LabeledTrip
from ..features import FeatureSchema, link_feature_matrix
from .network import vocab_index


def _lengths(data) -> np.ndarray:
    if len(data) and isinstance(data[0], LabeledTrip):
        return np.array([tr.n_links for tr in data], dtype=np.int64)
    return np.asarray(data, dtype=np.int64)


def make_batches(
    data: Sequence[LabeledTrip] | Sequence[int],
    batch_size: int,
    epoch: int,
    seed: int = 0,
    mode: str = "exact",
    n_buckets: int = 8,
) -> list[np.ndarray]:
    """Index batches for one epoch.

    ``exact`` groups trips of identical link count so no padding is needed.
    ``bucket`` groups by quantile bins of link count; the consumer pads each
    batch to its longest trip. Order within groups and across batches is
    reshuffled every epoch from ``(seed, epoch)``.
    """
    lengths = _lengths(data)
    if len(lengths) == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng([seed, 1000 + epoch])
    if mode == "exact":
        keys = lengths
    elif mode == "bucket":
        edges = np.unique(np.quantile(lengths, np.linspace(0, 1, n_buckets + 1)[1:], method="higher"))
        keys = np.searchsorted(edges, lengths, side="left")
    else:
        raise ValueError(f"unknown batching mode {mode!r}")
    groups: dict[int, list[int]] = defaultdict(list)
    for i, k in enumerate(keys):
        groups[int(k)].append(i)
    batches = []
    for k in sorted(groups):
        idx = np.array(groups[k], dtype=np.int64)
        idx = idx[rng.permutation(len(idx))]
        batches.extend(idx[s : s + batch_size] for s in range(0, len(idx), batch_size))
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


class TripTensors:
    """Normalized inputs and labels for a fixed list of trips, grouped by length."""

    def __init__(self, trips: Sequence[LabeledTrip], schema: FeatureSchema, output_scale, n_vehicles: int, n_links: int):
        self.trips = list(trips)
        self.lengths = np.array([tr.n_links for tr in self.trips], dtype=np.int64)
        self.output_scale = np.asarray(output_scale, dtype=np.float64)
        n = len(self.trips)
        self.veh_rows = vocab_index([tr.vehicle.vehicle_id for tr in self.trips], n_vehicles) if n else np.zeros(0, np.int64)
        self.mask = np.array([tr.vehicle.powertrain.channel_mask() for tr in self.trips]).reshape(n, 2)
        self.totals = np.array([tr.trip_totals for tr in self.trips]).reshape(n, 2)
        self._group_pos = np.zeros(n, dtype=np.int64)
        self._groups: dict[int, dict[str, np.ndarray]] = {}
        by_len: dict[int, list[int]] = defaultdict(list)
        for i, T in enumerate(self.lengths):
            by_len[int(T)].append(i)
        vec_cache: dict[int, np.ndarray] = {}
        for T, idx in by_len.items():
            X = np.empty((len(idx), T, schema.d))
            y = np.empty((len(idx), T, 2))
            links = np.empty((len(idx), T), dtype=np.int64)
            for pos, i in enumerate(idx):
                tr = self.trips[i]
                vid = tr.vehicle.vehicle_id
                if vid not in vec_cache:
                    vec_cache[vid] = tr.vehicle.encode()
                X[pos, :, : schema.d2] = link_feature_matrix(tr.route)
                X[pos, :, schema.d2 :] = vec_cache[vid]
                y[pos] = tr.y / self.output_scale
                links[pos] = vocab_index(tr.route.link_ids(), n_links)
                self._group_pos[i] = pos
            X -= schema.mean
            X /= schema.std
            self._groups[T] = {"X": X, "y": y, "links": links}

    def __len__(self) -> int:
        return len(self.trips)

    def gather(self, idx: np.ndarray):
        """(X, veh_rows, link_rows, mask, y_norm) for a batch, zero-padded if lengths differ."""
        idx = np.asarray(idx, dtype=np.int64)
        lens = self.lengths[idx]
        T = int(lens.max())
        if (lens == T).all():
            g = self._groups[T]
            pos = self._group_pos[idx]
            return g["X"][pos], self.veh_rows[idx], g["links"][pos], self.mask[idx], g["y"][pos]
        B = len(idx)
        D = next(iter(self._groups.values()))["X"].shape[-1]
        X = np.zeros((B, T, D))
        y = np.zeros((B, T, 2))
        links = np.zeros((B, T), dtype=np.int64)
        for b, i in enumerate(idx):
            g = self._groups[int(self.lengths[i])]
            p, L = self._group_pos[i], int(self.lengths[i])
            X[b, :L], y[b, :L], links[b, :L] = g["X"][p], g["y"][p], g["links"][p]
        return X, self.veh_rows[idx], links, self.mask[idx], y

    def eval_batches(self, max_batch: int = 256) -> list[np.ndarray]:
        out = []
        for T in sorted(self._groups):
            idx = np.flatnonzero(self.lengths == T)
            out.extend(idx[s : s + max_batch] for s in range(0, len(idx), max_batch))
        return out
