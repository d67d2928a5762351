"""Per-link linear regression reference model.

Each channel gets an independent least-squares fit from the normalized
per-link design row (link features plus vehicle features) to the per-link
label, using only trips whose powertrain consumes that channel. Trip totals
are summed per-link predictions, clipped at zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..domain import LabeledTrip
from ..features import FeatureSchema, default_schema


@dataclass
class LinearBaseline:
    schema: FeatureSchema
    coef: np.ndarray  # (D + 1, 2), last row is the intercept
    ridge: float = 1e-6

    @classmethod
    def fit(cls, trips: Sequence[LabeledTrip], schema: FeatureSchema | None = None, ridge: float = 1e-6) -> "LinearBaseline":
        schema = schema if schema is not None and schema.fitted else (schema or default_schema()).fit(
            (t.route, t.vehicle) for t in trips)
        X = np.vstack([schema.transform(schema.raw_design(t.route, t.vehicle)) for t in trips])
        X = np.hstack([X, np.ones((X.shape[0], 1))])
        Y = np.vstack([t.y for t in trips])
        active = np.vstack([np.broadcast_to(t.vehicle.powertrain.channel_mask(), (t.n_links, 2)) for t in trips]) > 0
        coef = np.zeros((X.shape[1], 2))
        for c in range(2):
            rows = active[:, c]
            if not rows.any():
                continue
            A = X[rows]
            coef[:, c] = np.linalg.solve(A.T @ A + ridge * np.eye(A.shape[1]), A.T @ Y[rows, c])
        return cls(schema, coef, ridge)

    def predict_links(self, trip) -> np.ndarray:
        route, vehicle = (trip.route, trip.vehicle)
        X = self.schema.transform(self.schema.raw_design(route, vehicle))
        out = np.maximum(X @ self.coef[:-1] + self.coef[-1], 0.0)
        return out * vehicle.powertrain.channel_mask()

    def predict_totals(self, trips: Sequence[LabeledTrip]) -> np.ndarray:
        return np.array([self.predict_links(t).sum(axis=0) for t in trips]).reshape(-1, 2)
