"""Link feature engineering and design-matrix assembly."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .domain import D1_DEFAULT, VEHICLE_FEATURE_NAMES, Link, RouteTrip, VehicleSpec

LINK_FEATURE_NAMES = (
    list(Link.RAW_FIELDS)
    + [
        "prev_length",
        "next_length",
        "prev_avg_speed",
        "next_avg_speed",
        "dspeed_prev",
        "dspeed_next",
        "congestion_ratio",
        "stop_fraction",
        "accel_proxy",
        "cumulative_distance",
        "remaining_links",
        "tod_sin",
        "tod_cos",
    ]
)
D2_DEFAULT = len(LINK_FEATURE_NAMES)

_DAY = 86_400.0


class SchemaNotFitted(RuntimeError):
    pass


def link_feature_matrix(route: RouteTrip) -> np.ndarray:
    """All engineered features for every link of a trip, T x D2.

    Boundary links use themselves as the missing neighbour.
    """
    raw = route.raw_matrix()
    T = raw.shape[0]
    length, stop, travel, speed, limit = raw[:, 2], raw[:, 3], raw[:, 4], raw[:, 5], raw[:, 6]
    prev_idx = np.maximum(np.arange(T) - 1, 0)
    next_idx = np.minimum(np.arange(T) + 1, T - 1)
    cum = np.concatenate(([0.0], np.cumsum(length)[:-1]))
    phase = 2.0 * np.pi * (raw[:, 1] % _DAY) / _DAY
    eng = np.column_stack(
        [
            length[prev_idx],
            length[next_idx],
            speed[prev_idx],
            speed[next_idx],
            speed - speed[prev_idx],
            speed[next_idx] - speed,
            speed / limit,
            stop / (stop + travel),
            (speed[next_idx] - speed[prev_idx]) / travel,
            cum,
            (T - 1 - np.arange(T)).astype(np.float64),
            np.sin(phase),
            np.cos(phase),
        ]
    )
    return np.hstack([raw, eng])


def engineer_link_features(route: RouteTrip, t: int) -> np.ndarray:
    """Feature vector of link ``t`` (1-based) in schema order."""
    if not 1 <= t <= len(route):
        raise IndexError(f"link index {t} outside 1..{len(route)}")
    return link_feature_matrix(route)[t - 1]


@dataclass(frozen=True)
class FeatureSchema:
    link_names: tuple[str, ...] = tuple(LINK_FEATURE_NAMES)
    vehicle_names: tuple[str, ...] = tuple(VEHICLE_FEATURE_NAMES)
    mean: np.ndarray | None = field(default=None, compare=False)
    std: np.ndarray | None = field(default=None, compare=False)

    @property
    def d1(self) -> int:
        return len(self.vehicle_names)

    @property
    def d2(self) -> int:
        return len(self.link_names)

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def fitted(self) -> bool:
        return self.mean is not None and self.std is not None

    def raw_design(self, route: RouteTrip, vehicle: VehicleSpec) -> np.ndarray:
        u = link_feature_matrix(route)
        v = vehicle.encode()
        if u.shape[1] != self.d2 or v.shape[0] != self.d1:
            raise ValueError(f"schema expects D2={self.d2}, D1={self.d1}; got {u.shape[1]}, {v.shape[0]}")
        return np.hstack([u, np.broadcast_to(v, (u.shape[0], v.shape[0]))])

    def fit(self, pairs: Iterable[tuple[RouteTrip, VehicleSpec]]) -> "FeatureSchema":
        """Z-score statistics over every link row of the given (training) pairs."""
        rows = np.vstack([self.raw_design(r, v) for r, v in pairs])
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return FeatureSchema(self.link_names, self.vehicle_names, mean, std)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise SchemaNotFitted("feature schema has no normalization statistics")
        return (raw - self.mean) / self.std


def default_schema() -> FeatureSchema:
    schema = FeatureSchema()
    assert schema.d1 == D1_DEFAULT
    return schema


def assemble_design_matrix(route: RouteTrip, vehicle: VehicleSpec, schema: FeatureSchema) -> np.ndarray:
    """Normalized T x D matrix: link features then the replicated vehicle vector."""
    if not schema.fitted:
        raise SchemaNotFitted("feature schema has no normalization statistics")
    return schema.transform(schema.raw_design(route, vehicle))


def stack_design(routes: Sequence[RouteTrip], vehicles: Sequence[VehicleSpec], schema: FeatureSchema) -> np.ndarray:
    """Equal-length trips as a (B, T, D) tensor."""
    return np.stack([assemble_design_matrix(r, v, schema) for r, v in zip(routes, vehicles)])
