"""Single-trip vehicle recommendation with a 1 to 5 star ranking."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import EnergyVector, RouteTrip, VehicleSpec
from .energymodel.network import predict_candidates
from .energymodel.params import ModelParams
from .tco import CostConfig, TcoBreakdown, tco_per_mile

DEFAULT_K = 5
# slack so that values landing on an integer up to rounding (e.g. 2.0 at
# y = alpha * (1 + ln 4)) floor to that integer
_FLOOR_SLACK = 1e-9


def star_rank(tcos, alpha_prior: float | None = None) -> np.ndarray:
    """Stars = floor(4 exp(-(y - a)/a) + 1) clamped to [1, 5], a = min(prior, min y)."""
    y = np.asarray(tcos, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("need at least one TCO value")
    if not np.all(np.isfinite(y)) or (y <= 0).any():
        raise ValueError("TCO values must be finite and positive")
    alpha = float(y.min())
    if alpha_prior is not None:
        if not alpha_prior > 0:
            raise ValueError("alpha prior must be positive")
        alpha = min(alpha, float(alpha_prior))
    raw = 4.0 * np.exp(-(y - alpha) / alpha) + 1.0
    return np.clip(np.floor(raw + _FLOOR_SLACK), 1, 5).astype(np.int64)


@dataclass(frozen=True)
class RankedCandidate:
    vehicle_id: int
    powertrain: str
    energy: EnergyVector
    tco: TcoBreakdown
    stars: int
    rank_position: int

    def to_record(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "powertrain": self.powertrain,
            "fuel_g": self.energy.fuel_g,
            "electric_wh": self.energy.electric_wh,
            **self.tco.as_dict(),
            "stars": self.stars,
            "rank_position": self.rank_position,
        }


def score_candidates(route: RouteTrip, candidates: Sequence[VehicleSpec], params: ModelParams, cost_cfg: CostConfig):
    """Predicted trip energy and TCO for every candidate, in input order."""
    totals = predict_candidates(route, candidates, params).sum(axis=1)
    miles = route.miles
    energies = [EnergyVector(float(t[0]), float(t[1])) for t in totals]
    return energies, [tco_per_mile(v, e, miles, cost_cfg) for v, e in zip(candidates, energies)]


def recommend_one(
    route: RouteTrip,
    candidates: Sequence[VehicleSpec],
    params: ModelParams,
    cost_cfg: CostConfig,
    k: int = DEFAULT_K,
    alpha_prior: float | None = None,
) -> list[RankedCandidate]:
    """Rank every candidate by predicted TCO and return the top ``k``.

    Ties in $/mi are broken by the lower vehicle id.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list is empty")
    if not 1 <= k <= len(candidates):
        raise ValueError(f"k must lie in [1, {len(candidates)}], got {k}")
    energies, tcos = score_candidates(route, candidates, params, cost_cfg)
    stars = star_rank([t.total_per_mile for t in tcos], alpha_prior)
    order = sorted(range(len(candidates)), key=lambda i: (tcos[i].total_per_mile, candidates[i].vehicle_id))
    return [
        RankedCandidate(candidates[i].vehicle_id, candidates[i].powertrain.label, energies[i], tcos[i],
                        int(stars[i]), pos + 1)
        for pos, i in enumerate(order[:k])
    ]


def format_table(ranked: Sequence[RankedCandidate]) -> str:
    head = f"{'rank':>4}  {'vehicle':>7}  {'powertrain':<10}{'fuel g':>12}{'elec Wh':>12}{'$/mi':>10}  stars"
    lines = [head, "-" * len(head)]
    for r in ranked:
        lines.append(
            f"{r.rank_position:>4}  {r.vehicle_id:>7}  {r.powertrain:<10}{r.energy.fuel_g:>12.1f}"
            f"{r.energy.electric_wh:>12.1f}{r.tco.total_per_mile:>10.4f}  {'*' * r.stars}"
        )
    return "\n".join(lines) + "\n"


def closed_form_two_star(alpha: float) -> float:
    """The TCO value that sits exactly on the 2-star boundary."""
    return alpha * (1.0 + math.log(4.0))
