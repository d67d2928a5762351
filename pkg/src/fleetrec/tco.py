"""Levelized total cost of ownership in $/mile.

Year ``y`` of ownership (1-based) carries discount factor ``(1 + r)^-y``.
Energy spend and miles are both discounted, so the per-mile figure is a
levelized cost. Capital is MSRP minus the discounted resale value, spread over
the discounted lifetime miles. Maintenance and insurance are not modeled.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .domain import EnergyVector, VehicleSpec

WH_PER_KWH = 1000.0


class MissingComponentCost(KeyError):
    def __str__(self):
        return f"cost table has no price for component {self.args[0]!r}"


@dataclass(frozen=True)
class CostConfig:
    component_costs: dict
    energy_prices: dict
    annual_vmt: tuple[float, ...]
    rpe_factor: float = 1.2
    ownership_years: int = 10
    discount_rate: float = 0.05
    resale_fraction: float = 0.2
    grams_per_gallon: dict = field(default_factory=lambda: {"gasoline": 2819.0, "diesel": 3336.0})
    fixture_version: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "annual_vmt", tuple(float(v) for v in self.annual_vmt))
        self.validate()

    def validate(self) -> None:
        if not self.rpe_factor >= 1.0:
            raise ValueError("rpe_factor must be at least 1")
        if int(self.ownership_years) < 1:
            raise ValueError("ownership_years must be >= 1")
        if not 0.0 <= self.resale_fraction < 1.0:
            raise ValueError("resale_fraction must lie in [0, 1)")
        if not self.discount_rate > -1.0:
            raise ValueError("discount_rate must exceed -1")
        if not self.annual_vmt or any(not v > 0 for v in self.annual_vmt):
            raise ValueError("annual_vmt must be a nonempty list of positive miles")
        for name, series in self.energy_prices.items():
            seq = series if isinstance(series, (list, tuple)) else [series]
            if not seq or any(not float(p) > 0 for p in seq):
                raise ValueError(f"energy price series {name!r} must be positive")
        for name, g in self.grams_per_gallon.items():
            if not float(g) > 0:
                raise ValueError(f"grams_per_gallon[{name!r}] must be positive")

    # schedules, extended with their last value past the end
    def _series(self, seq, years: int) -> np.ndarray:
        seq = list(seq) if isinstance(seq, (list, tuple)) else [seq]
        return np.array([float(seq[min(y, len(seq) - 1)]) for y in range(years)])

    def vmt_schedule(self) -> np.ndarray:
        return self._series(self.annual_vmt, self.ownership_years)

    def price_schedule(self, carrier: str) -> np.ndarray:
        if carrier not in self.energy_prices:
            raise MissingComponentCost(f"energy price {carrier}")
        return self._series(self.energy_prices[carrier], self.ownership_years)

    def discount_factors(self) -> np.ndarray:
        return (1.0 + self.discount_rate) ** -np.arange(1, self.ownership_years + 1, dtype=np.float64)

    def discounted_miles(self) -> float:
        return math.fsum(self.vmt_schedule() * self.discount_factors())

    def scaled(self, factor: float) -> "CostConfig":
        """Copy with every component cost and energy price multiplied by ``factor``."""
        def mul(x):
            if isinstance(x, dict):
                return {k: mul(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [mul(v) for v in x]
            return float(x) * factor

        return self.replace(component_costs=mul(self.component_costs), energy_prices=mul(self.energy_prices))

    def replace(self, **changes) -> "CostConfig":
        d = self.to_dict()
        d.update(changes)
        return CostConfig.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "fixture_version": self.fixture_version,
            "rpe_factor": self.rpe_factor,
            "component_costs": copy.deepcopy(self.component_costs),
            "energy_prices": copy.deepcopy(self.energy_prices),
            "ownership_years": self.ownership_years,
            "annual_vmt": list(self.annual_vmt),
            "discount_rate": self.discount_rate,
            "resale_fraction": self.resale_fraction,
            "grams_per_gallon": dict(self.grams_per_gallon),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostConfig":
        known = {"fixture_version", "rpe_factor", "component_costs", "energy_prices", "ownership_years",
                 "annual_vmt", "discount_rate", "resale_fraction", "grams_per_gallon"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown cost config keys: {sorted(unknown)}")
        return cls(**d)


def load_cost_config(path=None) -> CostConfig:
    """Read a JSON cost config; ``None`` loads the bundled default fixture."""
    if path is None:
        text = resources.files("fleetrec").joinpath("data/default_costs.json").read_text()
    else:
        text = Path(path).read_text()
    return CostConfig.from_dict(json.loads(text))


def default_cost_config() -> CostConfig:
    return load_cost_config(None)


def _lookup(table: dict, key: str):
    if key not in table:
        raise MissingComponentCost(key)
    return table[key]


def component_costs(vehicle: VehicleSpec, cfg: CostConfig) -> dict[str, float]:
    """Bottom-up component cost breakdown (before the retail markup)."""
    cc = cfg.component_costs
    gliders = _lookup(cc, "glider")
    if str(vehicle.vclass) not in gliders:
        raise MissingComponentCost(f"glider[{vehicle.vclass}]")
    parts = {"glider": float(gliders[str(vehicle.vclass)])}
    if vehicle.engine_power > 0:
        parts["engine"] = float(_lookup(cc, "engine_per_kw")) * vehicle.engine_power
    if vehicle.motor_power > 0:
        parts["motor"] = float(_lookup(cc, "motor_per_kw")) * vehicle.motor_power
    if vehicle.battery_capacity > 0:
        parts["battery"] = float(_lookup(cc, "battery_per_kwh")) * vehicle.battery_capacity
    if vehicle.automation_level > 0:
        levels = _lookup(cc, "automation")
        if str(vehicle.automation_level) not in levels:
            raise MissingComponentCost(f"automation[{vehicle.automation_level}]")
        parts["automation"] = float(levels[str(vehicle.automation_level)])
    return parts


def msrp(vehicle: VehicleSpec, cfg: CostConfig) -> float:
    return math.fsum(component_costs(vehicle, cfg).values()) * cfg.rpe_factor


def energy_cost_per_mile(energy: EnergyVector, trip_miles: float, vehicle: VehicleSpec, cfg: CostConfig) -> float:
    if not trip_miles > 0:
        raise ValueError("trip distance must be positive")
    fuel_g, wh = float(energy.fuel_g), float(energy.electric_wh)
    if fuel_g < 0 or wh < 0:
        raise ValueError("energy consumption must be nonnegative")
    per_mile = np.zeros(cfg.ownership_years)
    if fuel_g > 0:
        carrier = vehicle.fuel_type
        if carrier not in cfg.grams_per_gallon:
            raise MissingComponentCost(f"grams_per_gallon[{carrier}]")
        gal_per_mile = fuel_g / float(cfg.grams_per_gallon[carrier]) / trip_miles
        per_mile = per_mile + gal_per_mile * cfg.price_schedule(carrier)
    if wh > 0:
        kwh_per_mile = wh / WH_PER_KWH / trip_miles
        per_mile = per_mile + kwh_per_mile * cfg.price_schedule("electricity")
    w = cfg.vmt_schedule() * cfg.discount_factors()
    return math.fsum(per_mile * w) / math.fsum(w)


@dataclass(frozen=True)
class TcoBreakdown:
    msrp: float
    capital_per_mile: float
    energy_per_mile: float
    total_per_mile: float

    def as_dict(self) -> dict:
        return {"msrp": self.msrp, "capital_per_mile": self.capital_per_mile,
                "energy_per_mile": self.energy_per_mile, "total_per_mile": self.total_per_mile}


def capital_per_mile(vehicle: VehicleSpec, cfg: CostConfig) -> float:
    price = msrp(vehicle, cfg)
    resale = cfg.resale_fraction * price * float(cfg.discount_factors()[-1])
    return (price - resale) / cfg.discounted_miles()


def tco_per_mile(vehicle: VehicleSpec, energy: EnergyVector, trip_miles: float, cfg: CostConfig) -> TcoBreakdown:
    price = msrp(vehicle, cfg)
    cap = capital_per_mile(vehicle, cfg)
    en = energy_cost_per_mile(energy, trip_miles, vehicle, cfg)
    return TcoBreakdown(price, cap, en, cap + en)
