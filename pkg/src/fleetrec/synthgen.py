"""Deterministic synthetic road network, vehicle catalog, trips and energy labels.

Every random draw is keyed on ``(seed, stream, entity id)`` so that results do
not depend on generation order. The energy oracle is a tractive-energy model
over link averages: rolling resistance, aerodynamic drag and an inertial term
that depends on the previous link's speed, divided by a powertrain efficiency.
PHEVs deplete a battery to a reserve before switching the engine on.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .domain import (
    MAX_GENERATED_LINKS,
    VEHICLE_CLASSES,
    EnergyVector,
    LabeledTrip,
    Link,
    Powertrain,
    RouteTrip,
    VehicleSpec,
)

# per-class baseline: curb kg, frontal area m2, drag coeff, rolling coeff, engine kW, max payload kg
_CLASS_BASE = {
    3: (4000.0, 5.0, 0.55, 0.0080, 150.0, 2500.0),
    4: (5500.0, 5.5, 0.58, 0.0075, 180.0, 3500.0),
    6: (8500.0, 7.0, 0.62, 0.0070, 220.0, 6000.0),
    8: (14500.0, 9.5, 0.65, 0.0065, 340.0, 18000.0),
}
_BEV_BATTERY_KWH = {3: 120.0, 4: 160.0, 6: 250.0, 8: 500.0}
_PHEV_BATTERY_KWH = {3: 6.0, 4: 8.0, 6: 12.0, 8: 20.0}
_BATTERY_KG_PER_KWH = 6.0

# Table-of-statistics anchors for calibration (trip-level means).
TARGET_CONV_FUEL_G = 7185.0
TARGET_BEV_ELECTRIC_WH = 36570.2

_STREAM_TRIP, _STREAM_NOISE, _STREAM_ASSIGN, _STREAM_CALIB, _STREAM_NET, _STREAM_VEH = 1, 2, 3, 4, 5, 6


@dataclass(frozen=True)
class OracleConstants:
    regen_efficiency: float = 0.6
    eff_conv: float = 0.25
    eff_isg: float = 0.27
    eff_hev: float = 0.32
    eff_phev_cs: float = 0.32
    eff_electric: float = 0.85
    phev_reserve: float = 0.15
    idle_g_per_s_per_kw: float = 0.0015
    automation_smoothing: float = 0.1

    def fuel_efficiency(self, pt: Powertrain) -> float:
        return {
            Powertrain.BEV: 1.0,
            Powertrain.CONV: self.eff_conv,
            Powertrain.ISG: self.eff_isg,
            Powertrain.HEV: self.eff_hev,
            Powertrain.PHEV: self.eff_phev_cs,
        }[pt]


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_links: int = 400
    n_vehicles_per_powertrain: tuple[int, ...] = (6, 6, 6, 6, 6)
    trip_count: int = 20_000
    length_median: float = 15.0
    length_sigma: float = 0.9
    max_links: int = MAX_GENERATED_LINKS
    noise_sigma: float = 0.03
    calibration_trips: int = 1000
    oracle: OracleConstants = field(default_factory=OracleConstants)

    def __post_init__(self):
        object.__setattr__(self, "n_vehicles_per_powertrain", tuple(int(c) for c in self.n_vehicles_per_powertrain))
        if isinstance(self.oracle, dict):
            object.__setattr__(self, "oracle", OracleConstants(**self.oracle))

    def validate(self) -> None:
        if self.n_links < 1 or self.trip_count < 1 or self.calibration_trips < 1:
            raise ValueError("counts must be >= 1")
        if len(self.n_vehicles_per_powertrain) != len(Powertrain):
            raise ValueError("n_vehicles_per_powertrain needs one count per powertrain")
        if any(c < 1 for c in self.n_vehicles_per_powertrain):
            raise ValueError("counts must be >= 1")
        if not 0.0 <= self.noise_sigma <= 0.2:
            raise ValueError("noise_sigma must lie in [0, 0.2]")
        if self.length_median < 1 or self.length_sigma < 0:
            raise ValueError("invalid length distribution")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_vehicles_per_powertrain"] = list(self.n_vehicles_per_powertrain)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "oracle" in d:
            d["oracle"] = OracleConstants(**d["oracle"])
        return cls(**d)


@dataclass(frozen=True)
class OracleState:
    soc: float
    engine_on: bool


@dataclass
class Network:
    length: np.ndarray
    speed_limit: np.ndarray
    free_flow: np.ndarray
    congestion_sensitivity: np.ndarray
    stop_probability: np.ndarray
    successors: list[tuple[int, ...]]

    @property
    def n_links(self) -> int:
        return len(self.length)

    def to_dict(self) -> dict:
        return {
            "links": [
                {
                    "link_id": i,
                    "length": float(self.length[i]),
                    "speed_limit": float(self.speed_limit[i]),
                    "free_flow": float(self.free_flow[i]),
                    "congestion_sensitivity": float(self.congestion_sensitivity[i]),
                    "stop_probability": float(self.stop_probability[i]),
                    "successors": list(self.successors[i]),
                }
                for i in range(self.n_links)
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        links = d["links"]
        col = lambda k: np.array([lk[k] for lk in links], dtype=np.float64)  # noqa: E731
        return cls(
            length=col("length"),
            speed_limit=col("speed_limit"),
            free_flow=col("free_flow"),
            congestion_sensitivity=col("congestion_sensitivity"),
            stop_probability=col("stop_probability"),
            successors=[tuple(int(s) for s in lk["successors"]) for lk in links],
        )

    def serialize(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True).encode()


def synth_network(cfg: SynthConfig) -> Network:
    if cfg.n_links < 2:
        raise ValueError("n_links must be >= 2")
    rng = np.random.default_rng([cfg.seed, _STREAM_NET])
    n = cfg.n_links
    length = np.exp(rng.uniform(np.log(50.0), np.log(5000.0), size=n))
    speed_limit = rng.uniform(8.0, 30.0, size=n)
    free_flow = rng.uniform(0.75, 1.0, size=n)
    sens = rng.uniform(0.0, 0.6, size=n)
    stop_p = rng.uniform(0.0, 0.5, size=n)
    successors = []
    extra = min(2, n - 2)
    for i in range(n):
        nxt = {(i + 1) % n}
        if extra > 0:
            pool = np.array([j for j in range(n) if j != i and j != (i + 1) % n])
            nxt.update(int(j) for j in rng.choice(pool, size=extra, replace=False))
        successors.append(tuple(sorted(nxt)))
    return Network(length, speed_limit, free_flow, sens, stop_p, successors)


def synth_vehicles(cfg: SynthConfig) -> list[VehicleSpec]:
    """Vehicle catalog; classes cycle per powertrain so every class is covered."""
    out: list[VehicleSpec] = []
    vid = 0
    for pt in Powertrain:
        for k in range(cfg.n_vehicles_per_powertrain[int(pt)]):
            rng = np.random.default_rng([cfg.seed, _STREAM_VEH, vid])
            vclass = VEHICLE_CLASSES[(k + int(pt)) % len(VEHICLE_CLASSES)]
            curb, area, cd, crr, eng, max_payload = _CLASS_BASE[vclass]
            jit = lambda: float(rng.uniform(0.95, 1.05))  # noqa: E731
            curb, area, cd, crr, eng = curb * jit(), area * jit(), cd * jit(), crr * jit(), eng * jit()
            payload = float(rng.uniform(0.1, 0.6)) * max_payload
            if pt == Powertrain.BEV:
                battery, motor, engine = _BEV_BATTERY_KWH[vclass] * jit(), eng, 0.0
            elif pt == Powertrain.CONV:
                battery, motor, engine = 0.0, 0.0, eng
            elif pt == Powertrain.ISG:
                battery, motor, engine = 1.0, 10.0, eng
            elif pt == Powertrain.HEV:
                battery, motor, engine = float(rng.uniform(2.0, 5.0)), 0.4 * eng, 0.85 * eng
            else:
                battery, motor, engine = _PHEV_BATTERY_KWH[vclass] * jit(), 0.6 * eng, 0.8 * eng
            curb += _BATTERY_KG_PER_KWH * battery
            fuel = "electric" if pt == Powertrain.BEV else ("gasoline" if vclass in (3, 4) else "diesel")
            out.append(
                VehicleSpec(
                    vehicle_id=vid,
                    powertrain=pt,
                    vclass=vclass,
                    curb_mass=curb,
                    payload_mass=payload,
                    battery_capacity=battery,
                    frontal_area=area,
                    drag_coeff=cd,
                    rolling_resist=crr,
                    engine_power=engine,
                    motor_power=motor,
                    fuel_type=fuel,
                    automation_level=int(rng.integers(0, 3)),
                )
            )
            vid += 1
    return out


def _trip_length(rng: np.random.Generator, cfg: SynthConfig) -> int:
    if cfg.length_sigma == 0:
        return int(min(max(round(cfg.length_median), 1), cfg.max_links))
    draw = rng.lognormal(math.log(cfg.length_median), cfg.length_sigma)
    return int(min(max(round(draw), 1), cfg.max_links))


def _rush_profile(seconds: float) -> float:
    h = (seconds / 3600.0) % 24.0
    return math.exp(-(((h - 8.0) / 1.0) ** 2)) + math.exp(-(((h - 17.0) / 1.2) ** 2))


def synth_trip(cfg: SynthConfig, network: Network, trip_id: int) -> RouteTrip:
    rng = np.random.default_rng([cfg.seed, _STREAM_TRIP, trip_id])
    T = _trip_length(rng, cfg)
    cur = int(rng.integers(network.n_links))
    clock = float(rng.uniform(6 * 3600.0, 20 * 3600.0))
    links = []
    for t in range(T):
        if t > 0:
            succ = network.successors[cur]
            cur = int(succ[rng.integers(len(succ))])
        limit = float(network.speed_limit[cur])
        congestion = 1.0 - float(network.congestion_sensitivity[cur]) * min(_rush_profile(clock), 1.0)
        speed = limit * float(network.free_flow[cur]) * congestion * float(np.exp(rng.normal(0.0, 0.08)))
        speed = min(max(speed, 1.0), 1.1 * limit)
        length = float(network.length[cur])
        travel = length / speed
        stop = float(rng.exponential(20.0)) if rng.random() < network.stop_probability[cur] else 0.0
        links.append(Link(cur, clock, length, stop, travel, speed, limit))
        clock += travel + stop
    return RouteTrip(trip_id, tuple(links))


def synth_trips(cfg: SynthConfig, network: Network, *, start_id: int = 0, count: int | None = None) -> list[RouteTrip]:
    count = cfg.trip_count if count is None else count
    return [synth_trip(cfg, network, start_id + k) for k in range(count)]


def _oracle_vehicle_vector(vehicle: VehicleSpec, consts: OracleConstants) -> np.ndarray:
    pt = vehicle.powertrain
    cap_kwh = vehicle.battery_capacity if pt in (Powertrain.BEV, Powertrain.PHEV) else 0.0
    return np.array(
        [
            float(int(pt)),
            vehicle.total_mass,
            vehicle.rolling_resist,
            vehicle.frontal_area * vehicle.drag_coeff,
            consts.regen_efficiency,
            consts.fuel_efficiency(pt),
            consts.eff_electric,
            consts.idle_g_per_s_per_kw * vehicle.engine_power,
            (1.0 - consts.phev_reserve) * cap_kwh * 3.6e6 if pt == Powertrain.PHEV else 0.0,
            cap_kwh * 1000.0,
            1.0 - consts.automation_smoothing * vehicle.automation_level,
        ]
    )


def _oracle_raw(route: RouteTrip, vehicle: VehicleSpec, consts: OracleConstants, initial_speed: float):
    if not vehicle.total_mass > 0:
        raise ValueError("vehicle mass must be positive")
    raw = route.raw_matrix()
    return kernels.oracle_trip(
        raw[:, 2], raw[:, 5], raw[:, 3], initial_speed, _oracle_vehicle_vector(vehicle, consts)
    )


def oracle_energy_array(
    route: RouteTrip,
    vehicle: VehicleSpec,
    seed: int,
    *,
    noise_sigma: float = 0.03,
    scale: Sequence[float] = (1.0, 1.0),
    consts: OracleConstants | None = None,
    initial_speed: float = 0.0,
) -> np.ndarray:
    """Per-link labels as a T x 2 array; ``oracle_energy`` wraps this."""
    consts = consts or OracleConstants()
    out, _ = _oracle_raw(route, vehicle, consts, initial_speed)
    if noise_sigma > 0:
        rng = np.random.default_rng([seed, _STREAM_NOISE, route.trip_id, vehicle.vehicle_id])
        out = out * np.exp(rng.normal(0.0, noise_sigma, size=out.shape))
    out = out * np.asarray(scale, dtype=np.float64)
    out = out * vehicle.powertrain.channel_mask()
    return np.maximum(out, 0.0)


def oracle_energy(route: RouteTrip, vehicle: VehicleSpec, seed: int, **kw) -> list[EnergyVector]:
    arr = oracle_energy_array(route, vehicle, seed, **kw)
    return [EnergyVector(float(f), float(e)) for f, e in arr]


def oracle_trace(route: RouteTrip, vehicle: VehicleSpec, consts: OracleConstants | None = None,
                 initial_speed: float = 0.0) -> list[OracleState]:
    """Latent battery/engine state after each link (noise-free)."""
    consts = consts or OracleConstants()
    out, soc = _oracle_raw(route, vehicle, consts, initial_speed)
    pt = vehicle.powertrain
    states = []
    for t in range(len(route)):
        if pt == Powertrain.PHEV:
            usable_wh = (1.0 - consts.phev_reserve) * vehicle.battery_capacity * 1000.0
            on = bool(out[t, 0] > 0) or (vehicle.battery_capacity * 1000.0 - soc[t]) >= usable_wh
        else:
            on = pt.consumes_fuel
        states.append(OracleState(float(max(soc[t], 0.0)), on))
    return states


def calibrate_scale(samples: Sequence[tuple[Powertrain, np.ndarray]]) -> dict[Powertrain, tuple[float, float]]:
    """Scale factors mapping raw oracle trip totals onto the target magnitudes.

    One fuel factor (anchored on conventional trucks) and one electric factor
    (anchored on BEVs) are shared by all powertrains, so relative consumption
    between technologies is preserved.
    """
    conv = [tot[0] for pt, tot in samples if pt == Powertrain.CONV]
    bev = [tot[1] for pt, tot in samples if pt == Powertrain.BEV]
    fuel_f = TARGET_CONV_FUEL_G / float(np.mean(conv)) if conv and np.mean(conv) > 0 else 1.0
    elec_f = TARGET_BEV_ELECTRIC_WH / float(np.mean(bev)) if bev and np.mean(bev) > 0 else 1.0
    return {pt: (fuel_f, elec_f) for pt in Powertrain}


@dataclass
class Dataset:
    network: Network
    vehicles: list[VehicleSpec]
    trips: list[LabeledTrip]
    metadata: dict

    def vehicle_by_id(self) -> dict[int, VehicleSpec]:
        return {v.vehicle_id: v for v in self.vehicles}


def _calibration_factors(cfg: SynthConfig, network: Network, vehicles: list[VehicleSpec]):
    routes = synth_trips(cfg, network, start_id=10_000_000, count=cfg.calibration_trips)
    refs = [v for v in vehicles if v.powertrain in (Powertrain.CONV, Powertrain.BEV)]
    samples = []
    for k, route in enumerate(routes):
        veh = refs[k % len(refs)]
        arr = oracle_energy_array(route, veh, cfg.seed, noise_sigma=cfg.noise_sigma, consts=cfg.oracle)
        samples.append((veh.powertrain, arr.sum(axis=0)))
    return calibrate_scale(samples)


def generate_dataset(cfg: SynthConfig) -> Dataset:
    cfg.validate()
    network = synth_network(cfg)
    vehicles = synth_vehicles(cfg)
    factors = _calibration_factors(cfg, network, vehicles)
    trips = []
    for route in synth_trips(cfg, network):
        rng = np.random.default_rng([cfg.seed, _STREAM_ASSIGN, route.trip_id])
        veh = vehicles[int(rng.integers(len(vehicles)))]
        arr = oracle_energy_array(
            route, veh, cfg.seed, noise_sigma=cfg.noise_sigma, scale=factors[veh.powertrain], consts=cfg.oracle
        )
        labels = tuple(EnergyVector(float(f), float(e)) for f, e in arr)
        trips.append(LabeledTrip(route, veh, labels))
    meta = {
        "synth_config": cfg.to_dict(),
        "scale_factors": {pt.label: list(f) for pt, f in factors.items()},
        "summary": summary_statistics(trips),
    }
    return Dataset(network, vehicles, trips, meta)


def summary_statistics(trips: Sequence[LabeledTrip]) -> dict:
    """Trip-level consumption statistics per powertrain and channel."""
    out: dict = {"fuel_g": {}, "electric_wh": {}}
    for pt in Powertrain:
        tot = np.array([tr.trip_totals for tr in trips if tr.vehicle.powertrain == pt]).reshape(-1, 2)
        for ch, key, active in ((0, "fuel_g", pt.consumes_fuel), (1, "electric_wh", pt.consumes_electric)):
            if not active or len(tot) == 0:
                continue
            x = tot[:, ch]
            out[key][pt.label] = {
                "count": int(len(x)),
                "mean": float(x.mean()),
                "std": float(x.std(ddof=1)) if len(x) > 1 else 0.0,
                "min": float(x.min()),
                "50%": float(np.median(x)),
                "max": float(x.max()),
            }
    return out


def format_summary(summary: dict) -> str:
    lines = []
    for key, title in (("fuel_g", "Fuel Consumed (g)"), ("electric_wh", "Electric Consumption (Wh)")):
        lines.append(title)
        lines.append(f"{'Veh Type':>8} {'count':>8} {'mean':>11} {'std':>11} {'min':>9} {'50%':>11} {'max':>12}")
        for label, s in summary[key].items():
            lines.append(
                f"{label:>8} {s['count']:>8d} {s['mean']:>11.1f} {s['std']:>11.1f} "
                f"{s['min']:>9.1f} {s['50%']:>11.1f} {s['max']:>12.1f}"
            )
        lines.append("")
    return "\n".join(lines)
