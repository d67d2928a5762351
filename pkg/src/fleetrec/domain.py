"""Core records shared across the package: links, trips, vehicles, energy labels."""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_GENERATED_LINKS = 283
VEHICLE_CLASSES = (3, 4, 6, 8)
FUEL_TYPES = ("electric", "gasoline", "diesel")
AUTOMATION_LEVELS = (0, 1, 2)
D1_DEFAULT = 20


class Powertrain(enum.IntEnum):
    BEV = 0
    CONV = 1
    ISG = 2
    HEV = 3
    PHEV = 4

    @property
    def consumes_fuel(self) -> bool:
        return self != Powertrain.BEV

    @property
    def consumes_electric(self) -> bool:
        return self in (Powertrain.BEV, Powertrain.PHEV)

    @property
    def label(self) -> str:
        return {0: "BEV", 1: "Conv", 2: "ISG", 3: "HEV", 4: "PHEV"}[int(self)]

    def channel_mask(self) -> np.ndarray:
        """(fuel, electric) activity mask as floats."""
        return np.array([float(self.consumes_fuel), float(self.consumes_electric)])

    @classmethod
    def parse(cls, value) -> "Powertrain":
        if isinstance(value, str) and not value.strip().lstrip("-").isdigit():
            key = value.strip().upper()
            for p in cls:
                if p.name == key or p.label.upper() == key:
                    return p
            raise ValueError(f"unknown powertrain {value!r}")
        return cls(int(value))


@dataclass(frozen=True)
class Link:
    link_id: int
    enter_time: float
    length: float
    stop_duration: float
    travel_duration: float
    avg_speed: float
    speed_limit: float

    RAW_FIELDS = (
        "link_id",
        "enter_time",
        "length",
        "stop_duration",
        "travel_duration",
        "avg_speed",
        "speed_limit",
    )

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.RAW_FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "Link":
        return cls(
            link_id=int(d["link_id"]),
            **{k: float(d[k]) for k in cls.RAW_FIELDS[1:]},
        )


@dataclass(frozen=True)
class RouteTrip:
    trip_id: int
    links: tuple[Link, ...]

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))

    def __len__(self) -> int:
        return len(self.links)

    @property
    def total_length(self) -> float:
        return float(sum(lk.length for lk in self.links))

    @property
    def miles(self) -> float:
        return self.total_length / 1609.344

    def link_ids(self) -> np.ndarray:
        return np.array([lk.link_id for lk in self.links], dtype=np.int64)

    def raw_matrix(self) -> np.ndarray:
        """T x 7 array of the raw link fields in canonical order."""
        return np.array(
            [[getattr(lk, f) for f in Link.RAW_FIELDS] for lk in self.links],
            dtype=np.float64,
        ).reshape(len(self.links), len(Link.RAW_FIELDS))


@dataclass(frozen=True)
class VehicleSpec:
    vehicle_id: int
    powertrain: Powertrain
    vclass: int
    curb_mass: float
    payload_mass: float
    battery_capacity: float
    frontal_area: float
    drag_coeff: float
    rolling_resist: float
    engine_power: float
    motor_power: float
    fuel_type: str
    automation_level: int

    NUMERIC_FIELDS = (
        "curb_mass",
        "payload_mass",
        "battery_capacity",
        "frontal_area",
        "drag_coeff",
        "rolling_resist",
        "engine_power",
        "motor_power",
    )

    def __post_init__(self):
        object.__setattr__(self, "powertrain", Powertrain.parse(self.powertrain))

    @property
    def total_mass(self) -> float:
        return self.curb_mass + self.payload_mass

    def encode(self) -> np.ndarray:
        """Fixed-length numeric vector (D1 = 20).

        Layout: powertrain one-hot (5), class one-hot (4), eight physical
        scalars, fuel-type code, automation one-hot over levels 1 and 2.
        """
        out = np.zeros(D1_DEFAULT)
        out[int(self.powertrain)] = 1.0
        out[5 + VEHICLE_CLASSES.index(self.vclass)] = 1.0
        for k, name in enumerate(self.NUMERIC_FIELDS):
            out[9 + k] = float(getattr(self, name))
        out[17] = float(FUEL_TYPES.index(self.fuel_type))
        if self.automation_level > 0:
            out[17 + self.automation_level] = 1.0
        return out

    def as_dict(self) -> dict:
        d = {
            "vehicle_id": self.vehicle_id,
            "powertrain": self.powertrain.label,
            "vclass": self.vclass,
        }
        d.update({k: getattr(self, k) for k in self.NUMERIC_FIELDS})
        d["fuel_type"] = self.fuel_type
        d["automation_level"] = self.automation_level
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleSpec":
        return cls(
            vehicle_id=int(d["vehicle_id"]),
            powertrain=Powertrain.parse(d["powertrain"]),
            vclass=int(d["vclass"]),
            fuel_type=str(d["fuel_type"]),
            automation_level=int(d["automation_level"]),
            **{k: float(d[k]) for k in cls.NUMERIC_FIELDS},
        )


VEHICLE_FEATURE_NAMES = (
    [f"pt_{p.label}" for p in Powertrain]
    + [f"class_{c}" for c in VEHICLE_CLASSES]
    + list(VehicleSpec.NUMERIC_FIELDS)
    + ["fuel_type_code", "automation_1", "automation_2"]
)


@dataclass(frozen=True)
class EnergyVector:
    fuel_g: float = 0.0
    electric_wh: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.fuel_g, self.electric_wh])

    def __add__(self, other: "EnergyVector") -> "EnergyVector":
        return EnergyVector(self.fuel_g + other.fuel_g, self.electric_wh + other.electric_wh)


def energy_array(labels: Sequence[EnergyVector]) -> np.ndarray:
    return np.array([[e.fuel_g, e.electric_wh] for e in labels], dtype=np.float64).reshape(-1, 2)


@dataclass(frozen=True)
class LabeledTrip:
    route: RouteTrip
    vehicle: VehicleSpec
    labels: tuple[EnergyVector, ...]
    _y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        y = energy_array(self.labels)
        y.setflags(write=False)
        object.__setattr__(self, "_y", y)

    @property
    def n_links(self) -> int:
        return len(self.route)

    @property
    def y(self) -> np.ndarray:
        """Per-link labels as a read-only T x 2 array (fuel, electric)."""
        return self._y

    @property
    def trip_totals(self) -> np.ndarray:
        return self._y.sum(axis=0)


def validate_trip(trip: LabeledTrip, *, max_links: int = MAX_GENERATED_LINKS, d1: int = D1_DEFAULT) -> list[str]:
    """List every invariant violation of a labeled trip; empty means valid."""
    out: list[str] = []
    route, veh = trip.route, trip.vehicle
    if len(route.links) < 1:
        out.append("route.links empty")
    elif len(route.links) > max_links:
        out.append(f"route.links length {len(route.links)} exceeds {max_links} (warning)")
    for t, lk in enumerate(route.links):
        if not lk.length > 0:
            out.append(f"links[{t}].length must be > 0")
        if not lk.stop_duration >= 0:
            out.append(f"links[{t}].stop_duration must be >= 0")
        if not lk.travel_duration > 0:
            out.append(f"links[{t}].travel_duration must be > 0")
        if not lk.avg_speed >= 0:
            out.append(f"links[{t}].avg_speed must be >= 0")
        if not lk.speed_limit > 0:
            out.append(f"links[{t}].speed_limit must be > 0")
        if lk.length > 0 and lk.travel_duration > 0:
            implied = lk.length / lk.travel_duration
            if abs(lk.avg_speed - implied) > 0.2 * implied:
                out.append(f"links[{t}].avg_speed inconsistent with length/travel_duration (warning)")

    if veh.vclass not in VEHICLE_CLASSES:
        out.append(f"vehicle.vclass {veh.vclass} not in {VEHICLE_CLASSES}")
    if veh.fuel_type not in FUEL_TYPES:
        out.append(f"vehicle.fuel_type {veh.fuel_type!r} unknown")
    if veh.automation_level not in AUTOMATION_LEVELS:
        out.append(f"vehicle.automation_level {veh.automation_level} not in {AUTOMATION_LEVELS}")
    for name in VehicleSpec.NUMERIC_FIELDS:
        if getattr(veh, name) < 0:
            out.append(f"vehicle.{name} negative")
    if veh.powertrain == Powertrain.BEV and veh.engine_power != 0:
        out.append("vehicle.engine_power nonzero for BEV")
    if veh.powertrain == Powertrain.CONV:
        if veh.battery_capacity != 0:
            out.append("vehicle.battery_capacity nonzero for Conv")
        if veh.motor_power != 0:
            out.append("vehicle.motor_power nonzero for Conv")
    if len(veh.encode()) != d1:
        out.append(f"vehicle encoding length {len(veh.encode())} != {d1}")

    if len(trip.labels) != len(route.links):
        out.append("labels length mismatch")
    pt = veh.powertrain
    for t, e in enumerate(trip.labels):
        if e.fuel_g < 0:
            out.append(f"labels[{t}].fuel_g negative")
        if e.electric_wh < 0:
            out.append(f"labels[{t}].electric_wh negative")
        if not pt.consumes_fuel and e.fuel_g != 0:
            out.append(f"labels[{t}].fuel_g nonzero for {pt.label}")
        if not pt.consumes_electric and e.electric_wh != 0:
            out.append(f"labels[{t}].electric_wh nonzero for {pt.label}")
    return out


def partition_by_length(trips: Iterable[LabeledTrip]) -> dict[int, list[LabeledTrip]]:
    groups: dict[int, list[LabeledTrip]] = defaultdict(list)
    for tr in trips:
        groups[tr.n_links].append(tr)
    return dict(sorted(groups.items()))


def partition_by_powertrain(trips: Iterable[LabeledTrip]) -> dict[Powertrain, list[LabeledTrip]]:
    groups: dict[Powertrain, list[LabeledTrip]] = defaultdict(list)
    for tr in trips:
        groups[tr.vehicle.powertrain].append(tr)
    return dict(sorted(groups.items()))
