"""On-disk dataset format.

A dataset directory holds ``trips.jsonl`` (one labeled trip per line with its
nested link array), ``vehicles.csv`` (flat catalog), ``network.json`` and
``metadata.json``. Floats are written with full round-trip precision.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .domain import EnergyVector, LabeledTrip, Link, RouteTrip, VehicleSpec
from .synthgen import Dataset, Network

TRIPS_FILE = "trips.jsonl"
VEHICLES_FILE = "vehicles.csv"
NETWORK_FILE = "network.json"
METADATA_FILE = "metadata.json"
VEHICLE_COLUMNS = ("vehicle_id", "powertrain", "vclass", *VehicleSpec.NUMERIC_FIELDS, "fuel_type", "automation_level")


class DataError(Exception):
    """Missing, malformed or inconsistent input data."""


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def route_to_dict(route: RouteTrip) -> dict:
    return {"trip_id": route.trip_id, "links": [lk.as_dict() for lk in route.links]}


def route_from_dict(d: dict) -> RouteTrip:
    try:
        links = d["links"]
        if not links:
            raise DataError("route has no links")
        return RouteTrip(int(d.get("trip_id", 0)), tuple(Link.from_dict(lk) for lk in links))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed route: {exc}") from exc


def trip_to_dict(trip: LabeledTrip) -> dict:
    d = route_to_dict(trip.route)
    d["vehicle_id"] = trip.vehicle.vehicle_id
    d["labels"] = [[e.fuel_g, e.electric_wh] for e in trip.labels]
    return d


def trip_from_dict(d: dict, vehicles: dict[int, VehicleSpec]) -> LabeledTrip:
    route = route_from_dict(d)
    vid = int(d["vehicle_id"])
    if vid not in vehicles:
        raise DataError(f"trip {route.trip_id} references unknown vehicle {vid}")
    labels = tuple(EnergyVector(float(f), float(e)) for f, e in d["labels"])
    if len(labels) != len(route):
        raise DataError(f"trip {route.trip_id}: {len(labels)} labels for {len(route)} links")
    return LabeledTrip(route, vehicles[vid], labels)


def vehicles_to_csv(vehicles) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VEHICLE_COLUMNS)
    for v in vehicles:
        d = v.as_dict()
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in VEHICLE_COLUMNS])
    return buf.getvalue()


def vehicles_from_csv(text: str) -> list[VehicleSpec]:
    rows = list(csv.DictReader(io.StringIO(text)))
    try:
        return [VehicleSpec.from_dict(r) for r in rows]
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed vehicle catalog: {exc}") from exc


def write_dataset(ds: Dataset, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / f for k, f in (("trips", TRIPS_FILE), ("vehicles", VEHICLES_FILE),
                                      ("network", NETWORK_FILE), ("metadata", METADATA_FILE))}
    with open(paths["trips"], "w") as fh:
        for tr in ds.trips:
            fh.write(dumps(trip_to_dict(tr)) + "\n")
    paths["vehicles"].write_text(vehicles_to_csv(ds.vehicles))
    paths["network"].write_bytes(ds.network.serialize())
    paths["metadata"].write_text(json.dumps(ds.metadata, sort_keys=True, indent=2))
    return paths


def read_vehicles(dataset_dir) -> list[VehicleSpec]:
    path = Path(dataset_dir) / VEHICLES_FILE
    if not path.exists():
        raise DataError(f"missing vehicle catalog {path}")
    return vehicles_from_csv(path.read_text())


def read_dataset(dataset_dir) -> Dataset:
    root = Path(dataset_dir)
    if not root.is_dir():
        raise DataError(f"dataset directory {root} does not exist")
    for f in (TRIPS_FILE, VEHICLES_FILE, NETWORK_FILE):
        if not (root / f).exists():
            raise DataError(f"dataset {root} is missing {f}")
    vehicles = read_vehicles(root)
    by_id = {v.vehicle_id: v for v in vehicles}
    trips = []
    with open(root / TRIPS_FILE) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                trips.append(trip_from_dict(json.loads(line), by_id))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{root / TRIPS_FILE}:{lineno}: {exc}") from exc
    try:
        network = Network.from_dict(json.loads((root / NETWORK_FILE).read_text()))
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"malformed network file: {exc}") from exc
    meta_path = root / METADATA_FILE
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return Dataset(network, vehicles, trips, meta)


@dataclass(frozen=True)
class Catalog:
    """Vehicle lookup by id for commands that only need the catalog."""

    vehicles: tuple[VehicleSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {v.vehicle_id: v for v in self.vehicles})

    def get(self, vid: int) -> VehicleSpec:
        try:
            return self._by_id[int(vid)]
        except KeyError:
            raise DataError(f"unknown vehicle id {vid}") from None

    def __len__(self) -> int:
        return len(self.vehicles)
