import numpy as np
import pytest

from fleetrec.domain import EnergyVector, LabeledTrip, Link, Powertrain, RouteTrip, VehicleSpec
from fleetrec.energymodel import ModelConfig, TrainConfig, build_model, init_params
from fleetrec.features import default_schema
from fleetrec.synthgen import SynthConfig, generate_dataset

SMALL_SYNTH = SynthConfig(seed=11, n_links=40, trip_count=160, calibration_trips=60, length_median=6.0, length_sigma=0.7)
TINY_TRAIN = dict(hidden=6, emb_dim=3, deep_hidden=(5, 4))


def make_link(link_id=0, t=8 * 3600.0, length=500.0, stop=0.0, speed=10.0, limit=15.0):
    return Link(link_id, t, length, stop, length / speed, speed, limit)


def make_route(speeds=(10.0, 12.0, 9.0), trip_id=0, lengths=None, limit=15.0):
    lengths = lengths or [400.0 + 50 * k for k in range(len(speeds))]
    links, clock = [], 8 * 3600.0
    for k, (v, L) in enumerate(zip(speeds, lengths)):
        links.append(make_link(k, clock, L, 0.0, v, limit))
        clock += L / v
    return RouteTrip(trip_id, tuple(links))


def make_vehicle(pt=Powertrain.CONV, vid=0, vclass=6, automation=0):
    pt = Powertrain(pt)
    battery = {Powertrain.BEV: 200.0, Powertrain.PHEV: 10.0, Powertrain.HEV: 3.0, Powertrain.ISG: 1.0}.get(pt, 0.0)
    engine = 0.0 if pt == Powertrain.BEV else 250.0
    motor = {Powertrain.BEV: 250.0, Powertrain.CONV: 0.0}.get(pt, 60.0)
    fuel = "electric" if pt == Powertrain.BEV else "diesel"
    return VehicleSpec(vid, pt, vclass, 9000.0, 3000.0, battery, 7.5, 0.6, 0.007, engine, motor, fuel, automation)


def labeled(route, vehicle, values):
    return LabeledTrip(route, vehicle, tuple(EnergyVector(*v) for v in values))


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(SMALL_SYNTH)


@pytest.fixture(scope="session")
def tiny_params(small_dataset):
    cfg = TrainConfig(**TINY_TRAIN, seed=3)
    return build_model(small_dataset.trips, cfg, n_vehicles=len(small_dataset.vehicles),
                       n_links=small_dataset.network.n_links)


def randomized(params, seed=0, scale=0.3):
    """Copy with every tensor redrawn, so no ReLU sits exactly at a kink."""
    p = params.copy()
    rng = np.random.default_rng(seed)
    for k, v in p.tensors.items():
        v[...] = rng.normal(0.0, scale, size=v.shape)
    return p


def small_model(d=4, hidden=2, emb=3, deep=(5, 4), n_vehicles=3, n_links=5, act="relu"):
    schema = default_schema()
    cfg = ModelConfig(d=d, n_vehicles=n_vehicles, n_links=n_links, hidden=hidden, emb_dim=emb, deep_hidden=deep,
                      output_activation=act)
    return init_params(cfg, schema)
