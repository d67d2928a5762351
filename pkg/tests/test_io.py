import json

import numpy as np
import pytest

from fleetrec.io import (
    Catalog,
    DataError,
    read_dataset,
    route_from_dict,
    route_to_dict,
    vehicles_from_csv,
    vehicles_to_csv,
    write_dataset,
)


def test_dataset_roundtrip(tmp_path, small_dataset):
    write_dataset(small_dataset, tmp_path)
    back = read_dataset(tmp_path)
    assert back.vehicles == small_dataset.vehicles
    assert len(back.trips) == len(small_dataset.trips)
    for a, b in zip(back.trips, small_dataset.trips):
        assert a.route == b.route and a.vehicle == b.vehicle
        assert a.y.tobytes() == b.y.tobytes()
    assert back.network.serialize() == small_dataset.network.serialize()
    assert back.metadata == json.loads(json.dumps(small_dataset.metadata))


def test_vehicle_csv_roundtrip(small_dataset):
    assert vehicles_from_csv(vehicles_to_csv(small_dataset.vehicles)) == small_dataset.vehicles


def test_route_errors():
    with pytest.raises(DataError):
        route_from_dict({"trip_id": 1, "links": []})
    with pytest.raises(DataError):
        route_from_dict({"links": [{"link_id": 0}]})


def test_missing_and_malformed_files(tmp_path, small_dataset):
    with pytest.raises(DataError, match="does not exist"):
        read_dataset(tmp_path / "nope")
    write_dataset(small_dataset, tmp_path)
    lines = (tmp_path / "trips.jsonl").read_text().splitlines()
    (tmp_path / "trips.jsonl").write_text("\n".join(lines[:2] + ["{not json"]) + "\n")
    with pytest.raises(DataError, match=":3:"):
        read_dataset(tmp_path)
    bad = json.loads(lines[0])
    bad["vehicle_id"] = 999
    (tmp_path / "trips.jsonl").write_text(json.dumps(bad) + "\n")
    with pytest.raises(DataError, match="unknown vehicle 999"):
        read_dataset(tmp_path)
    (tmp_path / "network.json").unlink()
    with pytest.raises(DataError, match="network.json"):
        read_dataset(tmp_path)


def test_catalog_lookup(small_dataset):
    cat = Catalog(tuple(small_dataset.vehicles))
    assert cat.get(3) == small_dataset.vehicles[3]
    with pytest.raises(DataError):
        cat.get(12345)


def test_route_dict_preserves_floats(small_dataset):
    r = small_dataset.trips[0].route
    back = route_from_dict(json.loads(json.dumps(route_to_dict(r))))
    assert np.array_equal(back.raw_matrix(), r.raw_matrix())
