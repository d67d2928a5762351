import json
import math

import numpy as np
import pytest
from conftest import labeled, make_route, make_vehicle

from fleetrec.domain import EnergyVector, Powertrain
from fleetrec.metrics import (
    aape,
    aape_percentiles,
    by_link_count,
    channel_metrics,
    evaluate,
    mae_rmse,
    mape_maape,
    nearest_rank,
)


def test_worked_example():
    truth, pred = [1.0, 2.0, 0.0], [2.0, 2.0, 1.0]
    mae, rmse = mae_rmse(truth, pred)
    assert mae == pytest.approx(2 / 3) and rmse == pytest.approx(math.sqrt(2 / 3))
    mape, maape = mape_maape(truth, pred)
    # the zero-truth sample is excluded from the percentage errors
    assert mape == pytest.approx(0.5) and maape == pytest.approx(math.pi / 8)
    m = channel_metrics(truth, pred)
    assert m.n == 3 and m.maape == maape


def test_all_zero_truth_gives_none():
    assert mape_maape([0.0, 0.0], [1.0, 0.0]) == (None, None)


def test_aape_is_bounded():
    v = aape([1.0, 1.0], [1e12, -1e12])
    assert (v < math.pi / 2).all() and (v > 1.5).all()


def test_input_errors():
    with pytest.raises(ValueError, match="mismatch"):
        mae_rmse([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        mae_rmse([], [])


def test_nearest_rank():
    vals = np.arange(1.0, 11.0)[::-1]
    assert [nearest_rank(vals, q) for q in (0, 25, 50, 90, 95, 100)] == [1, 3, 5, 9, 10, 10]
    assert nearest_rank([4.0], 50) == 4.0
    with pytest.raises(ValueError):
        nearest_rank([], 50)


def _fleet():
    trips, preds = [], []
    specs = [(Powertrain.CONV, 2, (10.0, 0.0), (12.0, 0.0)),
             (Powertrain.CONV, 3, (20.0, 0.0), (15.0, 0.0)),
             (Powertrain.BEV, 2, (0.0, 50.0), (0.0, 40.0)),
             (Powertrain.PHEV, 3, (5.0, 30.0), (5.0, 33.0))]
    for k, (pt, T, tot, pr) in enumerate(specs):
        route = make_route(speeds=[10.0] * T, trip_id=k)
        per = [(tot[0] / T, tot[1] / T)] * T
        trips.append(labeled(route, make_vehicle(pt, vid=k), per))
        preds.append(EnergyVector(*pr))
    return trips, preds


def test_report_groups_and_pools():
    trips, preds = _fleet()
    rep = evaluate(trips, preds)
    assert set(rep.by_powertrain) == {"Conv", "BEV", "PHEV"}
    assert set(rep.by_powertrain["BEV"]) == {"electric"}
    assert rep.by_powertrain["Conv"]["fuel"].mae == pytest.approx(3.5)
    assert rep.pooled["fuel"].n == 3 and rep.pooled["electric"].n == 2
    assert rep.pooled["electric"].mae == pytest.approx(6.5)


def test_link_series_and_percentiles():
    trips, preds = _fleet()
    series = by_link_count(trips, preds)
    keys = {(p.powertrain, p.channel, p.n_links) for p in series}
    assert keys == {("Conv", "fuel", 2), ("Conv", "fuel", 3), ("BEV", "electric", 2),
                    ("PHEV", "fuel", 3), ("PHEV", "electric", 3)}
    pct = aape_percentiles(trips, preds, quantiles=(50, 100))
    fuel = sorted([math.atan(0.2), math.atan(0.25), 0.0])
    assert pct["fuel"][50] == pytest.approx(fuel[1]) and pct["fuel"][100] == pytest.approx(fuel[2])
    assert pct["electric"][100] == pytest.approx(math.atan(0.2))


def test_report_serialization(tmp_path):
    trips, preds = _fleet()
    rep = evaluate(trips, preds, meta={"split": "val"})
    paths = rep.write(tmp_path)
    d = json.loads(paths["json"].read_text())
    assert d["n_trips"] == 4 and d["meta"] == {"split": "val"}
    assert "fuel" in paths["text"].read_text()
    rows = paths["csv"].read_text().strip().splitlines()
    assert rows[0].startswith("powertrain,channel,n_links") and len(rows) == 6
    assert rep.to_json() == evaluate(trips, preds, meta={"split": "val"}).to_json()


def test_prediction_count_checked():
    trips, preds = _fleet()
    with pytest.raises(ValueError):
        evaluate(trips, preds[:-1])
    with pytest.raises(ValueError):
        evaluate([], [])


def test_link_series_recombines_to_global_mae(small_dataset):
    rng = np.random.default_rng(0)
    trips = [t for t in small_dataset.trips if t.vehicle.powertrain == Powertrain.CONV]
    preds = np.array([t.trip_totals * rng.uniform(0.8, 1.2) for t in trips])
    series = by_link_count(trips, preds)
    fuel = [p for p in series if p.channel == "fuel"]
    recombined = math.fsum(p.n_trips * p.mae for p in fuel) / len(trips)
    glob = evaluate(trips, preds).by_powertrain["Conv"]["fuel"].mae
    assert recombined == pytest.approx(glob, rel=1e-9)
