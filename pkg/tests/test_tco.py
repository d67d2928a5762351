import json
from dataclasses import replace

import pytest
from conftest import make_vehicle

from fleetrec.domain import EnergyVector, Powertrain
from fleetrec.tco import (
    CostConfig,
    MissingComponentCost,
    capital_per_mile,
    component_costs,
    default_cost_config,
    energy_cost_per_mile,
    load_cost_config,
    msrp,
    tco_per_mile,
)


def _flat(**kw):
    base = dict(
        component_costs={"glider": {"6": 60000.0}, "engine_per_kw": 60.0, "motor_per_kw": 30.0,
                         "battery_per_kwh": 150.0, "automation": {"0": 0.0, "1": 2500.0}},
        energy_prices={"diesel": 4.0, "gasoline": 3.5, "electricity": 0.15},
        annual_vmt=[50000.0],
        ownership_years=10,
        discount_rate=0.0,
        resale_fraction=0.0,
    )
    base.update(kw)
    return CostConfig(**base)


def _year_loop(vehicle, energy, miles, cfg):
    """Spreadsheet-style oracle: one row per ownership year."""
    price = 0.0
    cc = cfg.component_costs
    price += cc["glider"][str(vehicle.vclass)]
    price += cc["engine_per_kw"] * vehicle.engine_power if vehicle.engine_power else 0.0
    price += cc["motor_per_kw"] * vehicle.motor_power if vehicle.motor_power else 0.0
    price += cc["battery_per_kwh"] * vehicle.battery_capacity if vehicle.battery_capacity else 0.0
    if vehicle.automation_level:
        price += cc["automation"][str(vehicle.automation_level)]
    price *= cfg.rpe_factor
    spend, disc_miles, df = 0.0, 0.0, 1.0
    for y in range(cfg.ownership_years):
        df /= 1.0 + cfg.discount_rate
        vmt = cfg.annual_vmt[min(y, len(cfg.annual_vmt) - 1)]
        cost = 0.0
        if energy.fuel_g:
            series = cfg.energy_prices[vehicle.fuel_type]
            p = series[min(y, len(series) - 1)] if isinstance(series, list) else series
            cost += energy.fuel_g / cfg.grams_per_gallon[vehicle.fuel_type] / miles * vmt * p
        if energy.electric_wh:
            series = cfg.energy_prices["electricity"]
            p = series[min(y, len(series) - 1)] if isinstance(series, list) else series
            cost += energy.electric_wh / 1000.0 / miles * vmt * p
        spend += cost * df
        disc_miles += vmt * df
    capital = (price - cfg.resale_fraction * price * df) / disc_miles
    return price, capital, spend / disc_miles


def test_msrp_examples():
    cfg = _flat(rpe_factor=1.2)
    conv = make_vehicle(Powertrain.CONV)
    assert msrp(conv, cfg) == pytest.approx((60000 + 60 * 250) * 1.2)
    assert msrp(conv, _flat(rpe_factor=1.0)) == pytest.approx(75000.0)
    bev = replace(make_vehicle(Powertrain.BEV), battery_capacity=300.0)
    conv_b = replace(conv, motor_power=0.0)
    delta = 1.2 * (150 * 300 + 30 * bev.motor_power - 60 * conv_b.engine_power)
    assert msrp(bev, cfg) - msrp(conv_b, cfg) == pytest.approx(delta)


def test_missing_component_named():
    cfg = _flat(component_costs={"glider": {"6": 1.0}})
    with pytest.raises(MissingComponentCost, match="engine_per_kw"):
        msrp(make_vehicle(Powertrain.CONV), cfg)
    with pytest.raises(MissingComponentCost, match="glider"):
        component_costs(make_vehicle(vclass=8), _flat())
    with pytest.raises(MissingComponentCost, match="automation"):
        component_costs(make_vehicle(automation=2), _flat())


def test_energy_cost_trivial_cases():
    cfg = _flat()
    veh = make_vehicle(Powertrain.PHEV)
    assert energy_cost_per_mile(EnergyVector(0, 0), 3.0, veh, cfg) == 0.0
    e = EnergyVector(3336.0, 2000.0)
    assert energy_cost_per_mile(e, 2.0, veh, cfg) == pytest.approx((1.0 * 4.0 + 2.0 * 0.15) / 2.0, rel=1e-12)
    with pytest.raises(ValueError):
        energy_cost_per_mile(e, 0.0, veh, cfg)


def test_flat_schedules_are_discount_invariant():
    veh, e = make_vehicle(Powertrain.CONV), EnergyVector(5000.0, 0.0)
    a = energy_cost_per_mile(e, 4.0, veh, _flat())
    b = energy_cost_per_mile(e, 4.0, veh, _flat(discount_rate=0.05))
    assert a == pytest.approx(b, rel=1e-12)


def test_capital_trivial_case():
    cfg = _flat(ownership_years=1, annual_vmt=[7.0])
    veh = make_vehicle(Powertrain.CONV)
    assert capital_per_mile(veh, cfg) == pytest.approx(msrp(veh, cfg) / 7.0)


@pytest.mark.parametrize("pt", list(Powertrain))
def test_year_loop_oracle_on_bundled_fixture(pt):
    cfg = default_cost_config()
    veh = replace(make_vehicle(pt, automation=1), fuel_type="electric" if pt == Powertrain.BEV else "diesel")
    e = EnergyVector(0.0 if pt == Powertrain.BEV else 9000.0, 25000.0 if pt.consumes_electric else 0.0)
    price, cap, en = _year_loop(veh, e, 6.5, cfg)
    b = tco_per_mile(veh, e, 6.5, cfg)
    assert b.msrp == pytest.approx(price, abs=1e-6)
    assert b.capital_per_mile == pytest.approx(cap, abs=1e-6)
    assert b.energy_per_mile == pytest.approx(en, abs=1e-6)
    assert b.total_per_mile == b.capital_per_mile + b.energy_per_mile
    assert min(b.as_dict().values()) >= 0


def test_monotone_and_scale_consistent():
    cfg = default_cost_config()
    veh = make_vehicle(Powertrain.PHEV)
    lo = tco_per_mile(veh, EnergyVector(1000.0, 5000.0), 5.0, cfg).total_per_mile
    hi = tco_per_mile(veh, EnergyVector(1100.0, 5000.0), 5.0, cfg).total_per_mile
    assert hi > lo
    doubled = tco_per_mile(veh, EnergyVector(1000.0, 5000.0), 5.0, cfg.scaled(2.0)).total_per_mile
    assert doubled == pytest.approx(2 * lo, rel=1e-12)
    pricier = cfg.replace(energy_prices={k: [p * 1.1 for p in v] for k, v in cfg.energy_prices.items()})
    assert tco_per_mile(veh, EnergyVector(1000.0, 5000.0), 5.0, pricier).total_per_mile > lo


def test_config_validation_and_io(tmp_path):
    with pytest.raises(ValueError):
        _flat(rpe_factor=0.9)
    with pytest.raises(ValueError):
        _flat(resale_fraction=1.0)
    with pytest.raises(ValueError):
        _flat(energy_prices={"diesel": 0.0})
    with pytest.raises(ValueError):
        CostConfig.from_dict({**_flat().to_dict(), "insurance": 5})
    cfg = default_cost_config()
    assert cfg.fixture_version == 1 and cfg.rpe_factor == 1.2
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_cost_config(path) == cfg
