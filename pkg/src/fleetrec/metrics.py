"""Trip-level error metrics, per-link-count curves and AAPE percentile tables.

Percentile convention: nearest rank, i.e. the value at sorted position
``ceil(q/100 * n) - 1`` (clamped to 0), so tables reproduce bit-exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import EnergyVector, LabeledTrip, Powertrain

CHANNELS = ("fuel", "electric")
DEFAULT_QUANTILES = (25, 50, 75, 90, 95)
FUEL_POWERTRAINS = (Powertrain.CONV, Powertrain.ISG, Powertrain.HEV, Powertrain.PHEV)
ELECTRIC_POWERTRAINS = (Powertrain.BEV, Powertrain.PHEV)


def _pair(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(truth, dtype=np.float64).ravel()
    p = np.asarray(pred, dtype=np.float64).ravel()
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} truths vs {p.size} predictions")
    if t.size == 0:
        raise ValueError("metrics of an empty sample are undefined")
    return t, p


def mae_rmse(truth, pred) -> tuple[float, float]:
    t, p = _pair(truth, pred)
    e = np.abs(t - p)
    return float(e.mean()), float(math.sqrt(np.mean(e * e)))


def ape(truth, pred) -> np.ndarray:
    """Absolute percentage errors on the nonzero-truth subset."""
    t, p = _pair(truth, pred)
    nz = t != 0
    return np.abs((p[nz] - t[nz]) / t[nz])


def aape(truth, pred) -> np.ndarray:
    return np.arctan(ape(truth, pred))


def mape_maape(truth, pred) -> tuple[float | None, float | None]:
    """(MAPE, MAAPE) over samples with nonzero truth; ``None`` when there are none."""
    a = ape(truth, pred)
    if a.size == 0:
        return None, None
    return float(a.mean()), float(np.arctan(a).mean())


def nearest_rank(values, q: float) -> float:
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("percentile of an empty sample")
    k = max(int(math.ceil(q / 100.0 * v.size)) - 1, 0)
    return float(v[min(k, v.size - 1)])


@dataclass(frozen=True)
class ChannelMetrics:
    n: int
    mae: float
    rmse: float
    mape: float | None
    maape: float | None


def channel_metrics(truth, pred) -> ChannelMetrics:
    mae, rmse = mae_rmse(truth, pred)
    mape, maape = mape_maape(truth, pred)
    return ChannelMetrics(int(np.size(truth)), mae, rmse, mape, maape)


def _as_pred_array(preds, n: int) -> np.ndarray:
    if len(preds) and isinstance(preds[0], EnergyVector):
        arr = np.array([[e.fuel_g, e.electric_wh] for e in preds])
    else:
        arr = np.asarray(preds, dtype=np.float64)
    arr = arr.reshape(-1, 2)
    if arr.shape[0] != n:
        raise ValueError(f"{arr.shape[0]} predictions for {n} trips")
    return arr


def _consumes(pt: Powertrain, c: int) -> bool:
    return pt.consumes_fuel if c == 0 else pt.consumes_electric


def _arrays(trips: Sequence[LabeledTrip], preds):
    truth = np.array([tr.trip_totals for tr in trips]).reshape(-1, 2)
    pred = _as_pred_array(preds, len(trips))
    pts = np.array([int(tr.vehicle.powertrain) for tr in trips], dtype=np.int64)
    lens = np.array([tr.n_links for tr in trips], dtype=np.int64)
    return truth, pred, pts, lens


@dataclass(frozen=True)
class LinkCountPoint:
    powertrain: str
    channel: str
    n_links: int
    n_trips: int
    mae: float
    rmse: float
    maape: float | None


def by_link_count(trips: Sequence[LabeledTrip], preds) -> list[LinkCountPoint]:
    """Per-powertrain, per-channel metrics grouped by exact link count.

    Only channels a powertrain consumes are reported; empty groups are omitted.
    """
    truth, pred, pts, lens = _arrays(trips, preds)
    out = []
    for pt in Powertrain:
        for c, cname in enumerate(CHANNELS):
            if not _consumes(pt, c):
                continue
            sel_pt = pts == int(pt)
            for l in np.unique(lens[sel_pt]):
                sel = sel_pt & (lens == l)
                m = channel_metrics(truth[sel, c], pred[sel, c])
                out.append(LinkCountPoint(pt.label, cname, int(l), m.n, m.mae, m.rmse, m.maape))
    return out


def aape_percentiles(trips: Sequence[LabeledTrip], preds, quantiles=DEFAULT_QUANTILES) -> dict[str, dict[int, float | None]]:
    """Nearest-rank AAPE percentiles over the pooled fuel and electric sets."""
    truth, pred, pts, _ = _arrays(trips, preds)
    table = {}
    for c, cname, members in ((0, "fuel", FUEL_POWERTRAINS), (1, "electric", ELECTRIC_POWERTRAINS)):
        sel = np.isin(pts, [int(p) for p in members])
        vals = aape(truth[sel, c], pred[sel, c]) if sel.any() else np.zeros(0)
        table[cname] = {int(q): (nearest_rank(vals, q) if vals.size else None) for q in quantiles}
    return table


@dataclass
class EvalReport:
    n_trips: int
    by_powertrain: dict[str, dict[str, ChannelMetrics]]
    pooled: dict[str, ChannelMetrics | None]
    link_series: list[LinkCountPoint]
    percentiles: dict[str, dict[int, float | None]]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_trips": self.n_trips,
            "by_powertrain": {pt: {c: asdict(m) for c, m in chans.items()} for pt, chans in self.by_powertrain.items()},
            "pooled": {c: (asdict(m) if m is not None else None) for c, m in self.pooled.items()},
            "link_series": [asdict(p) for p in self.link_series],
            "aape_percentiles": {c: {str(q): v for q, v in t.items()} for c, t in self.percentiles.items()},
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        def f(x, spec):
            return "-" if x is None else format(x, spec)

        lines = [f"trips evaluated: {self.n_trips}", "",
                 f"{'powertrain':<11}{'channel':<10}{'n':>7}{'MAE':>14}{'RMSE':>14}{'MAPE':>9}{'MAAPE':>9}"]
        rows = [(pt, c, m) for pt, chans in self.by_powertrain.items() for c, m in chans.items()]
        rows += [("all", c, m) for c, m in self.pooled.items() if m is not None]
        for pt, c, m in rows:
            lines.append(f"{pt:<11}{c:<10}{m.n:>7d}{m.mae:>14.3f}{m.rmse:>14.3f}{f(m.mape, '9.4f'):>9}{f(m.maape, '9.4f'):>9}")
        lines += ["", "AAPE percentiles (nearest rank)"]
        for c, t in self.percentiles.items():
            lines.append(f"  {c:<9}" + "  ".join(f"p{q}={f(v, '.4f')}" for q, v in t.items()))
        return "\n".join(lines) + "\n"

    def link_series_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["powertrain", "channel", "n_links", "n_trips", "mae", "rmse", "maape"])
        for p in self.link_series:
            w.writerow([p.powertrain, p.channel, p.n_links, p.n_trips, repr(p.mae), repr(p.rmse),
                        "" if p.maape is None else repr(p.maape)])
        return buf.getvalue()

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"text": out / "report.txt", "json": out / "report.json", "csv": out / "by_link_count.csv"}
        paths["text"].write_text(self.to_text())
        paths["json"].write_text(self.to_json())
        paths["csv"].write_text(self.link_series_csv())
        return paths


def evaluate(trips: Sequence[LabeledTrip], preds, quantiles=DEFAULT_QUANTILES, meta: dict | None = None) -> EvalReport:
    if not trips:
        raise ValueError("no trips to evaluate")
    truth, pred, pts, _ = _arrays(trips, preds)
    by_pt: dict[str, dict[str, ChannelMetrics]] = {}
    for pt in Powertrain:
        sel = pts == int(pt)
        if not sel.any():
            continue
        by_pt[pt.label] = {cname: channel_metrics(truth[sel, c], pred[sel, c])
                           for c, cname in enumerate(CHANNELS) if _consumes(pt, c)}
    pooled = {}
    for c, cname, members in ((0, "fuel", FUEL_POWERTRAINS), (1, "electric", ELECTRIC_POWERTRAINS)):
        sel = np.isin(pts, [int(p) for p in members])
        pooled[cname] = channel_metrics(truth[sel, c], pred[sel, c]) if sel.any() else None
    return EvalReport(len(trips), by_pt, pooled, by_link_count(trips, pred), aape_percentiles(trips, pred, quantiles), meta or {})
