"""Fleet deployment: vehicles (rows) to trips (columns) at minimum total TCO."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .domain import EnergyVector, LabeledTrip, RouteTrip, VehicleSpec
from .energymodel.network import predict_candidates
from .energymodel.params import ModelParams
from .tco import CostConfig, tco_per_mile

MODES = ("per-mile", "per-trip")
BRUTE_FORCE_MAX = 8


@dataclass(frozen=True)
class CostMatrix:
    values: np.ndarray  # (n vehicles, m trips)
    vehicle_ids: tuple[int, ...] = ()
    trip_ids: tuple[int, ...] = ()
    mode: str = "per-mile"

    def __post_init__(self):
        w = np.array(self.values, dtype=np.float64)
        if w.ndim != 2 or w.size == 0:
            raise ValueError("cost matrix must be a nonempty 2-D array")
        if not np.isfinite(w).all():
            raise ValueError("cost matrix has non-finite entries")
        n, m = w.shape
        if n < m:
            raise ValueError(f"need at least as many vehicles as trips (n={n} < m={m})")
        w.setflags(write=False)
        object.__setattr__(self, "values", w)
        object.__setattr__(self, "vehicle_ids", tuple(self.vehicle_ids) or tuple(range(n)))
        object.__setattr__(self, "trip_ids", tuple(self.trip_ids) or tuple(range(m)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _as_matrix(costs) -> CostMatrix:
    return costs if isinstance(costs, CostMatrix) else CostMatrix(costs)


@dataclass(frozen=True)
class Assignment:
    vehicle_of_trip: tuple[int, ...]  # row index per trip column
    total_cost: float
    u: np.ndarray | None = field(default=None, compare=False)
    v: np.ndarray | None = field(default=None, compare=False)

    def pairs(self) -> list[tuple[int, int]]:
        """(trip column, vehicle row) pairs."""
        return list(enumerate(self.vehicle_of_trip))


def _total(w: np.ndarray, rows: Sequence[int]) -> float:
    return math.fsum(w[r, j] for j, r in enumerate(rows))


def brute_force_assign(costs) -> Assignment:
    """Exact optimum by enumeration; the lexicographically first optimum wins ties."""
    w = _as_matrix(costs).values
    n, m = w.shape
    if m > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force refused for m={m} > {BRUTE_FORCE_MAX}")
    best, best_rows = math.inf, None
    for rows in itertools.permutations(range(n), m):
        t = _total(w, rows)
        if t < best:
            best, best_rows = t, rows
    return Assignment(tuple(int(r) for r in best_rows), best)


def greedy_assign(costs) -> Assignment:
    """Trips in order, each taking its cheapest still-free vehicle."""
    w = _as_matrix(costs).values
    n, m = w.shape
    free = np.ones(n, dtype=bool)
    rows = []
    for j in range(m):
        col = np.where(free, w[:, j], np.inf)
        r = int(np.argmin(col))
        free[r] = False
        rows.append(r)
    return Assignment(tuple(rows), _total(w, rows))


def _lexicographic_refine(a: np.ndarray, row_of_col: np.ndarray, u, v, m: int) -> np.ndarray:
    """Move each real column, in order, to its lowest-index row among optimal matchings.

    Works on the tight-edge graph of the dual solution; each swap re-routes an
    alternating path so the matching stays perfect and tight.
    """
    N = a.shape[0]
    tol = 1e-12 * max(1.0, float(np.abs(a).max()))
    tight = np.abs(a - u[:, None] - v[None, :]) <= tol
    col_of_row = np.empty(N, dtype=np.int64)
    col_of_row[row_of_col] = np.arange(N)
    fixed_row = np.zeros(N, dtype=bool)
    for j in range(m):
        for i in np.flatnonzero(tight[:, j]):
            if i == row_of_col[j]:
                break
            if fixed_row[i]:
                continue
            # free column c_i (held by i) must reach the released row r_old
            r_old, c_start = row_of_col[j], col_of_row[i]
            parent = {c_start: None}
            stack, found = [c_start], None
            while stack and found is None:
                c = stack.pop()
                for r in np.flatnonzero(tight[:, c]):
                    if fixed_row[r] or r == i:
                        continue
                    if r == r_old:
                        found = (c, r)
                        break
                    c2 = col_of_row[r]
                    if c2 > j and c2 not in parent:
                        parent[c2] = (c, r)
                        stack.append(c2)
            if found is None:
                continue
            new = row_of_col.copy()
            new[j] = i
            c, r = found
            while True:
                new[c] = r
                step = parent[c]
                if step is None:
                    break
                c, r = step
            row_of_col = new
            col_of_row[row_of_col] = np.arange(N)
            break
        fixed_row[row_of_col[j]] = True
    return row_of_col


def pad_square(w: np.ndarray) -> tuple[np.ndarray, float]:
    """Pad extra trip columns with a constant above every real entry."""
    n, m = w.shape
    big = float(np.abs(w).max()) * m + 1.0
    if n == m:
        return w.copy(), big
    return np.hstack([w, np.full((n, n - m), big)]), big


def kuhn_munkres(costs) -> Assignment:
    """Minimum-cost assignment of every trip to a distinct vehicle.

    The returned ``u`` (per vehicle) and ``v`` (per padded column) satisfy
    ``u[i] + v[j] <= w[i, j]`` with equality on the chosen pairs. Among optimal
    assignments the one whose vehicle sequence (trip 0, trip 1, ...) is
    lexicographically smallest is returned.
    """
    cm = _as_matrix(costs)
    w = cm.values
    n, m = w.shape
    a, _ = pad_square(w)
    row_of_col, u, v = kernels.hungarian(a)
    rows = np.asarray(row_of_col, dtype=np.int64)
    base = _total(w, rows[:m])
    refined = _lexicographic_refine(a, rows.copy(), u, v, m)
    if _total(w, refined[:m]) <= base:
        rows = refined
    return Assignment(tuple(int(r) for r in rows[:m]), _total(w, rows[:m]), u, v)


def dual_feasible(costs, assignment: Assignment, tol: float = 1e-9) -> bool:
    """Check u_i + v_j <= w_ij on the padded matrix and tightness on chosen pairs."""
    w, _ = pad_square(_as_matrix(costs).values)
    scale = tol * max(1.0, float(np.abs(w).max()))
    slack = w - assignment.u[:, None] - assignment.v[None, :]
    if (slack < -scale).any():
        return False
    return all(abs(slack[r, j]) <= scale for j, r in assignment.pairs())


def _routes(trips) -> list[RouteTrip]:
    return [t.route if isinstance(t, LabeledTrip) else t for t in trips]


def build_cost_matrix(trips, vehicles: Sequence[VehicleSpec], params: ModelParams, cost_cfg: CostConfig,
                      mode: str = "per-mile") -> CostMatrix:
    """Entry (i, j): TCO of vehicle i on trip j ($/mi, or $ for the trip in per-trip mode)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    routes = _routes(trips)
    vehicles = list(vehicles)
    if len(vehicles) < len(routes):
        raise ValueError(f"need at least as many vehicles as trips (n={len(vehicles)} < m={len(routes)})")
    w = np.empty((len(vehicles), len(routes)))
    for j, route in enumerate(routes):
        totals = predict_candidates(route, vehicles, params).sum(axis=1)
        for i, veh in enumerate(vehicles):
            e = EnergyVector(float(totals[i, 0]), float(totals[i, 1]))
            t = tco_per_mile(veh, e, route.miles, cost_cfg).total_per_mile
            w[i, j] = t * route.miles if mode == "per-trip" else t
    return CostMatrix(w, tuple(v.vehicle_id for v in vehicles), tuple(r.trip_id for r in routes), mode)


def assignment_records(cm: CostMatrix, assignment: Assignment) -> list[dict]:
    return [
        {"trip_id": cm.trip_ids[j], "vehicle_id": cm.vehicle_ids[r], "cost": float(cm.values[r, j])}
        for j, r in assignment.pairs()
    ]


def format_assignment(cm: CostMatrix, assignment: Assignment) -> str:
    unit = "$/mi" if cm.mode == "per-mile" else "$"
    lines = [f"{'trip':>8}  {'vehicle':>8}  {unit:>12}"]
    for rec in assignment_records(cm, assignment):
        lines.append(f"{rec['trip_id']:>8}  {rec['vehicle_id']:>8}  {rec['cost']:>12.6f}")
    lines.append(f"{'total':>8}  {'':>8}  {assignment.total_cost:>12.6f}")
    return "\n".join(lines) + "\n"


# Three vehicles over three trips. Trip 0's cheapest vehicle is the electric
# truck, yet the fleet optimum sends it to trip 2.
GREEDY_TRAP_FIXTURE = np.array([
    [1.0, 2.0, 3.0],
    [1.2, 2.5, 6.0],
    [1.5, 2.2, 7.0],
])
