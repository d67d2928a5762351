"""Hot numeric kernels with a numba path and a pure-numpy path.

``FLEETREC_NUMBA`` selects the backend: ``0``/``false``/``off``/``no`` runs
pure numpy everywhere, ``all`` runs numba everywhere, and the default uses
numba only for the loop-bound kernels (Hungarian, oracle). The LSTM
recurrence stays on numpy by default because its cost is dominated by
elementwise tanh, which numpy evaluates with SIMD and numba with scalar libm
calls (see ``benchmarks/bench_kernels.py``). Both paths compute the same
quantities; the tests cross-check them to 1e-12.

Array layouts are time-major (T, B, ...) so that each recurrence step works
on a contiguous slab.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def _env_wants_numba() -> bool:
    flag = os.environ.get("FLEETREC_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


USE_NUMBA = HAVE_NUMBA and _env_wants_numba()
NUMBA_EVERYWHERE = USE_NUMBA and os.environ.get("FLEETREC_NUMBA", "").strip().lower() == "all"
_NUMPY_PREFERRED = frozenset({"lstm_forward", "lstm_backward"})

GRAVITY = 9.81
AIR_DENSITY = 1.2
LHV_GASOLINE_J_PER_G = 43_400.0
J_PER_WH = 3600.0


def backend(kernel: str | None = None) -> str:
    """Backend in use, overall or for one kernel name."""
    if kernel is None:
        return "numba" if USE_NUMBA else "numpy"
    if USE_NUMBA and (NUMBA_EVERYWHERE or kernel not in _NUMPY_PREFERRED):
        return "numba"
    return "numpy"


# ---------------------------------------------------------------------------
# LSTM recurrence
# ---------------------------------------------------------------------------


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_forward_numpy(xw, Wh):
    """Run the recurrence given precomputed input projections.

    xw: (T, B, 4H) = X @ Wx + b, gate order (i, f, g, o).
    Returns hidden states (T, B, H), cell states (T, B, H) and post-activation
    gates (T, B, 4H).
    """
    T, B, H4 = xw.shape
    H = H4 // 4
    hs = np.empty((T, B, H))
    cs = np.empty((T, B, H))
    gates = np.empty((T, B, H4))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        z = xw[t] + h @ Wh
        gt = gates[t]
        gt[:, : 2 * H] = _sigmoid(z[:, : 2 * H])
        gt[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
        gt[:, 3 * H :] = _sigmoid(z[:, 3 * H :])
        c = gt[:, H : 2 * H] * c + gt[:, :H] * gt[:, 2 * H : 3 * H]
        h = gt[:, 3 * H :] * np.tanh(c)
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


def lstm_backward_numpy(dhs, gates, cs, Wh):
    """Backpropagate through time.

    dhs: (T, B, H) gradient of the loss w.r.t. each emitted hidden state.
    Returns gradient w.r.t. gate pre-activations, (T, B, 4H).
    """
    T, B, H = dhs.shape
    dz = np.empty((T, B, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    WhT = np.ascontiguousarray(Wh.T)
    for t in range(T - 1, -1, -1):
        g = gates[t]
        i, f, gg, o = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
        c_prev = cs[t - 1] if t > 0 else np.zeros((B, H))
        tc = np.tanh(cs[t])
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dzt = dz[t]
        dzt[:, :H] = dc * gg * i * (1.0 - i)
        dzt[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dzt[:, 2 * H : 3 * H] = dc * i * (1.0 - gg * gg)
        dzt[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = dzt @ WhT
    return dz


# ---------------------------------------------------------------------------
# Kuhn-Munkres core (square, minimisation)
# ---------------------------------------------------------------------------


def hungarian_numpy(cost):
    """Shortest-augmenting-path Hungarian method on a square matrix.

    Returns (row_of_col, u, v) with u[i] + v[j] <= cost[i, j] everywhere and
    equality on matched pairs. Ties go to the lowest column index.
    """
    n = cost.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = cost
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = a[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    return p[1:] - 1, u[1:], v[1:]


# ---------------------------------------------------------------------------
# Energy oracle per trip
# ---------------------------------------------------------------------------


def oracle_trip_numpy(length, speed, stop, v0, veh):
    """Noise-free per-link (fuel_g, electric_wh) plus the PHEV soc trace.

    veh is a float64 vector, see ``synthgen._oracle_vehicle_vector`` for the
    layout. soc is returned in Wh after each link.
    """
    (pt, mass, crr, cda, regen, eff_fuel, eff_elec, idle_g_s, usable_j, cap_wh, auto_fac) = veh[:11]
    pt = int(pt)
    T = length.shape[0]
    v_prev = np.empty(T)
    v_prev[0] = v0
    v_prev[1:] = speed[:-1]
    e_roll = mass * GRAVITY * crr * length
    e_aero = 0.5 * AIR_DENSITY * cda * speed * speed * length
    dke = 0.5 * mass * (speed * speed - v_prev * v_prev) * auto_fac
    electrified = pt in (0, 3, 4)
    inertial = np.where(dke >= 0.0, dke, -regen * (-dke) if electrified else 0.0)
    e_trac = np.maximum(e_roll + e_aero + inertial, 0.0)
    out = np.zeros((T, 2))
    soc = np.full(T, cap_wh)
    idle = idle_g_s * stop
    if pt == 0:
        out[:, 1] = e_trac / eff_elec / J_PER_WH
        soc = cap_wh - np.cumsum(out[:, 1])
    elif pt in (1, 3):
        out[:, 0] = e_trac / eff_fuel / LHV_GASOLINE_J_PER_G + idle
    elif pt == 2:
        out[:, 0] = e_trac / eff_fuel / LHV_GASOLINE_J_PER_G
    else:
        demand = e_trac / eff_elec
        cum = np.cumsum(demand)
        drawn = np.minimum(cum, usable_j)
        elec = np.diff(np.concatenate(([0.0], drawn)))
        short = demand - elec
        engine_on = cum > usable_j
        out[:, 1] = elec / J_PER_WH
        out[:, 0] = np.where(engine_on, short * eff_elec / eff_fuel / LHV_GASOLINE_J_PER_G + idle, 0.0)
        soc = cap_wh - drawn / J_PER_WH
    return out, soc


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _njit = numba.njit(cache=True, fastmath=False)

    @_njit
    def _sig_scalar(z):
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    @_njit
    def lstm_forward_numba(xw, Wh):
        T, B, H4 = xw.shape
        H = H4 // 4
        hs = np.empty((T, B, H))
        cs = np.empty((T, B, H))
        gates = np.empty((T, B, H4))
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        for t in range(T):
            z = xw[t] + np.dot(h, Wh)
            for b in range(B):
                for k in range(H):
                    ig = _sig_scalar(z[b, k])
                    fg = _sig_scalar(z[b, H + k])
                    gg = np.tanh(z[b, 2 * H + k])
                    og = _sig_scalar(z[b, 3 * H + k])
                    gates[t, b, k] = ig
                    gates[t, b, H + k] = fg
                    gates[t, b, 2 * H + k] = gg
                    gates[t, b, 3 * H + k] = og
                    cc = fg * c[b, k] + ig * gg
                    c[b, k] = cc
                    h[b, k] = og * np.tanh(cc)
                    cs[t, b, k] = cc
                    hs[t, b, k] = h[b, k]
        return hs, cs, gates

    @_njit
    def lstm_backward_numba(dhs, gates, cs, Wh):
        T, B, H = dhs.shape
        dz = np.empty((T, B, 4 * H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        WhT = np.ascontiguousarray(Wh.T)
        dzt = np.empty((B, 4 * H))
        for t in range(T - 1, -1, -1):
            for b in range(B):
                for k in range(H):
                    ig = gates[t, b, k]
                    fg = gates[t, b, H + k]
                    gg = gates[t, b, 2 * H + k]
                    og = gates[t, b, 3 * H + k]
                    c_prev = cs[t - 1, b, k] if t > 0 else 0.0
                    tc = np.tanh(cs[t, b, k])
                    dh = dhs[t, b, k] + dh_next[b, k]
                    dc = dc_next[b, k] + dh * og * (1.0 - tc * tc)
                    dzt[b, k] = dc * gg * ig * (1.0 - ig)
                    dzt[b, H + k] = dc * c_prev * fg * (1.0 - fg)
                    dzt[b, 2 * H + k] = dc * ig * (1.0 - gg * gg)
                    dzt[b, 3 * H + k] = dh * tc * og * (1.0 - og)
                    dc_next[b, k] = dc * fg
            dz[t] = dzt
            dh_next = np.dot(dzt, WhT)
        return dz

    @_njit
    def hungarian_numba(cost):
        n = cost.shape[0]
        u = np.zeros(n + 1)
        v = np.zeros(n + 1)
        p = np.zeros(n + 1, dtype=np.int64)
        way = np.zeros(n + 1, dtype=np.int64)
        minv = np.empty(n + 1)
        used = np.zeros(n + 1, dtype=np.bool_)
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            minv[:] = np.inf
            used[:] = False
            while True:
                used[j0] = True
                i0 = p[j0]
                delta = np.inf
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
        return p[1:] - 1, u[1:], v[1:]

    @_njit
    def oracle_trip_numba(length, speed, stop, v0, veh):
        pt = int(veh[0])
        mass = veh[1]
        crr = veh[2]
        cda = veh[3]
        regen = veh[4]
        eff_fuel = veh[5]
        eff_elec = veh[6]
        idle_g_s = veh[7]
        usable_j = veh[8]
        cap_wh = veh[9]
        auto_fac = veh[10]
        T = length.shape[0]
        out = np.zeros((T, 2))
        soc = np.empty(T)
        electrified = pt == 0 or pt == 3 or pt == 4
        drawn = 0.0
        cum = 0.0
        soc_wh = cap_wh
        v_prev = v0
        for t in range(T):
            v = speed[t]
            e_roll = mass * GRAVITY * crr * length[t]
            e_aero = 0.5 * AIR_DENSITY * cda * v * v * length[t]
            dke = 0.5 * mass * (v * v - v_prev * v_prev) * auto_fac
            if dke >= 0.0:
                inertial = dke
            elif electrified:
                inertial = -regen * (-dke)
            else:
                inertial = 0.0
            e_trac = e_roll + e_aero + inertial
            if e_trac < 0.0:
                e_trac = 0.0
            idle = idle_g_s * stop[t]
            if pt == 0:
                wh = e_trac / eff_elec / J_PER_WH
                out[t, 1] = wh
                soc_wh -= wh
            elif pt == 1 or pt == 3:
                out[t, 0] = e_trac / eff_fuel / LHV_GASOLINE_J_PER_G + idle
            elif pt == 2:
                out[t, 0] = e_trac / eff_fuel / LHV_GASOLINE_J_PER_G
            else:
                demand = e_trac / eff_elec
                cum += demand
                new_drawn = cum if cum < usable_j else usable_j
                elec = new_drawn - drawn
                short = demand - elec
                out[t, 1] = elec / J_PER_WH
                if cum > usable_j:
                    out[t, 0] = short * eff_elec / eff_fuel / LHV_GASOLINE_J_PER_G + idle
                drawn = new_drawn
                soc_wh = cap_wh - drawn / J_PER_WH
            soc[t] = soc_wh
            v_prev = v
        return out, soc


def _pick(name):
    return globals()[f"{name}_{backend(name)}"]


def lstm_forward(xw, Wh):
    return _pick("lstm_forward")(np.ascontiguousarray(xw), np.ascontiguousarray(Wh))


def lstm_backward(dhs, gates, cs, Wh):
    return _pick("lstm_backward")(
        np.ascontiguousarray(dhs), gates, cs, np.ascontiguousarray(Wh)
    )


def hungarian(cost):
    return _pick("hungarian")(np.ascontiguousarray(cost, dtype=np.float64))


def oracle_trip(length, speed, stop, v0, veh):
    return _pick("oracle_trip")(
        np.ascontiguousarray(length, dtype=np.float64),
        np.ascontiguousarray(speed, dtype=np.float64),
        np.ascontiguousarray(stop, dtype=np.float64),
        float(v0),
        np.ascontiguousarray(veh, dtype=np.float64),
    )
