"""Time the numba and numpy kernel backends side by side.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is called once untimed (numba compilation), then timed as the
best of ``--repeat`` runs. Outputs of the two backends are also compared.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fleetrec import kernels


def _cases(rng):
    T, B, H = 40, 64, 128
    xw = rng.normal(size=(T, B, 4 * H))
    Wh = rng.normal(scale=0.1, size=(H, 4 * H))
    hs, cs, gates = kernels.lstm_forward_numpy(xw, Wh)
    dhs = rng.normal(size=(T, B, H))
    cost = rng.random((60, 60))
    L = 200
    length = rng.uniform(50, 3000, L)
    speed = rng.uniform(3, 30, L)
    stop = rng.exponential(10, L)
    veh = np.array([4, 12000.0, 0.007, 5.0, 0.6, 0.32, 0.85, 0.3, 2e7, 9000.0, 1.0])
    return {
        "lstm_forward": (xw, Wh),
        "lstm_backward": (dhs, gates, cs, Wh),
        "hungarian": (cost,),
        "oracle_trip": (length, speed, stop, 0.0, veh),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<15}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}{'max |diff|':>13}  default")
    for name, inputs in _cases(rng).items():
        f_np = getattr(kernels, f"{name}_numpy")
        t_np = min(timeit.repeat(lambda: f_np(*inputs), number=1, repeat=args.repeat)) * 1e3
        if kernels.HAVE_NUMBA:
            f_nb = getattr(kernels, f"{name}_numba")
            f_nb(*inputs)
            t_nb = min(timeit.repeat(lambda: f_nb(*inputs), number=1, repeat=args.repeat)) * 1e3
            diff = _max_diff(f_np(*inputs), f_nb(*inputs))
            print(f"{name:<15}{t_np:>11.2f}{t_nb:>11.2f}{t_np / t_nb:>8.1f}x{diff:>13.2e}  {kernels.backend(name)}")
        else:
            print(f"{name:<15}{t_np:>11.2f}{'-':>11}{'-':>9}{'-':>13}")


if __name__ == "__main__":
    main()
