"""Time the compiled RK4 kernel against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--states 20] [--periods 2] [--repeat 5]
"""
import argparse
import math
import time

import numpy as np

from liouflow import _kernels_py
from liouflow.flow import spin_boson_flow

try:
    from liouflow import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, default=20)
    ap.add_argument("--periods", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    fld = spin_boson_flow(1.0, 1 / 3, 1 / 3)
    rng = np.random.default_rng(0)
    X0 = rng.uniform(-0.5, 0.5, size=(args.states, 3))
    dt = 1e-3
    nsteps = int(math.ceil(args.periods * 2 * math.pi / dt))
    call = (fld.linear, fld.offset, X0, dt, nsteps, 100)

    t_py, out_py = best_of(lambda: _kernels_py.rk4_affine(*call), args.repeat)
    print(f"states={args.states} steps={nsteps}")
    print(f"python  {t_py:9.4f} s")
    if _ckernels is None:
        print("cython  (extension not built)")
        return
    t_cy, out_cy = best_of(lambda: np.asarray(_ckernels.rk4_affine(*call)), args.repeat)
    print(f"cython  {t_cy:9.4f} s  speedup {t_py / t_cy:5.1f}x")
    print(f"max |difference| = {np.max(np.abs(out_py - out_cy)):.3e}")


if __name__ == "__main__":
    main()
