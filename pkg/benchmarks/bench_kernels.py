"""Compare the compiled kernels with the numpy fallback.

Run ``python benchmarks/bench_kernels.py``.  Each kernel is timed on both
backends with identical inputs; the outputs are compared as well, so a
speedup is only reported for results that agree.
"""

import argparse
import time

import numpy as np

from tanksep import _pycore
from tanksep.tank import LW_WORK_ARRAYS, TankConfig, gaussian_bump

try:
    from tanksep import _core
except ImportError:  # extension not built
    _core = None


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def lw_case(nx, nsub):
    cfg = TankConfig(nx=nx, ny=nx)
    bump = gaussian_bump(cfg, amplitude=0.05)
    shape = (nx + 2, nx + 2)
    P = np.zeros(shape)
    sub_dt = cfg.dt / 15

    def run(mod):
        h = np.zeros(shape)
        h[1:-1, 1:-1] = bump.h
        m = np.zeros(shape)
        n = np.zeros(shape)
        work = np.empty(LW_WORK_ARRAYS * h.size)
        status = mod.lw_advance(h, m, n, P, sub_dt, cfg.dx, cfg.dy, cfg.g, cfg.b, nsub, 10.0, work)
        return status[0], h

    return f"lw_advance {nx}x{nx}, {nsub} substeps", nsub, run


def rk4_case(n_steps):
    x0 = np.array([1.0, 1.0, 1.0])

    def run(mod):
        out, last, bad = mod.rk4_attractor(3, x0, 1e-4, n_steps, 300)
        return bad, last

    return f"rk4_attractor Lorenz, {n_steps} steps", n_steps, run


def lyap_case(n_qr):
    x0 = np.array([-5.0, -6.0, 20.0])

    def run(mod):
        acc, trace, last, bad = mod.lyapunov_attractor(3, x0, 1e-4, 0, n_qr, 1000)
        return bad, acc

    return f"lyapunov_attractor Lorenz, {n_qr * 1000} steps", n_qr * 1000, run


def l96_case(n_steps):
    x0 = 8.0 + 0.01 * np.random.default_rng(0).standard_normal(40)

    def run(mod):
        out, last, bad = mod.rk4_lorenz96(x0, 8.0, 1e-3, n_steps, 30)
        return bad, last

    return f"rk4_lorenz96 d=40, {n_steps} steps", n_steps, run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not available; timing the fallback only")
    scale = 1 if args.quick else 4
    cases = [lw_case(64, 5 * scale), lw_case(128, 5 * scale), rk4_case(2000 * scale),
             lyap_case(2 * scale), l96_case(1000 * scale)]
    print(f"{'kernel':42s} {'python/unit':>13s} {'compiled/unit':>14s} {'speedup':>8s} {'max diff':>10s}")
    for name, units, run in cases:
        t_py, (st_py, out_py) = best_of(lambda: run(_pycore), args.repeat)
        line = f"{name:42s} {t_py / units * 1e6:10.2f} us"
        if _core is not None:
            t_c, (st_c, out_c) = best_of(lambda: run(_core), args.repeat)
            diff = float(np.max(np.abs(np.asarray(out_py) - np.asarray(out_c))))
            if st_py != st_c:
                diff = float("nan")
            line += f" {t_c / units * 1e6:11.2f} us {t_py / t_c:7.1f}x {diff:10.2e}"
        print(line)


if __name__ == "__main__":
    main()
