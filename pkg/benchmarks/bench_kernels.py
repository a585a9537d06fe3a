"""Compare the compiled trajectory kernels against the numpy reference.

Times the two hot loops (homodyne Euler-Maruyama step, photodetection RK4
step) on the desk-scale collective model, plus an end-to-end trajectory, for
both backends.  Run:

    python benchmarks/bench_kernels.py [--n-tls 4] [--steps 20000]
"""

import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

from openqb import DickeConfig, IntegratorOptions, build_dicke
from openqb._kernels import get_backend
from openqb.trajectories import UnravelingKind, _build_context, _simulate_one
from openqb.thermo import BatterySpectrum


def bench_kernel(kern, a, c, psi0, h, n_steps, rng):
    d = psi0.shape[0]
    scratch = np.empty((6, d), dtype=np.complex128)

    psi = psi0.copy()
    dw = rng.standard_normal(n_steps) * np.sqrt(h)
    dy = np.empty(n_steps)
    t0 = time.perf_counter()
    kern.hd_interval(a, c, psi, h, dw, dy, scratch)
    t_hd = (time.perf_counter() - t0) / n_steps

    psi = psi0.copy()
    t0 = time.perf_counter()
    kern.pd_interval(a, psi, h, n_steps, -1.0, scratch)
    t_pd = (time.perf_counter() - t0) / n_steps
    return t_hd, t_pd


def bench_trajectory(model, backend_name, n_repeats=3):
    import openqb._kernels as kernels

    opts = IntegratorOptions.from_grid(t_max=3.0, n_samples=31, dt=5e-4)
    spec = BatterySpectrum.from_levels(model.h_battery_spectrum, "full")
    ctx = _build_context(model, opts, UnravelingKind.homodyne(0.0), 1, spec)
    saved = kernels._impl
    kernels._impl = get_backend(backend_name)
    try:
        t0 = time.perf_counter()
        for i in range(n_repeats):
            _simulate_one(ctx, i)
        return (time.perf_counter() - t0) / n_repeats
    finally:
        kernels._impl = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-tls", type=int, default=4)
    parser.add_argument("--steps", type=int, default=20000)
    args = parser.parse_args()

    model = build_dicke(DickeConfig(omega=1.0, lambda_bar=1.0, kappa=0.5,
                                    n_tls=args.n_tls))
    d = model.dim
    h_mat = model.h_total.matrix
    c = np.ascontiguousarray(model.jump_op.matrix)
    a = np.ascontiguousarray(-1j * h_mat - 0.5 * (c.conj().T @ c))
    psi0 = model.initial_state.amplitudes
    rng = np.random.default_rng(0)

    backends = ["python"]
    try:
        get_backend("compiled")
        backends.insert(0, "compiled")
    except ImportError:
        print("compiled backend not built; benchmarking the fallback only")

    print(f"dimension d = {d} (N = {args.n_tls}, N_ph = {model.config.n_ph}), "
          f"{args.steps} steps per kernel timing\n")
    print(f"{'backend':10s} {'hd us/step':>12s} {'pd-rk4 us/step':>15s} {'hd traj s':>11s}")
    results = {}
    with threadpool_limits(limits=1):
        for name in backends:
            kern = get_backend(name)
            t_hd, t_pd = bench_kernel(kern, a, c, psi0, 5e-4, args.steps, rng)
            t_traj = bench_trajectory(model, name)
            results[name] = (t_hd, t_pd, t_traj)
            print(f"{name:10s} {1e6 * t_hd:12.2f} {1e6 * t_pd:15.2f} {t_traj:11.3f}")

    if len(results) == 2:
        c_, p_ = results["compiled"], results["python"]
        print(f"\nspeedup    {p_[0] / c_[0]:12.1f}x {p_[1] / c_[1]:14.1f}x "
              f"{p_[2] / c_[2]:10.1f}x")


if __name__ == "__main__":
    main()
