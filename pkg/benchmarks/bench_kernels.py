"""Wall-clock comparison of the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from cyclostab import (
    SpatialGrid,
    counterexample_system,
    mapk_system,
    simulate_ode,
    simulate_pde,
    two_compartment_system,
)
from cyclostab import _backend


def ode_lumped(backend):
    simulate_ode(counterexample_system(), [1.2, 1.2, 1.2], 20.0, dt=1e-3, cadence=0.1, backend=backend)


def ode_compartmental(backend):
    x0 = [0.4945, 0.3844, 0.0877, 0.0, 0.0, 0.0]
    simulate_ode(two_compartment_system(), x0, 10.0, dt=1e-3, cadence=0.1, backend=backend)


def pde_mapk(backend):
    sys = mapk_system(h=0.01).shifted((0.55006345, 0.282093, 0.12718883))
    grid = SpatialGrid(51)
    psi0 = 0.1 * np.vstack([np.cos(np.pi * grid.nodes), grid.nodes, -grid.nodes**2])
    simulate_pde(sys, grid, psi0, 2.0, cadence=0.5, backend=backend)


def jacobi(backend):
    kern = _backend.get(backend)
    rng = np.random.default_rng(0)
    for _ in range(200):
        M = rng.normal(size=(8, 8))
        kern.jacobi_eigh(M + M.T)


CASES = {
    "ODE, 3 states, 20k RK4 steps": ode_lumped,
    "ODE, 2 compartments, 10k steps": ode_compartmental,
    "PDE, 3 x 51 nodes, t = 2": pde_mapk,
    "Jacobi, 200 symmetric 8x8": jacobi,
}


def best_of(fun, backend, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fun(backend)
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3, help="runs per case; the best is reported")
    args = parser.parse_args(argv)
    try:
        _backend.get("compiled")
    except ImportError:
        print("compiled kernels are not built; run 'pip install -e . --no-build-isolation' first")
        return 1
    print(f"{'case':34s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for name, fun in CASES.items():
        fast = best_of(fun, "compiled", args.repeat)
        slow = best_of(fun, "python", args.repeat)
        print(f"{name:34s} {fast:9.4f}s {slow:9.4f}s {slow / fast:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
