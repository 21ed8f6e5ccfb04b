"""End-to-end acceptance checks, one test per criterion.

A pass/fail line per criterion is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from cyclostab import (
    LinearCyclicSystem,
    LyapunovWeights,
    NonlinearCyclicSystem,
    ScalarFn,
    SpatialGrid,
    certify_gains,
    check_conditions,
    counterexample_system,
    detect_oscillation,
    diagonal_scaling,
    equilibrium_solve,
    gain_matrix,
    jensen_lower_bound,
    mapk_system,
    monitor_decrease,
    normalize,
    rhs,
    secant_threshold,
    simulate_ode,
    solve_lyapunov,
    storage_pde,
    verify_modal_series,
)
from cyclostab.lyapunov import state_hull
from cyclostab.scenarios import builtin, run_scenario
from cyclostab.secant import lyapunov_residual
from families import random_compartmental, random_loop_gains, saturating
from oracles import shifted_cube_roots

LITERAL_RATE = 0.9
# the storage-function argument guarantees half of lambda_min |y|^2
GUARANTEED_RATE = LITERAL_RATE * 0.5


def acceptance(label, title):
    return pytest.mark.acceptance(label, title)


# ---------------------------------------------------------------- 1


@acceptance("1", "secant test agrees with positive diagonal-scaling margin (n = 3..8)")
def test_secant_equivalence_random_gains():
    start = time.perf_counter()
    rng = np.random.default_rng(20240101)
    disagreements = []
    boundary_worst = 0.0
    for n in range(3, 9):
        threshold = secant_threshold(n)
        for _ in range(500):
            gains = 10.0 ** rng.uniform(-2.0, 2.0, n)
            sc = diagonal_scaling(gains)
            if abs(sc.verdict.product - threshold) <= 1e-9 * threshold:
                boundary_worst = max(boundary_worst, abs(sc.lambda_min))
                continue
            if sc.verdict.holds != (sc.lambda_min > 0):
                disagreements.append((n, gains.tolist(), sc.lambda_min))
        # explicit boundary vectors: rescale random vectors onto the threshold
        for _ in range(20):
            gains = np.exp(rng.normal(size=n))
            gains *= (threshold / gains.prod()) ** (1.0 / n)
            sc = diagonal_scaling(gains)
            boundary_worst = max(boundary_worst, abs(sc.lambda_min))
    elapsed = time.perf_counter() - start
    print(f"\n[1] disagreements={len(disagreements)} boundary max|lambda|={boundary_worst:.2e} time={elapsed:.2f}s")
    assert not disagreements
    assert boundary_worst <= 1e-7
    assert elapsed < 10.0


# ---------------------------------------------------------------- 2


@acceptance("2", "counterexample: limit cycle coexists with a locally stable equilibrium")
def test_counterexample_coexistence():
    start = time.perf_counter()
    result = run_scenario(builtin("counterexample"))
    lin = result.report["linearization"]
    assert lin["a"] == [1.0, 1.0, 1.0] and lin["b"][:2] == [1.0, 1.0]
    assert lin["b"][2] == pytest.approx(7.5, rel=1e-12)
    assert lin["product"] == pytest.approx(7.5, rel=1e-12)
    assert lin["holds"] and lin["threshold"] == 8.0
    # the linearization's characteristic roots, (s + 1)^3 = -7.5, lie in the left half plane
    assert max(r.real for r in shifted_cube_roots(7.5)) < 0
    # away from the equilibrium the sector gain is far larger, so no global certificate exists
    assert not result.report["interval_conditions"]["holds"]

    sys = counterexample_system()
    cycle = result.trajectory
    assert result.scenario.t_end == 300.0 and cycle.times[0] == 0.0
    reports = [detect_oscillation(cycle, c, window=0.5) for c in range(3)]
    for rep in reports:
        assert rep.oscillating and rep.trend == "sustained" and rep.peaks >= 10

    local = simulate_ode(sys, [1.001, 1.0, 1.0], 600.0, dt=1e-3, cadence=1.0)
    dist = float(np.max(np.abs(local.final - 1.0)))
    elapsed = time.perf_counter() - start
    print(f"\n[2] product={lin['product']:.6g} peaks={[r.peaks for r in reports]} "
          f"period={reports[0].period:.4f} local error={dist:.2e} time={elapsed:.2f}s")
    assert dist < 1e-6
    assert elapsed < 30.0


# ---------------------------------------------------------------- 3


@acceptance("3", "two weakly coupled compartments oscillate with equal period, unequal amplitude")
def test_two_compartment_oscillation():
    start = time.perf_counter()
    result = run_scenario(builtin("two-compartment"))
    traj = result.trajectory
    chi = detect_oscillation(traj, 0, window=0.5)
    eta = detect_oscillation(traj, 3, window=0.5)
    elapsed = time.perf_counter() - start
    ratio = chi.amplitude / eta.amplitude
    print(f"\n[3] periods={chi.period:.4f},{eta.period:.4f} amplitudes={chi.amplitude:.4g},{eta.amplitude:.4g} "
          f"ratio={ratio:.1f} time={elapsed:.2f}s")
    assert result.scenario.system.flux[0][0].params == (1e-4,)
    assert chi.oscillating and eta.oscillating
    assert abs(chi.period - eta.period) <= 0.1 * min(chi.period, eta.period)
    assert max(ratio, 1 / ratio) >= 2.0
    assert elapsed < 60.0


# ---------------------------------------------------------------- 4


@acceptance("4", "per-mode Lyapunov norms respect the perturbation bound, all modes Hurwitz")
def test_modal_bounds():
    start = time.perf_counter()
    rng = np.random.default_rng(44)
    systems = [LinearCyclicSystem((1.0, 1.0, 1.0), (1.0, 1.0, 1.0), (1.0, 1.0, 1.0))]
    while len(systems) < 21:
        n = int(rng.integers(3, 7))
        a = rng.uniform(0.2, 3.0, n)
        c = rng.uniform(0.05, 2.0, n)
        gains = random_loop_gains(rng, n, rng.uniform(0.05, 0.99))
        # gains_1 = b_n / a_1, gains_i = b_(i-1) / a_i
        b = np.empty(n)
        b[n - 1] = gains[0] * a[0]
        b[: n - 1] = gains[1:] * a[1:]
        sys = LinearCyclicSystem(a, b, c)
        assert normalize(sys).gains.product == pytest.approx(gains.prod())
        systems.append(sys)
    checked = 0
    for sys in systems:
        rep = verify_modal_series(sys, 50)
        assert rep.all_hurwitz
        for mode in rep.modes:
            if mode.bound is not None:
                checked += 1
                assert mode.p_norm <= mode.bound, (sys, mode.k)
    elapsed = time.perf_counter() - start
    print(f"\n[4] systems={len(systems)} bounds checked={checked} time={elapsed:.2f}s")
    assert elapsed < 10.0


# ---------------------------------------------------------------- 5 and 6 share the MAPK run


@pytest.fixture(scope="module")
def mapk_run():
    start = time.perf_counter()
    result = run_scenario(builtin("mapk-pde"))
    return result, time.perf_counter() - start


@acceptance("5", "MAPK reaction-diffusion converges to its reference equilibrium")
def test_mapk_convergence(mapk_run):
    result, elapsed = mapk_run
    traj = result.trajectory
    sc = result.scenario
    assert sc.grid.N == 101 and sc.t_end == 200.0
    final_max = np.abs(traj.final).max(axis=1)
    eq = equilibrium_solve(mapk_system())
    reference = np.array([0.5501, 0.2821, 0.1272])
    print(f"\n[5] max|psi(200)|={final_max.tolist()} equilibrium={eq.x.tolist()} time={elapsed:.2f}s")
    assert np.all(final_max < 1e-3)
    assert np.all(np.abs(eq.x - reference) <= 5e-5)
    assert elapsed < 120.0


def _random_compartmental_runs():
    rng = np.random.default_rng(2024)
    runs = []
    for _ in range(20):
        comp, gains = random_compartmental(rng)
        x0 = rng.uniform(-2.0, 2.0, comp.m * comp.n)
        traj = simulate_ode(comp, x0, 50.0, dt=0.01, cadence=0.01)
        runs.append((comp, gains, traj))
    return runs


@pytest.fixture(scope="module")
def decrease_runs(mapk_run):
    """Monitor inputs: the MAPK field trajectory plus 20 random compartmental runs."""
    result, _ = mapk_run
    sc = result.scenario
    x_bar = np.array(result.report["equilibrium"])
    shifted = sc.system.shifted(x_bar)
    gains, _ = certify_gains(shifted, result.trajectory, sc.grid)
    items = [(result.trajectory, LyapunovWeights.from_gains(gains), shifted.g, sc.grid)]
    for comp, sector_gains, traj in _random_compartmental_runs():
        cond = check_conditions(comp, state_hull(traj, comp.n), samples=401)
        assert cond.holds
        assert all(s <= g * (1 + 1e-9) for s, g in zip(cond.gamma, sector_gains))
        assert 2 <= comp.m <= 5
        items.append((traj, LyapunovWeights.from_gains(sector_gains), comp.base.g, None))
    return items


def _pooled_rate(items, coefficient):
    ok = total = 0
    per_run = []
    for traj, weights, g, grid in items:
        rep = monitor_decrease(traj, weights, g, grid, rate_coefficient=coefficient)
        mask = rep.informative
        ok += int(np.sum(rep.rate_ok[mask]))
        total += int(np.sum(mask))
        per_run.append(rep.rate_fraction)
    return ok / total, total, per_run


@acceptance("6a", "Lyapunov function never increases (MAPK field + 20 compartmental runs)")
def test_lyapunov_never_increases(decrease_runs):
    violations = 0
    for traj, weights, g, grid in decrease_runs:
        violations += len(monitor_decrease(traj, weights, g, grid).violations)
    print(f"\n[6a] trajectories={len(decrease_runs)} violations={violations}")
    assert violations == 0


@acceptance("6b", "decrease rate reaches 0.9 lambda_min |y|^2 on >= 95% of samples")
def test_decrease_rate_literal(decrease_runs):
    fraction, samples, per_run = _pooled_rate(decrease_runs, LITERAL_RATE)
    print(f"\n[6b] coefficient={LITERAL_RATE} pooled fraction={fraction:.3f} over {samples} samples; "
          f"MAPK run {per_run[0]:.3f}, compartmental min {min(per_run[1:]):.3f}")
    assert fraction >= 0.95


@acceptance("6c", "decrease rate reaches 0.9 x (1/2) lambda_min |y|^2 on >= 95% of samples")
def test_decrease_rate_guaranteed(decrease_runs):
    fraction, samples, per_run = _pooled_rate(decrease_runs, GUARANTEED_RATE)
    print(f"\n[6c] coefficient={GUARANTEED_RATE} pooled fraction={fraction:.3f} over {samples} samples; "
          f"min per run {min(per_run):.3f}")
    assert fraction >= 0.95


# ---------------------------------------------------------------- 7


def _jensen_catalog():
    x_bar = equilibrium_solve(mapk_system()).x
    mapk = mapk_system().shifted(x_bar)
    counter = counterexample_system().shifted((1.0, 1.0, 1.0))
    rng = np.random.default_rng(77)
    return {
        "linear": counter.g[0],
        "steep saturating feedback": counter.g[2],
        "mapk stage 1": mapk.g[0],
        "mapk stage 2": mapk.g[1],
        "mapk inhibitory feedback": mapk.g[2],
        "michaelis-menten": mapk.f[0],
        "tabulated saturation": saturating(2.0, 0.3, rng),
    }


@acceptance("7", "Jensen lower bound never exceeds the storage function")
def test_jensen_bound():
    grid = SpatialGrid(101)
    rng = np.random.default_rng(7)
    catalog = _jensen_catalog()
    worst_gap = 0.0
    worst_const = 0.0
    for name, g in catalog.items():
        cond = check_conditions(NonlinearCyclicSystem((g,), (g,)), (-0.5, 0.8), samples=401)
        assert cond.c1.holds and cond.c5.holds, name
        lo = max(g.domain[0] + 1e-3, -0.5)
        for _ in range(200):
            kind = rng.integers(3)
            if kind == 0:
                psi = rng.uniform(lo, 0.8, grid.N)
            elif kind == 1:
                k = rng.integers(1, 8)
                psi = np.clip(rng.uniform(0.05, 0.8) * np.cos(k * math.pi * grid.nodes + rng.uniform(0, 6)), lo, 0.8)
            else:
                psi = np.clip(np.cumsum(rng.normal(0, 0.05, grid.N)), lo, 0.8)
            gamma = rng.uniform(0.1, 5.0)
            V = storage_pde(psi, g, gamma, grid)
            J = jensen_lower_bound(psi, g, gamma, grid)
            assert J <= V * (1 + 1e-10), name
            worst_gap = max(worst_gap, (J - V) / V if V > 0 else 0.0)
        for value in np.linspace(lo, 0.8, 9):
            psi = np.full(grid.N, value)
            diff = abs(jensen_lower_bound(psi, g, 1.0, grid) - storage_pde(psi, g, 1.0, grid))
            worst_const = max(worst_const, diff)
            assert diff <= 1e-12, name
    print(f"\n[7] functions={len(catalog)} max relative excess={worst_gap:.2e} constant-field gap={worst_const:.2e}")


# ---------------------------------------------------------------- 8


def _laplacian_error(N):
    zero = ScalarFn.linear(0.0)
    sys = NonlinearCyclicSystem((zero,), (zero,), (ScalarFn.constant(1.0),))
    grid = SpatialGrid(N)
    psi = np.cos(math.pi * grid.nodes)[None, :]
    d = rhs(sys, grid, psi)[0]
    return float(np.max(np.abs(d + math.pi**2 * psi[0])))


@acceptance("8", "Lyapunov residuals, second-order stencil, fourth-order integrator")
def test_numerical_hygiene():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 8))
        a = rng.uniform(0.2, 3.0, n)
        gains = random_loop_gains(rng, n, rng.uniform(0.05, 0.95))
        b = np.empty(n)
        b[n - 1] = gains[0] * a[0]
        b[: n - 1] = gains[1:] * a[1:]
        rep = verify_modal_series(LinearCyclicSystem(a, b, rng.uniform(0.05, 2.0, n)), 20)
        worst = max(worst, max(m.residual for m in rep.modes))
    for gains in ([1.6, 1.6, 0.4], [1.0, 1.0, 1.0], [1.9, 2.0, 2.0]):
        A = gain_matrix(gains)
        worst = max(worst, lyapunov_residual(A, solve_lyapunov(A)))

    stencil = _laplacian_error(41) / _laplacian_error(81)

    sys = mapk_system()
    x0 = [0.9, 0.1, 0.6]
    final = lambda dt: simulate_ode(sys, x0, 5.0, dt=dt).final
    ref = final(0.1 / 8)
    rk4 = np.max(np.abs(final(0.2) - ref)) / np.max(np.abs(final(0.1) - ref))
    print(f"\n[8] max residual={worst:.2e} stencil ratio={stencil:.3f} rk4 ratio={rk4:.2f}")
    assert worst <= 1e-8
    assert 3.5 <= stencil <= 4.5
    assert 12.0 <= rk4 <= 20.0
