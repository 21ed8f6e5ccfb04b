import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclostab import (
    CompartmentalSystem,
    LinearCyclicSystem,
    ScalarFn,
    SimulationError,
    Trajectory,
    ValidationError,
    compartmental_rhs,
    counterexample_system,
    detect_oscillation,
    lumped_rhs,
    mapk_system,
    rhs,
    simulate_ode,
    SpatialGrid,
    NonlinearCyclicSystem,
)
from families import random_compartmental

# ---------------------------------------------------------------- right-hand sides


def test_counterexample_equilibrium_rhs():
    assert np.array_equal(lumped_rhs(counterexample_system(), [1.0, 1.0, 1.0]), [0.0, 0.0, 0.0])


def test_linear_rhs_is_matrix_product():
    sys = LinearCyclicSystem((1, 1, 1), (1, 1, 1)).to_nonlinear()
    assert np.array_equal(lumped_rhs(sys, [1.0, 0.0, 0.0]), [-1.0, 1.0, 0.0])
    assert np.array_equal(lumped_rhs(sys, [0.0, 0.0, 1.0]), [-1.0, 0.0, -1.0])


def test_lumped_matches_field_rhs_on_constants():
    sys = mapk_system(h=0.3)
    g = SpatialGrid(9)
    x = np.array([0.2, 0.7, 0.4])
    field = rhs(sys, g, np.repeat(x[:, None], g.N, axis=1))
    assert np.allclose(field, lumped_rhs(sys, x)[:, None], rtol=1e-14, atol=1e-15)


def test_single_compartment_equals_lumped():
    base = mapk_system()
    comp = CompartmentalSystem(base, ())
    x = np.array([0.3, 0.5, 0.1])
    assert np.array_equal(compartmental_rhs(comp, x), lumped_rhs(base, x))


def test_identical_compartments_decouple():
    comp = CompartmentalSystem.uniform(mapk_system(), 4, ScalarFn.linear(0.7))
    x = np.tile([0.3, 0.5, 0.1], (4, 1))
    out = compartmental_rhs(comp, x)
    assert np.allclose(out, lumped_rhs(mapk_system(), x[0]), atol=0)


def test_two_compartment_coupling_structure():
    base = counterexample_system().shifted((1, 1, 1))
    D = 0.3
    comp = CompartmentalSystem.uniform(base, 2, ScalarFn.linear(D))
    x = np.array([[0.2, -0.1, 0.05], [0.1, 0.3, -0.2]])
    out = compartmental_rhs(comp, x)
    assert np.allclose(out[0], lumped_rhs(base, x[0]) + D * (x[1] - x[0]), atol=1e-15)
    assert np.allclose(out[1], lumped_rhs(base, x[1]) + D * (x[0] - x[1]), atol=1e-15)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_fluxes_cancel_in_the_total(seed):
    rng = np.random.default_rng(seed)
    comp, _ = random_compartmental(rng)
    x = rng.uniform(-3, 3, (comp.m, comp.n))
    exchange = compartmental_rhs(comp, x) - np.array([lumped_rhs(comp.base, xj) for xj in x])
    assert np.allclose(exchange.sum(axis=0), 0.0, atol=1e-13)


def test_flat_and_matrix_states_agree():
    comp = CompartmentalSystem.uniform(mapk_system(), 3, ScalarFn.linear(0.1))
    x = np.random.default_rng(0).uniform(0, 1, (3, 3))
    assert np.array_equal(compartmental_rhs(comp, x).reshape(-1), compartmental_rhs(comp, x.reshape(-1)))


# ---------------------------------------------------------------- integration


def test_equilibrium_stays_put():
    traj = simulate_ode(counterexample_system(), [1.0, 1.0, 1.0], 10.0, cadence=1.0)
    assert np.all(traj.states == 1.0)


def _final(sys, dt, x0, t_end=5.0):
    return simulate_ode(sys, x0, t_end, dt=dt).final


def test_fourth_order_convergence():
    sys = mapk_system()
    x0 = [0.9, 0.1, 0.6]
    ref = _final(sys, 0.2 / 8, x0)
    e1 = np.max(np.abs(_final(sys, 0.2, x0) - ref))
    e2 = np.max(np.abs(_final(sys, 0.1, x0) - ref))
    assert 12.0 < e1 / e2 < 20.0


def test_exponential_decay_accuracy():
    traj = simulate_ode(lambda x: -x, [1.0], 1.0, dt=0.01)
    assert traj.final[0] == pytest.approx(math.exp(-1.0), rel=1e-9)


def test_callable_matches_compiled_path():
    sys = counterexample_system()
    x0 = [1.2, 1.2, 1.2]
    a = simulate_ode(sys, x0, 3.0, dt=0.01, cadence=0.1)
    b = simulate_ode(lambda x: lumped_rhs(sys, x), x0, 3.0, dt=0.01, cadence=0.1)
    assert np.allclose(a.times, b.times, atol=1e-12)
    assert np.allclose(a.states, b.states, atol=1e-12)


def test_cadence_and_partial_final_step():
    traj = simulate_ode(lambda x: -x, [1.0], 1.05, dt=0.1, cadence=0.5)
    assert np.allclose(traj.times, [0.0, 0.5, 1.0, 1.05])
    assert traj.final[0] == pytest.approx(math.exp(-1.05), rel=1e-5)


@pytest.mark.filterwarnings("ignore:overflow")
def test_blow_up_aborts_with_diagnostics():
    # exact solution 1 / (1 - t) escapes at t = 1
    with pytest.raises(SimulationError) as info:
        simulate_ode(lambda x: x * x, [1.0], 5.0, dt=0.01)
    assert 0.9 < info.value.last_time < 1.5
    assert np.all(np.isfinite(info.value.trajectory.states))


def test_compiled_blow_up_aborts():
    sys = NonlinearCyclicSystem((ScalarFn.linear(-400.0),), (ScalarFn.linear(0.0),))
    with pytest.raises(SimulationError):
        simulate_ode(sys, [1.0], 10.0, dt=0.01)


def test_invalid_arguments():
    sys = counterexample_system()
    with pytest.raises(ValidationError):
        simulate_ode(sys, [1.0, 1.0], 1.0)
    with pytest.raises(ValidationError):
        simulate_ode(sys, [1.0, 1.0, 1.0], -1.0)
    with pytest.raises(ValidationError):
        simulate_ode(sys, [1.0, 1.0, 1.0], 1.0, dt=0.0)


def test_secant_satisfying_compartments_converge():
    """Every trajectory of a secant-satisfying compartmental system decays to the origin."""
    rng = np.random.default_rng(500)
    for _ in range(3):
        comp, _ = random_compartmental(rng, fraction=rng.uniform(0.05, 0.5))
        for _ in range(100):
            x0 = rng.uniform(-5.0, 5.0, comp.m * comp.n)
            final = simulate_ode(comp, x0, 500.0, dt=0.01, cadence=500.0).final
            assert np.linalg.norm(final) < 1e-4


# ---------------------------------------------------------------- oscillation detection


def _signal(fun, t_end=50.0, samples=5001):
    t = np.linspace(0.0, t_end, samples)
    return Trajectory(t, fun(t)[:, None])


def test_sinusoid_detected():
    T = 2.5
    traj = _signal(lambda t: np.sin(2 * math.pi * t / T))
    rep = detect_oscillation(traj)
    dt = traj.times[1] - traj.times[0]
    assert rep.oscillating and rep.trend == "sustained"
    assert abs(rep.period - T) <= 2 * dt
    assert rep.amplitude == pytest.approx(2.0, abs=1e-3)


def test_decaying_sinusoid_trend():
    rep = detect_oscillation(_signal(lambda t: np.exp(-0.05 * t) * np.sin(2 * math.pi * t)))
    assert rep.oscillating and rep.trend == "decaying"


def test_growing_sinusoid_trend():
    rep = detect_oscillation(_signal(lambda t: np.exp(0.05 * t) * np.sin(2 * math.pi * t)))
    assert rep.trend == "growing"


def test_exponential_not_oscillating():
    rep = detect_oscillation(_signal(lambda t: np.exp(-t)))
    assert not rep.oscillating and rep.peaks == 0


def test_constant_not_oscillating():
    rep = detect_oscillation(_signal(lambda t: 0 * t + 3.0))
    assert not rep.oscillating and rep.period is None


def test_noise_below_floor_ignored():
    rng = np.random.default_rng(1)
    rep = detect_oscillation(_signal(lambda t: 1.0 + 1e-12 * rng.normal(size=t.size)))
    assert not rep.oscillating


def test_short_window_rejected():
    with pytest.raises(ValidationError):
        detect_oscillation(_signal(np.sin, samples=150), window=0.5)


def test_counterexample_limit_cycle():
    traj = simulate_ode(counterexample_system(), [1.2, 1.2, 1.2], 200.0, cadence=0.01)
    rep = detect_oscillation(traj)
    assert rep.oscillating and rep.trend == "sustained" and rep.peaks >= 10
