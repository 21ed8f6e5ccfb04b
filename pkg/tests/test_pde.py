import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclostab import (
    ConvergenceError,
    DomainError,
    NonlinearCyclicSystem,
    ScalarFn,
    SimulationError,
    SpatialGrid,
    StiffnessError,
    Trajectory,
    ValidationError,
    counterexample_system,
    equilibrium_solve,
    field_norm,
    mapk_system,
    rhs,
    simulate_ode,
    simulate_pde,
)

ZERO = ScalarFn.linear(0.0)


def diffusion_only(n=1, h=1.0):
    return NonlinearCyclicSystem((ZERO,) * n, (ZERO,) * n, (ScalarFn.constant(h),) * n)


# ---------------------------------------------------------------- grid and norms


def test_grid_weights_sum_to_one():
    for N in (3, 11, 101):
        g = SpatialGrid(N)
        assert g.weights.sum() == pytest.approx(1.0, abs=1e-15)
        assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0


def test_grid_rejects_too_few_nodes():
    with pytest.raises(ValidationError):
        SpatialGrid(2)


def test_norms_of_cosine():
    g = SpatialGrid(2001)
    psi = np.cos(math.pi * g.nodes)
    assert field_norm(psi, g) == pytest.approx(math.sqrt(0.5), abs=1e-6)
    assert field_norm(psi, g, "L1") == pytest.approx(2 / math.pi, abs=1e-6)


def test_vector_norm_combines_components():
    g = SpatialGrid(11)
    psi = np.vstack([np.ones(11), 2 * np.ones(11)])
    assert field_norm(psi, g) == pytest.approx(math.sqrt(5.0))
    assert np.allclose(field_norm(psi, g, per_component=True), [1.0, 2.0])
    assert field_norm(psi, g, "L1") == pytest.approx(3.0)
    with pytest.raises(ValidationError):
        field_norm(psi, g, "Linf")


# ---------------------------------------------------------------- spatial operator


def _laplacian(N, psi_fn):
    g = SpatialGrid(N)
    psi = psi_fn(g.nodes)[None, :]
    return g, rhs(diffusion_only(), g, psi)[0]


def test_stencil_second_order():
    errors = []
    for N in (41, 81):
        g, lap = _laplacian(N, lambda x: np.cos(math.pi * x))
        exact = -math.pi**2 * np.cos(math.pi * g.nodes)
        errors.append(np.max(np.abs(lap - exact)))
    ratio = errors[0] / errors[1]
    assert 3.6 < ratio < 4.4


def test_stencil_exact_on_constants():
    _, lap = _laplacian(21, lambda x: 3.0 + 0 * x)
    assert np.all(lap == 0.0)


@given(st.integers(5, 60), st.integers(0, 2**32 - 1), st.floats(0.01, 10.0))
@settings(max_examples=60, deadline=None)
def test_diffusion_conserves_trapezoid_mass(N, seed, h):
    g = SpatialGrid(N)
    psi = np.random.default_rng(seed).normal(size=(2, N))
    d = rhs(diffusion_only(2, h), g, psi)
    assert np.all(np.abs(d @ g.weights) <= 1e-12 * (1 + np.abs(d).max()))


def test_simulated_diffusion_conserves_mass():
    g = SpatialGrid(41)
    psi0 = (g.nodes**3)[None, :]
    traj = simulate_pde(diffusion_only(), g, psi0, 0.5, cadence=0.1)
    masses = traj.states[:, 0, :] @ g.weights
    assert np.allclose(masses, masses[0], atol=1e-13)
    assert np.ptp(traj.final[0]) < 1e-2


def test_rhs_rejects_shape():
    with pytest.raises(ValidationError):
        rhs(diffusion_only(2), SpatialGrid(11), np.zeros((2, 10)))


def test_rhs_needs_diffusion():
    with pytest.raises(ValidationError):
        rhs(mapk_system(), SpatialGrid(11), np.zeros((3, 11)))


# ---------------------------------------------------------------- time stepping


def test_equilibrium_is_fixed_point():
    sys = mapk_system(h=0.01)
    x_bar = equilibrium_solve(sys).x
    g = SpatialGrid(21)
    psi0 = np.repeat(x_bar[:, None], g.N, axis=1)
    traj = simulate_pde(sys.shifted(x_bar), g, psi0 - x_bar[:, None], 5.0)
    assert np.max(np.abs(traj.states)) < 1e-13


def test_uniform_field_follows_lumped_model():
    sys = counterexample_system().shifted((1, 1, 1))
    diffusive = NonlinearCyclicSystem(sys.f, sys.g, (ScalarFn.constant(0.01),) * 3)
    g = SpatialGrid(11)
    x0 = np.array([0.3, -0.2, 0.1])
    pde = simulate_pde(diffusive, g, np.repeat(x0[:, None], g.N, axis=1), 2.0, dt=1e-3, cadence=0.5)
    ode = simulate_ode(sys, x0, 2.0, dt=1e-3, cadence=0.5)
    assert np.allclose(pde.times, ode.times)
    for k in range(len(pde)):
        assert np.allclose(pde.states[k], ode.states[k][:, None], atol=1e-12)


def test_output_times_land_on_cadence():
    g = SpatialGrid(21)
    traj = simulate_pde(diffusion_only(), g, np.cos(math.pi * g.nodes)[None, :], 1.0, cadence=0.1)
    assert np.allclose(traj.times, np.arange(11) * 0.1, atol=1e-14)
    assert traj.times[-1] == 1.0
    assert traj.meta["dt_min"] > 1e-6


def test_heat_mode_decay_rate():
    g = SpatialGrid(81)
    traj = simulate_pde(diffusion_only(), g, np.cos(math.pi * g.nodes)[None, :], 0.2, cadence=0.2)
    amp = traj.final[0, 0]
    assert amp == pytest.approx(math.exp(-(math.pi**2) * 0.2), rel=1e-3)


def test_stiffness_error():
    g = SpatialGrid(101)
    with pytest.raises(StiffnessError):
        simulate_pde(diffusion_only(h=1e12), g, np.zeros((1, g.N)), 1.0)


def test_blow_up_reports_partial_trajectory():
    grow = ScalarFn.linear(-60.0)
    sys = NonlinearCyclicSystem((grow,), (ZERO,), (ScalarFn.constant(1.0),))
    g = SpatialGrid(11)
    with pytest.raises(SimulationError) as info:
        simulate_pde(sys, g, np.ones((1, g.N)), 100.0, cadence=0.5)
    err = info.value
    assert err.last_time is not None and 0 < err.last_time < 100.0
    assert isinstance(err.trajectory, Trajectory)
    assert np.all(np.isfinite(err.trajectory.states))


def test_initial_field_outside_domain():
    sys = mapk_system(h=0.01)
    g = SpatialGrid(11)
    with pytest.raises(DomainError):
        simulate_pde(sys, g, np.full((3, g.N), -2.0), 1.0)


def test_invalid_time_arguments():
    g = SpatialGrid(11)
    psi = np.zeros((1, g.N))
    for kwargs in ({"t_end": 0.0}, {"t_end": 1.0, "dt": -1.0}, {"t_end": 1.0, "cadence": 0.0}):
        with pytest.raises(ValidationError):
            simulate_pde(diffusion_only(), g, psi, **kwargs)


def test_trajectory_requires_increasing_times():
    with pytest.raises(ValidationError):
        Trajectory([0.0, 0.0], np.zeros((2, 1)))


# ---------------------------------------------------------------- equilibrium


def test_mapk_equilibrium():
    eq = equilibrium_solve(mapk_system())
    assert eq.x == pytest.approx([0.55006345, 0.282093, 0.12718883], abs=1e-6)
    assert eq.residual <= 1e-12


def test_counterexample_equilibrium():
    eq = equilibrium_solve(counterexample_system(), guess=(0.8, 1.2, 0.9))
    assert eq.x == pytest.approx([1.0, 1.0, 1.0], abs=1e-12)


def test_equilibrium_jacobian_matches_finite_difference():
    from cyclostab import lumped_rhs

    sys = mapk_system()
    eq = equilibrium_solve(sys)
    J = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1e-6
        J[:, j] = (lumped_rhs(sys, eq.x + e) - lumped_rhs(sys, eq.x - e)) / 2e-6
    assert np.allclose(eq.jacobian, J, atol=1e-8)


def test_no_equilibrium_raises_with_best_iterate():
    sat_f = ScalarFn.michaelis_menten(1.0, 1.0)
    sys = NonlinearCyclicSystem((sat_f,) * 3, (ScalarFn.constant(2.0),) * 3)
    with pytest.raises(ConvergenceError) as info:
        equilibrium_solve(sys, max_iter=30)
    assert info.value.best is not None and info.value.residual > 0
