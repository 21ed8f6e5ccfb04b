"""Method-of-lines simulation of cyclic reaction-diffusion systems on (0, 1).

Diffusion uses conservative second-order fluxes with no-flux boundaries;
boundary nodes own half control volumes, so the trapezoid mass of a pure
diffusion problem is conserved exactly.  Time stepping is classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import (
    ConvergenceError,
    DomainError,
    SimulationError,
    StiffnessError,
    ValidationError,
)
from .model import NonlinearCyclicSystem, pack_functions
from .ode import lumped_rhs
from .trajectory import Trajectory

DT_FLOOR = 1e-12


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid ``xi_j = j / (N - 1)`` with trapezoid weights."""

    N: int = 101

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValidationError(f"grid needs N >= 3 nodes, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dx(self):
        return 1.0 / (self.N - 1)

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self.N)

    @property
    def weights(self):
        w = np.full(self.N, self.dx)
        w[[0, -1]] = 0.5 * self.dx
        return w


def _check_field(sys, grid, psi):
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 1 and sys.n == 1:
        psi = psi[None, :]
    if psi.shape != (sys.n, grid.N):
        raise ValidationError(f"field has shape {psi.shape}, expected {(sys.n, grid.N)}")
    return psi


def _packed(sys):
    if sys.h is None:
        raise ValidationError("the system has no diffusion terms h")
    n = sys.n
    rows, knots = pack_functions(tuple(sys.f) + tuple(sys.g) + tuple(sys.h))
    return rows[:n].copy(), rows[n : 2 * n].copy(), rows[2 * n :].copy(), knots


def _check_domains(sys, psi):
    for i in range(sys.n):
        for fn in (sys.f[i], sys.g[i]):
            fn._check_domain(psi[i] + fn.shift)


def rhs(sys: NonlinearCyclicSystem, grid: SpatialGrid, psi, backend="auto"):
    """Time derivative of the discretized field ``psi`` (shape ``(n, N)``)."""
    psi = _check_field(sys, grid, psi)
    _check_domains(sys, psi)
    f_rows, g_rows, h_rows, knots = _packed(sys)
    out, hmin = _backend.get(backend).pde_rhs(
        f_rows, g_rows, h_rows, knots, sys.n, grid.N, grid.dx, np.ascontiguousarray(psi)
    )
    if not hmin > 0:
        raise DomainError(f"diffusion coefficient reached {hmin:.3g}; condition C5 needs h_i > 0")
    return np.asarray(out)


def simulate_pde(
    sys: NonlinearCyclicSystem,
    grid: SpatialGrid,
    psi0,
    t_end,
    dt="auto",
    cadence=None,
    backend="auto",
):
    """Integrate the discretized system with fixed-form RK4.

    Parameters
    ----------
    dt : float or "auto"
        ``"auto"`` re-evaluates ``0.4 dx^2 / (2 max h)`` at every step.
    cadence : float, optional
        Output interval; steps are shortened to land on output times.
        Defaults to ``t_end / 200``.

    Raises
    ------
    StiffnessError
        If the automatic step falls below 1e-12.
    SimulationError
        On a non-finite state; carries the last valid time and the partial trajectory.
    """
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    psi0 = _check_field(sys, grid, psi0)
    _check_domains(sys, psi0)
    cadence = t_end / 200.0 if cadence is None else float(cadence)
    if not cadence > 0:
        raise ValidationError("cadence must be positive")
    if dt == "auto":
        step = 0.0
    else:
        step = float(dt)
        if not step > 0:
            raise ValidationError("dt must be positive or 'auto'")
    f_rows, g_rows, h_rows, knots = _packed(sys)
    kern = _backend.get(backend)
    times, states, status, t_fail, n_steps, dt_min, dt_max = kern.integrate_pde(
        f_rows, g_rows, h_rows, knots, sys.n, grid.N, grid.dx,
        np.ascontiguousarray(psi0), float(t_end), step, cadence, DT_FLOOR,
    )
    meta = {
        "integrator": "rk4",
        "dt": "auto" if step == 0.0 else step,
        "n_steps": int(n_steps),
        "dt_min": float(dt_min) if n_steps else None,
        "dt_max": float(dt_max) if n_steps else None,
        "N": grid.N,
        "n": sys.n,
        "backend": "compiled" if kern is not _backend._fallback else "python",
    }
    traj = Trajectory(times, np.asarray(states).reshape(-1, sys.n, grid.N), meta)
    if status == 1:
        raise SimulationError(f"non-finite state after t = {t_fail:g}", last_time=t_fail, trajectory=traj)
    if status == 2:
        raise StiffnessError(
            f"diffusive step guard fell below {DT_FLOOR:g} at t = {t_fail:g}; use a coarser grid",
            last_time=t_fail,
            trajectory=traj,
        )
    if status == 3:
        raise DomainError(f"diffusion coefficient became non-positive at t = {t_fail:g}; h_i > 0 is required")
    return traj


def lumped_jacobian(sys: NonlinearCyclicSystem, x):
    n = sys.n
    x = np.asarray(x, dtype=float)
    J = np.diag([-sys.f[i].derivative(x[i]) for i in range(n)])
    dg = [sys.g[i].derivative(x[i]) for i in range(n)]
    J[0, n - 1] -= dg[n - 1]
    for i in range(1, n):
        J[i, i - 1] += dg[i - 1]
    return J


@dataclass(frozen=True)
class Equilibrium:
    x: np.ndarray
    jacobian: np.ndarray
    residual: float
    iterations: int


def equilibrium_solve(sys: NonlinearCyclicSystem, guess=None, tol=1e-12, max_iter=200):
    """Uniform equilibrium by damped Newton iteration on the reaction terms.

    The step is halved until the max-abs residual decreases; points outside
    a nonlinearity's domain count as non-decrease.  ``guess`` defaults to
    0.5 in every component.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations, with the best iterate and its residual.
    """
    n = sys.n
    x = np.full(n, 0.5) if guess is None else np.array(guess, dtype=float)
    if x.shape != (n,):
        raise ValidationError(f"guess must have {n} entries")
    lumped = sys.without_diffusion()

    def resid(z):
        try:
            r = lumped_rhs(lumped, z)
        except DomainError:
            return None
        return r if np.all(np.isfinite(r)) else None

    r = resid(x)
    if r is None:
        raise ValidationError("initial guess lies outside the domain of the nonlinearities")
    err = float(np.max(np.abs(r)))
    for it in range(max_iter + 1):
        if err <= tol:
            return Equilibrium(x, lumped_jacobian(sys, x), err, it)
        if it == max_iter:
            break
        J = lumped_jacobian(sys, x)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(J, r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-10:
            cand = x + lam * step
            rc = resid(cand)
            if rc is not None:
                ec = float(np.max(np.abs(rc)))
                if ec < err:
                    break
            lam *= 0.5
        else:
            raise ConvergenceError(
                f"line search stalled at residual {err:.3g} after {it} iterations", best=x, residual=err
            )
        x, r, err = cand, rc, ec
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations (residual {err:.3g})", best=x, residual=err
    )


def field_norm(psi, grid: SpatialGrid, which="L2", per_component=False):
    """Trapezoid-rule L2 or L1 norm of a field of shape ``(n, N)`` or ``(N,)``.

    The L2 norm of a vector field is ``sqrt(int sum_i psi_i^2)``; the L1
    norm sums the component norms.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    if psi.shape[-1] != grid.N:
        raise ValidationError(f"field has {psi.shape[-1]} nodes, grid has {grid.N}")
    w = grid.weights
    if which == "L2":
        comp = (psi * psi) @ w
        return np.sqrt(comp) if per_component else math.sqrt(float(comp.sum()))
    if which == "L1":
        comp = np.abs(psi) @ w
        return comp if per_component else float(comp.sum())
    raise ValidationError(f"unknown norm {which!r}")
