"""Decoupled Lyapunov functions for cyclic systems and their monitoring.

Each subsystem contributes a storage function ``V_i = gamma_i int G_i(psi_i)``
with ``G_i`` the antiderivative of ``g_i``; the global function weights them
by the diagonal scaling ``d``.  Along solutions

    dV/dt <= y^T D A y = -1/2 y^T Q y,    y_i = g_i(psi_i),

where ``A`` is the normalized loop matrix, so the monitor compares the
observed decrease against ``-lambda_min(Q) |y|^2`` scaled by a
caller-chosen coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, ValidationError
from .model import CompartmentalSystem, GainVector, as_gains, check_conditions
from .secant import diagonal_scaling

TOL_ABS = 1e-9
TOL_REL = 1e-6
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class LyapunovWeights:
    """Diagonal weights ``d`` with the gains ``gamma`` and ``lambda_min(Q)`` they certify.

    ``gamma`` are sector gains with the subsystem's own index,
    ``g_i(s) / f_i(s) <= gamma_i`` (``b_i / a_i`` for a linear loop).
    """

    d: tuple
    gamma: GainVector
    lambda_min: float

    def __post_init__(self):
        d = tuple(float(v) for v in self.d)
        if len(d) != len(self.gamma) or not all(v > 0 for v in d):
            raise ValidationError("weights must be n positive values matching the gains")
        object.__setattr__(self, "d", d)

    @property
    def n(self):
        return len(self.d)

    @classmethod
    def from_gains(cls, gains):
        """Weights from the diagonal scaling; refuses gains failing the secant test."""
        scaling = diagonal_scaling(as_gains(gains))
        if not scaling.verdict.holds or not scaling.lambda_min > 0:
            raise PreconditionError(
                f"gain product {scaling.verdict.product:.6g} is not below the secant threshold "
                f"{scaling.verdict.threshold:.6g}; no decreasing diagonal Lyapunov function is certified"
            )
        return cls(tuple(scaling.d), scaling.gains, scaling.lambda_min)


def storage_pde(psi_i, g_i, gamma_i, grid):
    """``gamma_i`` times the trapezoid integral of ``int_0^psi g_i``."""
    psi_i = np.asarray(psi_i, dtype=float)
    if psi_i.shape[-1] != grid.N:
        raise ValidationError(f"field has {psi_i.shape[-1]} nodes, grid has {grid.N}")
    return float(gamma_i) * float(np.asarray(g_i.antiderivative(psi_i)) @ grid.weights)


def _check_g(g, weights):
    if len(g) != weights.n:
        raise ValidationError(f"{len(g)} functions for {weights.n} weights")


def total_V(state, weights: LyapunovWeights, g, grid=None):
    """Weighted storage sum.

    With ``grid`` the state is a field of shape ``(n, N)``; otherwise it is a
    compartment state of shape ``(m, n)`` or flat compartment-major.
    """
    _check_g(g, weights)
    n = weights.n
    coef = np.array(weights.d) * np.array(weights.gamma)
    state = np.asarray(state, dtype=float)
    if grid is not None:
        if state.shape != (n, grid.N):
            raise ValidationError(f"field has shape {state.shape}, expected {(n, grid.N)}")
        return float(sum(coef[i] * storage_pde(state[i], g[i], 1.0, grid) for i in range(n)))
    if state.size % n:
        raise ValidationError(f"state of size {state.size} is not a multiple of n = {n}")
    x = state.reshape(-1, n)
    return float(sum(coef[i] * np.sum(g[i].antiderivative(x[:, i])) for i in range(n)))


def _series(traj, weights, g, grid):
    """``V`` and ``|y|^2`` at every sample of a trajectory."""
    n = weights.n
    coef = np.array(weights.d) * np.array(weights.gamma)
    states = np.asarray(traj.states, dtype=float)
    K = len(states)
    V = np.zeros(K)
    y2 = np.zeros(K)
    if grid is not None:
        states = states.reshape(K, n, grid.N)
        w = grid.weights
        for i in range(n):
            comp = states[:, i, :]
            V += coef[i] * (np.asarray(g[i].antiderivative(comp)) @ w)
            y2 += (np.asarray(g[i](comp)) ** 2) @ w
    else:
        states = states.reshape(K, -1, n)
        for i in range(n):
            comp = states[:, :, i]
            V += coef[i] * np.asarray(g[i].antiderivative(comp)).sum(axis=1)
            y2 += (np.asarray(g[i](comp)) ** 2).sum(axis=1)
    return V, y2


@dataclass
class MonitorReport:
    """Outcome of :func:`monitor_decrease`.

    ``rate_ratio[k]`` is the observed decrease rate over interval ``k``
    divided by ``lambda_min |y|^2`` (interval mean); ``rate_ok[k]`` says
    whether the rate bound held there within the discretization slack.
    ``informative[k]`` marks intervals where the predicted decrease exceeds
    that slack; elsewhere the rate test passes vacuously, so
    :attr:`rate_fraction` counts informative intervals only.
    """

    times: np.ndarray
    V: np.ndarray
    lambda_min: float
    rate_coefficient: float
    violations: list = field(default_factory=list)
    max_violation: float = 0.0
    rate_ratio: np.ndarray = None
    rate_ok: np.ndarray = None
    informative: np.ndarray = None

    @property
    def decreasing(self):
        return not self.violations

    @property
    def rate_fraction(self):
        if self.rate_ok is None:
            return 1.0
        mask = self.informative if self.informative is not None else np.ones(len(self.rate_ok), bool)
        return float(np.mean(self.rate_ok[mask])) if mask.any() else 1.0

    @property
    def rate_samples(self):
        return int(np.sum(self.informative)) if self.informative is not None else 0

    def quantiles(self):
        """Quantiles of the rate ratio over informative intervals."""
        if self.rate_ratio is None:
            return {}
        keep = np.isfinite(self.rate_ratio)
        if self.informative is not None:
            keep &= self.informative
        finite = self.rate_ratio[keep]
        if len(finite) == 0:
            return {}
        return {f"q{int(round(100 * q)):02d}": float(np.quantile(finite, q)) for q in QUANTILES}

    def to_dict(self):
        return {
            "lambda_min": self.lambda_min,
            "rate_coefficient": self.rate_coefficient,
            "violations": [{"t": t, "dV": dv} for t, dv in self.violations],
            "max_violation": self.max_violation,
            "rate_fraction": self.rate_fraction,
            "rate_samples": self.rate_samples,
            "empirical_rate_quantiles": self.quantiles(),
        }


def monitor_decrease(
    traj,
    weights: LyapunovWeights,
    g,
    grid=None,
    rate_coefficient=0.5,
    tol_abs=TOL_ABS,
    tol_rel=TOL_REL,
    ratio_floor=1e-14,
):
    """Check that ``V`` never increases along a saved trajectory.

    An interval is a violation when ``V(t_k+1) - V(t_k) > tol_abs + tol_rel V(t_k)``.
    The rate check compares ``dV/dt`` by finite differences with
    ``-rate_coefficient * lambda_min * |y|^2`` (trapezoid mean over the
    interval); the same tolerance divided by the interval length is the slack.
    The default coefficient 1/2 is the one the storage-function argument
    guarantees.

    Parameters
    ----------
    grid : SpatialGrid, optional
        Set for field trajectories; compartment trajectories leave it out.
    ratio_floor : float
        Intervals where ``lambda_min |y|^2`` is below this get no ratio
        (it is 0/0 at the equilibrium).
    """
    _check_g(g, weights)
    times = np.asarray(traj.times, dtype=float)
    V, y2 = _series(traj, weights, g, grid)
    dV = np.diff(V)
    dt = np.diff(times)
    allowance = tol_abs + tol_rel * V[:-1]
    excess = dV - allowance
    bad = np.nonzero(excess > 0)[0]
    violations = [(float(times[k + 1]), float(dV[k])) for k in bad]
    predicted = weights.lambda_min * 0.5 * (y2[:-1] + y2[1:])
    rate = dV / dt
    rate_ok = rate <= -rate_coefficient * predicted + allowance / dt
    informative = rate_coefficient * predicted * dt > allowance
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(predicted > ratio_floor, -rate / predicted, np.nan)
    return MonitorReport(
        times,
        V,
        weights.lambda_min,
        rate_coefficient,
        violations,
        float(max(0.0, excess.max())) if len(excess) else 0.0,
        ratio,
        rate_ok,
        informative,
    )


def subdomain_measures(psi_i, grid):
    """Trapezoid measures of ``{psi > 0}`` and ``{psi < 0}`` and the L1 norms restricted to them.

    A cell whose end nodes differ in sign is split evenly between the two sets.
    """
    psi_i = np.asarray(psi_i, dtype=float)
    w = grid.weights
    pos = psi_i > 0
    neg = psi_i < 0
    return (
        float(pos @ w),
        float(neg @ w),
        float(np.where(pos, psi_i, 0.0) @ w),
        float(np.where(neg, -psi_i, 0.0) @ w),
    )


def jensen_lower_bound(psi_i, g_i, gamma_i, grid):
    """Lower bound on :func:`storage_pde` from the restricted L1 norms.

    Returns ``gamma (|O+| P(l+ / |O+|) + |O-| P(-l- / |O-|))`` where
    ``P = int_0 g``, ``O+`` and ``O-`` are the sets where ``psi`` is
    positive and negative and ``l+``, ``l-`` the L1 norms of ``psi`` on
    them.  Convexity of ``P`` (``g`` nondecreasing) makes this a bound.
    """
    meas_p, meas_m, l1_p, l1_m = subdomain_measures(psi_i, grid)
    total = 0.0
    if meas_p > 0:
        total += meas_p * float(g_i.antiderivative(l1_p / meas_p))
    if meas_m > 0:
        total += meas_m * float(g_i.antiderivative(-l1_m / meas_m))
    return float(gamma_i) * total


def state_hull(traj, n, grid=None, include_origin=True):
    """Per-component ``(lo, hi)`` range visited by a trajectory."""
    states = np.asarray(traj.states, dtype=float)
    K = len(states)
    comps = states.reshape(K, n, -1) if grid is not None else states.reshape(K, -1, n).swapaxes(1, 2)
    lo = comps.min(axis=(0, 2))
    hi = comps.max(axis=(0, 2))
    if include_origin:
        lo = np.minimum(lo, 0.0)
        hi = np.maximum(hi, 0.0)
    return np.stack([lo, hi], axis=1)


def certify_gains(sys, traj, grid=None, samples=2001, pad=1e-6):
    """Sector gains valid over the range a trajectory actually visits.

    The hull of visited states (widened by ``pad``) is passed to
    :func:`check_conditions`; the resulting gains hold along the whole
    trajectory even where it leaves the range assumed by closed-form gains.
    """
    base = sys.base if isinstance(sys, CompartmentalSystem) else sys
    hull = state_hull(traj, base.n, grid)
    hull[:, 0] -= pad
    hull[:, 1] += pad
    report = check_conditions(sys, hull, samples=samples)
    if not report.c1.holds:
        raise PreconditionError("sign condition C1 fails on the visited range")
    return report.gains(), report
