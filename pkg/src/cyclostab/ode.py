"""Lumped and compartmental cyclic ODE models, fixed-step RK4, and
oscillation detection on sampled trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import SimulationError, ValidationError
from .model import CompartmentalSystem, NonlinearCyclicSystem, pack_functions
from .trajectory import Trajectory

DEFAULT_DT = 1e-3


def lumped_rhs(sys: NonlinearCyclicSystem, x):
    """Reaction terms ``-f_i(x_i) + g_(i-1)(x_(i-1))`` with ``-g_n`` entering stage 1."""
    x = np.asarray(x, dtype=float)
    n = sys.n
    if x.shape[0] != n:
        raise ValidationError(f"state has {x.shape[0]} entries, expected {n}")
    gv = [sys.g[i](x[i]) for i in range(n)]
    out = np.array([-sys.f[i](x[i]) for i in range(n)], dtype=float)
    out[0] -= gv[n - 1]
    for i in range(1, n):
        out[i] += gv[i - 1]
    return out


def compartmental_rhs(sys: CompartmentalSystem, x):
    """Right-hand side for ``m`` compartments; ``x`` is ``(m, n)`` or flat compartment-major.

    Interface ``j`` carries ``mu_(j,i)(x_(j,i) - x_(j+1,i))`` out of
    compartment ``j`` and into ``j + 1``; the outer compartments have a
    single interface.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ndim == 1
    m, n = sys.m, sys.n
    x = x.reshape(m, n)
    out = np.array([lumped_rhs(sys.base, xj) for xj in x])
    for j, row in enumerate(sys.flux):
        for i, mu in enumerate(row):
            q = mu(x[j, i] - x[j + 1, i])
            out[j, i] -= q
            out[j + 1, i] += q
    return out.reshape(-1) if flat else out


def _as_compartmental(sys):
    if isinstance(sys, CompartmentalSystem):
        return sys
    if isinstance(sys, NonlinearCyclicSystem):
        return CompartmentalSystem(sys.without_diffusion(), ())
    raise ValidationError(f"cannot simulate {type(sys).__name__}")


def _rk4_python(fun, x0, dt, t_end, stride):
    n_full = int(math.floor(t_end / dt + 1e-9))
    rem = t_end - n_full * dt
    if rem <= 1e-12 * max(1.0, t_end):
        rem = 0.0
    total = n_full + (1 if rem > 0 else 0)
    x = np.array(x0, dtype=float)
    times, states = [0.0], [x.copy()]
    for step in range(1, total + 1):
        h = dt if step <= n_full else rem
        k1 = fun(x)
        k2 = fun(x + 0.5 * h * k1)
        k3 = fun(x + 0.5 * h * k2)
        k4 = fun(x + h * k3)
        xn = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(xn)):
            return np.array(times), np.array(states), 1, (step - 1) * dt
        x = xn
        if step % stride == 0 or step == total:
            times.append(step * dt if step <= n_full else t_end)
            states.append(x.copy())
    return np.array(times), np.array(states), 0, t_end


def simulate_ode(sys, x0, t_end, dt="auto", cadence=None, backend="auto"):
    """Fixed-step RK4 from ``x0`` to ``t_end``.

    Parameters
    ----------
    sys : NonlinearCyclicSystem, CompartmentalSystem or callable
        A callable is used as ``x -> dx/dt`` and integrated in Python.
    x0 : array_like
        Initial state; compartment-major for compartmental systems.
    dt : float or "auto"
        ``"auto"`` uses 1e-3, adequate for the O(1) rates of the built-in models.
    cadence : float, optional
        Output interval, rounded to a whole number of steps; every step by default.
    """
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    dt = DEFAULT_DT if dt == "auto" else float(dt)
    if not dt > 0:
        raise ValidationError("dt must be positive or 'auto'")
    stride = max(1, int(round(cadence / dt))) if cadence is not None else 1
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    meta = {"integrator": "rk4", "dt": dt, "stride": stride}
    if callable(sys) and not isinstance(sys, (NonlinearCyclicSystem, CompartmentalSystem)):
        times, states, status, t_fail = _rk4_python(
            lambda x: np.asarray(sys(x), dtype=float), x0, dt, float(t_end), stride
        )
        meta["backend"] = "python"
    else:
        comp = _as_compartmental(sys)
        m, n = comp.m, comp.n
        if x0.size != m * n:
            raise ValidationError(f"x0 has {x0.size} entries, expected {m * n}")
        base = comp.base
        mus = tuple(mu for row in comp.flux for mu in row)
        rows, knots = pack_functions(tuple(base.f) + tuple(base.g) + mus)
        kern = _backend.get(backend)
        times, states, status, t_fail = kern.integrate_ode(
            rows[:n].copy(), rows[n : 2 * n].copy(), np.ascontiguousarray(rows[2 * n :]),
            knots, m, n, np.ascontiguousarray(x0), dt, float(t_end), stride,
        )
        meta.update(m=m, n=n, backend="compiled" if kern is not _backend._fallback else "python")
    traj = Trajectory(times, np.asarray(states).reshape(len(times), -1), meta)
    if status != 0:
        raise SimulationError(f"non-finite state after t = {t_fail:g}", last_time=t_fail, trajectory=traj)
    return traj


@dataclass(frozen=True)
class OscillationReport:
    oscillating: bool
    period: float | None
    peaks: int
    min: float
    max: float
    trend: str
    peak_times: np.ndarray
    peak_values: np.ndarray

    @property
    def amplitude(self):
        return self.max - self.min


def find_peaks(y, noise_floor=1e-9):
    """Indices of interior maxima: a rise followed by a fall, ignoring steps below ``noise_floor``."""
    d = np.diff(np.asarray(y, dtype=float))
    sgn = np.where(d > noise_floor, 1, np.where(d < -noise_floor, -1, 0))
    idx = np.nonzero(sgn)[0]
    s = sgn[idx]
    turns = np.nonzero((s[:-1] > 0) & (s[1:] < 0))[0]
    # the maximum sits just after the last rising step
    return idx[turns] + 1


def detect_oscillation(traj, coordinate=0, window=0.5, min_peaks=3, noise_floor=1e-9, trend_band=0.01):
    """Classify the trailing ``window`` fraction of one coordinate.

    The trend comes from a linear fit of peak heights above the window
    mean: ``sustained`` when the fitted change across the window is within
    ``trend_band`` of the mean height, else ``growing`` or ``decaying``.
    """
    if not 0 < window <= 1:
        raise ValidationError("window must be a fraction in (0, 1]")
    times = np.asarray(traj.times)
    y = np.asarray(traj.states).reshape(len(times), -1)[:, coordinate]
    t0 = times[-1] - window * (times[-1] - times[0])
    sel = times >= t0
    t, y = times[sel], y[sel]
    if len(t) < 100:
        raise ValidationError(f"window holds {len(t)} samples; at least 100 are needed")
    peaks = find_peaks(y, noise_floor)
    pt, pv = t[peaks], y[peaks]
    heights = pv - y.mean()
    period = float(np.mean(np.diff(pt))) if len(pt) >= 2 else None
    trend = "none"
    if len(pt) >= 2:
        slope = np.polyfit(pt, heights, 1)[0]
        change = slope * (t[-1] - t[0])
        mean_height = float(np.mean(np.abs(heights)))
        if abs(change) < trend_band * mean_height:
            trend = "sustained"
        else:
            trend = "growing" if change > 0 else "decaying"
    oscillating = len(pt) >= min_peaks and float(y.max() - y.min()) > noise_floor
    return OscillationReport(
        oscillating, period, len(pt), float(y.min()), float(y.max()), trend, pt, pv
    )
