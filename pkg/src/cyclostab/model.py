"""Domain types for cyclic feedback systems and checks of their sector conditions.

A cyclic system couples ``n`` scalar subsystems

    x1' = -f1(x1) - gn(xn)
    xi' = -fi(xi) + g(i-1)(x(i-1)),   i = 2..n

optionally with nonlinear diffusion ``div(hi(xi) grad xi)`` on each
component.  The nonlinearities are drawn from a small closed catalog
(:class:`ScalarFn`) so that they can be serialized into scenario files and
evaluated inside the compiled kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError, ValidationError

KINDS = (
    "linear",
    "michaelis_menten",
    "inhibitory_hill",
    "exp_sat",
    "constant",
    "tabulated",
)
_NPARAMS = {
    "linear": 1,
    "michaelis_menten": 2,
    "inhibitory_hill": 2,
    "exp_sat": 3,
    "constant": 1,
    "tabulated": 0,
}
KIND_CODES = {kind: code for code, kind in enumerate(KINDS)}
PACK_WIDTH = 10


def sat(z):
    """Unit saturation ``sgn(z) * min(1, |z|)``."""
    return np.clip(z, -1.0, 1.0)


def _sat_integral(z):
    az = np.abs(z)
    return np.where(az <= 1.0, 0.5 * z * z, az - 0.5)


@dataclass(frozen=True)
class ScalarFn:
    """A one-dimensional nonlinearity from the catalog.

    The value at ``s`` is ``scale * (base(s + shift) - c0)`` where ``c0`` is
    ``base(shift)`` when ``center`` is set and zero otherwise.  Centering is
    how a function is re-expressed in coordinates relative to an
    equilibrium ``shift``: the result vanishes at ``s = 0``.

    Parameters
    ----------
    kind : str
        One of ``linear(slope)``, ``michaelis_menten(b, c)`` for
        ``b x / (c + x)``, ``inhibitory_hill(mu, k)`` for ``mu / (1 + k x)``,
        ``exp_sat(alpha, beta, gain)`` for
        ``exp(-alpha (x - 1)) + beta sat(gain (x - 1))``, ``constant(c)``
        and ``tabulated`` (piecewise linear through ``table`` with linear
        extrapolation).
    params : tuple of float
        Kind parameters, in the order listed above.
    shift, center, scale : float, bool, float
        Coordinate shift, centering flag and output multiplier.
    table : tuple of (x, y) pairs
        Knots of a tabulated function, strictly increasing in ``x``.
    """

    kind: str
    params: tuple = ()
    shift: float = 0.0
    center: bool = False
    scale: float = 1.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown nonlinearity kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != _NPARAMS[self.kind]:
            raise ValidationError(
                f"{self.kind} takes {_NPARAMS[self.kind]} parameter(s), got {len(params)}"
            )
        if not all(math.isfinite(p) for p in params):
            raise ValidationError(f"{self.kind}: parameters must be finite")
        if self.kind == "michaelis_menten" and params[1] <= 0:
            raise ValidationError("michaelis_menten: c must be positive")
        if self.kind == "inhibitory_hill" and params[1] < 0:
            raise ValidationError("inhibitory_hill: k must be nonnegative")
        if self.kind == "exp_sat" and params[2] <= 0:
            raise ValidationError("exp_sat: saturation gain must be positive")
        if self.kind == "tabulated":
            table = tuple((float(x), float(y)) for x, y in self.table)
            if len(table) < 2:
                raise ValidationError("tabulated: need at least two knots")
            xs = [x for x, _ in table]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValidationError("tabulated: knots must be strictly increasing")
            object.__setattr__(self, "table", table)
        elif self.table:
            raise ValidationError(f"{self.kind}: table is only valid for tabulated")
        object.__setattr__(self, "shift", float(self.shift))
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "center", bool(self.center))

    # ------------------------------------------------------------------
    # catalog constructors
    @classmethod
    def linear(cls, slope):
        return cls("linear", (slope,))

    @classmethod
    def michaelis_menten(cls, b, c):
        return cls("michaelis_menten", (b, c))

    @classmethod
    def inhibitory_hill(cls, mu, k):
        return cls("inhibitory_hill", (mu, k))

    @classmethod
    def exp_sat(cls, alpha=10.0, beta=0.1, gain=25.0):
        return cls("exp_sat", (alpha, beta, gain))

    @classmethod
    def constant(cls, c):
        return cls("constant", (c,))

    @classmethod
    def tabulated(cls, xs, ys):
        return cls("tabulated", table=tuple(zip(xs, ys)))

    def shifted(self, x_bar, center=True):
        """Return the function of ``s`` obtained by substituting ``x_bar + s``."""
        return replace(self, shift=self.shift + float(x_bar), center=center)

    def scaled(self, factor):
        return replace(self, scale=self.scale * float(factor))

    # ------------------------------------------------------------------
    @property
    def domain(self):
        """Open interval of admissible ``s``."""
        if self.kind == "michaelis_menten":
            return (-self.params[1] - self.shift, math.inf)
        if self.kind == "inhibitory_hill" and self.params[1] > 0:
            return (-1.0 / self.params[1] - self.shift, math.inf)
        return (-math.inf, math.inf)

    def _check_domain(self, x):
        lo, _ = self.domain
        if lo == -math.inf:
            return
        bad = np.asarray(x) <= lo
        if np.any(bad):
            s = float(np.asarray(x)[bad].flat[0])
            if self.kind == "michaelis_menten":
                what = f"c + x = 0 at x = {-self.params[1]:g}"
            else:
                what = f"1 + k x = 0 at x = {-1.0 / self.params[1]:g}"
            raise DomainError(
                f"{self.kind} evaluated at s = {s:g}, at or beyond its pole ({what})"
            )

    def _base(self, x):
        k = self.kind
        p = self.params
        if k == "linear":
            return p[0] * x
        if k == "michaelis_menten":
            return p[0] * x / (p[1] + x)
        if k == "inhibitory_hill":
            return p[0] / (1.0 + p[1] * x)
        if k == "exp_sat":
            return np.exp(-p[0] * (x - 1.0)) + p[1] * sat(p[2] * (x - 1.0))
        if k == "constant":
            return p[0] + 0.0 * x
        xs, ys = self._knots()
        return _interp_linear_extrap(x, xs, ys)

    def _base_derivative(self, x):
        k = self.kind
        p = self.params
        if k == "linear":
            return p[0] + 0.0 * x
        if k == "michaelis_menten":
            return p[0] * p[1] / (p[1] + x) ** 2
        if k == "inhibitory_hill":
            return -p[0] * p[1] / (1.0 + p[1] * x) ** 2
        if k == "exp_sat":
            z = p[2] * (x - 1.0)
            return -p[0] * np.exp(-p[0] * (x - 1.0)) + p[1] * p[2] * (np.abs(z) < 1.0)
        if k == "constant":
            return 0.0 * x
        xs, ys = self._knots()
        slopes = np.diff(ys) / np.diff(xs)
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    def _base_primitive(self, x):
        # Any antiderivative of base; only differences are used.
        k = self.kind
        p = self.params
        if k == "linear":
            return 0.5 * p[0] * x * x
        if k == "michaelis_menten":
            return p[0] * (x - p[1] * np.log(p[1] + x))
        if k == "inhibitory_hill":
            if p[1] == 0.0:
                return p[0] * x
            return p[0] / p[1] * np.log1p(p[1] * x)
        if k == "exp_sat":
            alpha, beta, gain = p
            if alpha == 0.0:
                expo = x
            else:
                expo = -np.exp(-alpha * (x - 1.0)) / alpha
            return expo + beta * _sat_integral(gain * (x - 1.0)) / gain
        if k == "constant":
            return p[0] * x
        xs, ys = self._knots()
        return _primitive_linear_extrap(x, xs, ys)

    def _knots(self):
        xs = np.array([t[0] for t in self.table])
        ys = np.array([t[1] for t in self.table])
        return xs, ys

    def _offset(self):
        return float(self._base(np.float64(self.shift))) if self.center else 0.0

    # ------------------------------------------------------------------
    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        x = s + self.shift
        self._check_domain(x)
        if self.kind == "linear" and self.center:
            out = self.scale * self.params[0] * s
        else:
            out = self.scale * (self._base(x) - self._offset())
        return out if out.ndim else float(out)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        x = s + self.shift
        self._check_domain(x)
        out = self.scale * self._base_derivative(x)
        return out if np.ndim(out) else float(out)

    def antiderivative(self, s, method="auto"):
        """Integral of the function from 0 to ``s``.

        ``method="auto"`` uses the closed form of the catalog kind;
        ``method="quad"`` integrates numerically to absolute tolerance
        1e-10 and raises :class:`QuadratureError` if that is not reached.
        """
        if method == "quad":
            return _quad_antiderivative(self, s)
        if method != "auto":
            raise ValidationError(f"unknown antiderivative method {method!r}")
        s = np.asarray(s, dtype=float)
        x = s + self.shift
        self._check_domain(x)
        if self.kind == "linear":
            if self.center or self.shift == 0.0:
                out = 0.5 * self.scale * self.params[0] * s * s
            else:
                out = self.scale * self.params[0] * (0.5 * s * s + self.shift * s)
        else:
            h = np.float64(self.shift)
            out = self.scale * (
                self._base_primitive(x) - self._base_primitive(h) - self._offset() * s
            )
        return out if np.ndim(out) else float(out)

    # ------------------------------------------------------------------
    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "tabulated":
            out["table"] = [list(t) for t in self.table]
        else:
            out["params"] = list(self.params)
        if self.shift:
            out["shift"] = self.shift
        if self.center:
            out["center"] = True
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    def pack(self, tab_start=0):
        """Flat float row consumed by the integration kernels."""
        row = np.zeros(PACK_WIDTH)
        row[0] = KIND_CODES[self.kind]
        row[1 : 1 + len(self.params)] = self.params
        row[5] = self.shift
        row[6] = self.scale
        row[7] = self._offset()
        row[8] = tab_start
        row[9] = len(self.table)
        return row


def _interp_linear_extrap(x, xs, ys):
    slopes = np.diff(ys) / np.diff(xs)
    idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
    return ys[idx] + slopes[idx] * (x - xs[idx])


def _primitive_linear_extrap(x, xs, ys):
    slopes = np.diff(ys) / np.diff(xs)
    # primitive at each knot, anchored at xs[0]
    seg = np.concatenate(([0.0], np.cumsum(0.5 * (ys[:-1] + ys[1:]) * np.diff(xs))))
    idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
    dx = x - xs[idx]
    return seg[idx] + ys[idx] * dx + 0.5 * slopes[idx] * dx * dx


def _quad_antiderivative(fn, s, tol=1e-10):
    s_arr = np.asarray(s, dtype=float)
    out = np.empty(s_arr.shape)
    for idx, si in np.ndenumerate(s_arr):
        if si == 0.0:
            out[idx] = 0.0
            continue
        val, err = integrate.quad(lambda t: fn(t), 0.0, float(si), epsabs=tol, epsrel=0.0, limit=200)
        if not err <= tol:
            raise QuadratureError(
                f"quadrature of {fn.kind} on [0, {si:g}] reached only {err:.3g}", achieved=err
            )
        out[idx] = val
    return out if out.ndim else float(out)


def pack_functions(fns):
    """Pack a sequence of functions into (rows, knots) arrays for the kernels."""
    rows = []
    knots = []
    for fn in fns:
        rows.append(fn.pack(tab_start=len(knots)))
        knots.extend(fn.table)
    knot_arr = np.array(knots, dtype=float).reshape(-1, 2) if knots else np.zeros((1, 2))
    return np.ascontiguousarray(np.array(rows, dtype=float)), np.ascontiguousarray(knot_arr)


# ----------------------------------------------------------------------
# systems


def _positive_tuple(name, values):
    out = tuple(float(v) for v in values)
    if not out:
        raise ValidationError(f"{name} must be nonempty")
    if not all(v > 0 and math.isfinite(v) for v in out):
        raise ValidationError(f"{name} entries must be positive and finite, got {out}")
    return out


class GainVector(tuple):
    """Positive sector gains ``g_i / f_i <= gamma_i``."""

    def __new__(cls, values):
        return super().__new__(cls, _positive_tuple("gains", values))

    @property
    def n(self):
        return len(self)

    @property
    def product(self):
        return float(np.prod(self))


@dataclass(frozen=True)
class LinearCyclicSystem:
    """Decay rates ``a``, coupling gains ``b`` and diffusion coefficients ``c``."""

    a: tuple
    b: tuple
    c: tuple = None

    def __post_init__(self):
        a = _positive_tuple("a", self.a)
        b = _positive_tuple("b", self.b)
        c = tuple([1.0] * len(a)) if self.c is None else _positive_tuple("c", self.c)
        if not len(a) == len(b) == len(c):
            raise ValidationError(f"a, b, c lengths differ: {len(a)}, {len(b)}, {len(c)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self):
        return len(self.a)

    def to_nonlinear(self):
        return NonlinearCyclicSystem(
            f=tuple(ScalarFn.linear(v) for v in self.a),
            g=tuple(ScalarFn.linear(v) for v in self.b),
            h=tuple(ScalarFn.constant(v) for v in self.c),
        )


@dataclass(frozen=True)
class NonlinearCyclicSystem:
    """Cyclic interconnection with decay ``f``, coupling ``g``, diffusion ``h``.

    ``g[n-1]`` enters subsystem 1 with a minus sign; ``g[i-1]`` enters
    subsystem ``i`` with a plus sign.  ``h`` may be ``None`` for lumped
    (well-mixed) models.
    """

    f: tuple
    g: tuple
    h: tuple = None

    def __post_init__(self):
        f = tuple(self.f)
        g = tuple(self.g)
        if not f or len(f) != len(g):
            raise ValidationError(f"f and g must have equal nonzero length, got {len(f)}, {len(g)}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        if self.h is not None:
            h = tuple(self.h)
            if len(h) != len(f):
                raise ValidationError(f"h has length {len(h)}, expected {len(f)}")
            object.__setattr__(self, "h", h)

    @property
    def n(self):
        return len(self.f)

    def shifted(self, x_bar):
        """Re-express the system in deviations ``x - x_bar`` from an equilibrium."""
        x_bar = np.asarray(x_bar, dtype=float)
        if x_bar.shape != (self.n,):
            raise ValidationError(f"equilibrium must have {self.n} entries")
        h = None
        if self.h is not None:
            h = tuple(fn.shifted(xb, center=False) for fn, xb in zip(self.h, x_bar))
        return NonlinearCyclicSystem(
            f=tuple(fn.shifted(xb) for fn, xb in zip(self.f, x_bar)),
            g=tuple(fn.shifted(xb) for fn, xb in zip(self.g, x_bar)),
            h=h,
        )

    def without_diffusion(self):
        return replace(self, h=None)


@dataclass(frozen=True)
class CompartmentalSystem:
    """``m`` well-mixed copies of ``base`` joined by flux functions.

    ``flux[j][i]`` is the flux of species ``i`` between compartments ``j``
    and ``j + 1`` as a function of the concentration difference.
    """

    base: NonlinearCyclicSystem
    flux: tuple = ()

    def __post_init__(self):
        flux = tuple(tuple(row) for row in self.flux)
        for row in flux:
            if len(row) != self.base.n:
                raise ValidationError(f"flux row has {len(row)} entries, expected {self.base.n}")
        object.__setattr__(self, "flux", flux)

    @property
    def m(self):
        return len(self.flux) + 1

    @property
    def n(self):
        return self.base.n

    @classmethod
    def uniform(cls, base, m, mu):
        """All interfaces and species share the flux function ``mu``."""
        return cls(base, tuple(tuple(mu for _ in range(base.n)) for _ in range(m - 1)))


# ----------------------------------------------------------------------
# condition checks


@dataclass
class ConditionVerdict:
    name: str
    holds: bool
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "holds": self.holds,
            "violations": [
                {"subsystem": i, "sigma": s, "detail": d} for i, s, d in self.violations
            ],
        }


@dataclass
class ConditionReport:
    """Sample-based verdicts for the sector and monotonicity conditions.

    ``gamma`` holds the empirical supremum of ``g_i / f_i`` per subsystem
    (``inf`` where the ratio is unbounded on the grid).  ``grids`` records
    the sample points so failures can be reproduced.
    """

    c1: ConditionVerdict
    c2: ConditionVerdict
    c4: ConditionVerdict
    c5: ConditionVerdict
    c7: ConditionVerdict | None
    gamma: tuple
    grids: list

    @property
    def holds(self):
        verdicts = [self.c1, self.c2, self.c4, self.c5]
        if self.c7 is not None:
            verdicts.append(self.c7)
        return all(v.holds for v in verdicts)

    def gains(self):
        """Certified gains as a :class:`GainVector` (requires C2 to hold)."""
        if not self.c2.holds:
            raise ValidationError("C2 failed; no finite gains were certified")
        return GainVector(self.gamma)

    def to_dict(self):
        out = {name: getattr(self, name).to_dict() for name in ("c1", "c2", "c4", "c5")}
        if self.c7 is not None:
            out["c7"] = self.c7.to_dict()
        out["gamma"] = list(self.gamma)
        return out


def _intervals(interval, n):
    arr = np.asarray(interval, dtype=float)
    if arr.shape == (2,):
        arr = np.tile(arr, (n, 1))
    if arr.shape != (n, 2) or np.any(arr[:, 0] >= arr[:, 1]):
        raise ValidationError("interval must be (lo, hi) or n pairs with lo < hi")
    return arr


def sample_grid(lo, hi, samples):
    grid = np.linspace(lo, hi, samples)
    return np.unique(np.concatenate((grid, [lo, hi])))


def check_flux_condition(mu, interval, samples=201):
    """Verdict on ``sigma * mu(sigma) >= 0`` over a sample grid."""
    lo, hi = interval
    grid = sample_grid(lo, hi, samples)
    vals = grid * mu(grid)
    bad = grid[vals < 0]
    return [(float(s), f"sigma*mu(sigma) = {float(s * mu(s)):.3g} < 0") for s in bad]


def check_conditions(sys, interval, samples=201, c4_threshold=0.0):
    """Check C1, C2, C4, C5 (and C7 for compartmental systems) on a grid.

    Parameters
    ----------
    sys : NonlinearCyclicSystem or CompartmentalSystem
    interval : (lo, hi) or sequence of n pairs
        Sampling range for each subsystem, in the system's own coordinates.
    samples : int
        Uniform samples per subsystem (endpoints always included).
    c4_threshold : float
        The antiderivative of each ``g_i`` must exceed this at both ends.

    Notes
    -----
    Where ``0`` lies in the interval, the limit ``g'(0) / f'(0)`` is
    included in the supremum for C2, since the ratio approaches it.
    """
    if samples < 10:
        raise ValidationError("samples must be at least 10")
    compartmental = None
    if isinstance(sys, CompartmentalSystem):
        compartmental = sys
        sys = sys.base
    bounds = _intervals(interval, sys.n)
    c1, c2, c4, c5 = (ConditionVerdict(name, True) for name in ("C1", "C2", "C4", "C5"))
    gamma = []
    grids = []
    for i in range(sys.n):
        lo, hi = bounds[i]
        grid = sample_grid(lo, hi, samples)
        grids.append(grid)
        f, g = sys.f[i], sys.g[i]
        fv, gv = f(grid), g(grid)
        nz = grid != 0.0
        for name, vals in (("f", fv), ("g", gv)):
            bad = nz & ~(grid * vals > 0)
            for s, v in zip(grid[bad], vals[bad]):
                c1.violations.append((i, float(s), f"sigma*{name}(sigma) = {float(s * v):.3g} <= 0"))

        ratio_sup = -math.inf
        fzero = nz & (fv == 0.0)
        if np.any(fzero):
            for s in grid[fzero]:
                c2.violations.append((i, float(s), f"unbounded at sigma = {float(s):g} (f = 0)"))
            ratio_sup = math.inf
        else:
            ok = nz
            if np.any(ok):
                ratio_sup = float(np.max(gv[ok] / fv[ok]))
            if lo <= 0.0 <= hi:
                df0 = f.derivative(0.0)
                if df0 > 0:
                    ratio_sup = max(ratio_sup, g.derivative(0.0) / df0)
        gamma.append(ratio_sup)

        for end in (lo, hi):
            if end == 0.0:
                continue
            p = g.antiderivative(end)
            if not p > c4_threshold:
                c4.violations.append((i, float(end), f"int_0^sigma g = {p:.3g} <= {c4_threshold:g}"))

        dg = np.asarray(g.derivative(grid))
        for s in grid[dg < 0]:
            c5.violations.append((i, float(s), f"g'(sigma) = {float(g.derivative(s)):.3g} < 0"))
        if sys.h is not None:
            hv = np.asarray(sys.h[i](grid)) + 0.0 * grid
            for s, v in zip(grid[hv <= 0], hv[hv <= 0]):
                c5.violations.append((i, float(s), f"h(sigma) = {float(v):.3g} <= 0"))

    c7 = None
    if compartmental is not None:
        c7 = ConditionVerdict("C7", True)
        width = float(np.max(bounds[:, 1] - bounds[:, 0]))
        for j, row in enumerate(compartmental.flux):
            for i, mu in enumerate(row):
                for s, detail in check_flux_condition(mu, (-width, width), samples):
                    c7.violations.append((i, s, f"interface {j}: {detail}"))

    for verdict in (c1, c2, c4, c5) + ((c7,) if c7 is not None else ()):
        verdict.holds = not verdict.violations
    if not all(math.isfinite(gm) and gm > 0 for gm in gamma):
        c2.holds = False
    return ConditionReport(c1, c2, c4, c5, c7, tuple(gamma), grids)


def mapk_gains(b, c, d2, d3, k, mu):
    """Closed-form sector gains of the MAPK cascade with inhibitory feedback.

    The gains bound the slope ratio ``g_i' / f_i'`` over states in [0, 1]::

        gamma_i = d_{i+1} (c_i + 1)^2 / (b_i c_i),   i = 1, 2
        gamma_3 = k mu / (b_3 c_3) * max(c_3^2, (c_3 + 1)^2 / (1 + k)^2)
    """
    b = _positive_tuple("b", b)
    c = _positive_tuple("c", c)
    if len(b) != 3 or len(c) != 3:
        raise ValidationError("MAPK cascade has three stages")
    d = _positive_tuple("d2, d3", (d2, d3))
    k, mu = _positive_tuple("k, mu", (k, mu))
    g1 = d[0] * (c[0] + 1) ** 2 / (b[0] * c[0])
    g2 = d[1] * (c[1] + 1) ** 2 / (b[1] * c[1])
    g3 = k * mu / (b[2] * c[2]) * max(c[2] ** 2, (c[2] + 1) ** 2 / (1 + k) ** 2)
    return GainVector((g1, g2, g3))


# ----------------------------------------------------------------------
# catalog of systems


def counterexample_system():
    """Three-stage loop with the steep saturating feedback ``phi``.

    Returned in original coordinates; its equilibrium is (1, 1, 1).
    """
    one = ScalarFn.linear(1.0)
    phi = ScalarFn.exp_sat(10.0, 0.1, 25.0)
    return NonlinearCyclicSystem(f=(one, one, one), g=(one, one, phi.scaled(-1.0)))


def mapk_system(b=(1.0, 1.0, 1.0), c=(1.0, 1.0, 1.0), d2=0.4, d3=0.4, k=1.0, mu=0.4, h=None):
    """MAPK cascade with inhibitory feedback ``mu / (1 + k x3)``.

    ``h`` gives constant diffusion coefficients; ``None`` yields the lumped model.
    """
    f = tuple(ScalarFn.michaelis_menten(bi, ci) for bi, ci in zip(b, c))
    g = (
        ScalarFn.linear(d2),
        ScalarFn.linear(d3),
        ScalarFn.inhibitory_hill(mu, k).scaled(-1.0),
    )
    hh = None if h is None else tuple(ScalarFn.constant(v) for v in np.broadcast_to(h, (3,)))
    return NonlinearCyclicSystem(f=f, g=g, h=hh)


def two_compartment_system(coupling=1e-4):
    """Two diffusively coupled copies of the counterexample loop (deviation coordinates)."""
    base = counterexample_system().shifted((1.0, 1.0, 1.0))
    return CompartmentalSystem.uniform(base, 2, ScalarFn.linear(coupling))


def as_gains(values: Sequence[float] | GainVector) -> GainVector:
    return values if isinstance(values, GainVector) else GainVector(values)
