"""Linear analysis of cyclic systems: the secant criterion, diagonal
Lyapunov scaling, and the modal decomposition of the 1-D diffusion operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConsistencyError, LyapunovError, ValidationError
from .model import GainVector, LinearCyclicSystem, as_gains

LYAPUNOV_RESIDUAL_TOL = 1e-8
# sec(pi/3) = 2 and sec(pi/4) = sqrt(2) exactly; cos() rounding would miss these
_EXACT_THRESHOLDS = {3: 8.0, 4: 4.0, 6: 64.0 / 27.0}


def secant_threshold(n):
    """``sec(pi/n)**n``; infinite for ``n`` in {1, 2} where every loop is stable."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    if n <= 2:
        return math.inf
    if n in _EXACT_THRESHOLDS:
        return _EXACT_THRESHOLDS[n]
    return (1.0 / math.cos(math.pi / n)) ** n


@dataclass(frozen=True)
class SecantVerdict:
    product: float
    threshold: float
    margin: float
    holds: bool


def secant_satisfied(gains):
    """Strict test ``prod(gains) < sec(pi/n)**n``."""
    gains = as_gains(gains)
    product = gains.product
    threshold = secant_threshold(gains.n)
    return SecantVerdict(product, threshold, threshold - product, product < threshold)


def cyclic_matrix(diag, sub, corner):
    """Assemble the cyclic pattern: ``diag`` on the diagonal, ``sub`` below it,
    ``-corner`` in the top-right entry (added to the diagonal when n = 1)."""
    diag = np.asarray(diag, dtype=float)
    n = diag.size
    M = np.diag(diag)
    if n == 1:
        M[0, 0] -= corner
        return M
    M[np.arange(1, n), np.arange(n - 1)] = np.asarray(sub, dtype=float)
    M[0, n - 1] = -corner
    return M


def is_cyclic(M, atol=0.0):
    """True when ``M`` has exactly the cyclic sign pattern."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        return False
    if n == 1:
        return M[0, 0] < 0
    mask = np.eye(n, dtype=bool)
    mask[np.arange(1, n), np.arange(n - 1)] = True
    mask[0, n - 1] = True
    return (
        np.all(np.abs(M[~mask]) <= atol)
        and np.all(np.diag(M) < 0)
        and np.all(M[np.arange(1, n), np.arange(n - 1)] > 0)
        and M[0, n - 1] < 0
    )


def build_A0(sys: LinearCyclicSystem):
    return cyclic_matrix([-v for v in sys.a], sys.b[:-1], sys.b[-1])


def gain_matrix(gains):
    """Normalized loop matrix: ``-1`` diagonal, ``gamma_i`` at (i, i-1), ``-gamma_1`` at (1, n)."""
    gains = as_gains(gains)
    return cyclic_matrix(-np.ones(gains.n), gains[1:], gains[0])


@dataclass(frozen=True)
class Normalized:
    gains: GainVector
    A_bar: np.ndarray


def normalize(sys: LinearCyclicSystem):
    """Left-multiply ``A0`` by ``diag(1/a)``.

    The row gains are ``gamma_1 = b_n / a_1`` and ``gamma_i = b_(i-1) / a_i``,
    so that the result has unit diagonal and ``prod(gamma) = prod(b) / prod(a)``.
    """
    a, b = sys.a, sys.b
    n = sys.n
    gains = GainVector([b[-1] / a[0]] + [b[i - 1] / a[i] for i in range(1, n)])
    return Normalized(gains, gain_matrix(gains))


def eigh(M):
    """Symmetric eigen-decomposition by cyclic Jacobi rotations (ascending)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("eigh needs a square matrix")
    w, V, _ = _backend.kernels.jacobi_eigh(0.5 * (M + M.T))
    return w, V


def spectral_norm(M):
    M = np.asarray(M, dtype=float)
    w, _ = eigh(M.T @ M)
    return math.sqrt(max(w[-1], 0.0))


@dataclass(frozen=True)
class DiagonalScaling:
    """Weights of the decoupled quadratic Lyapunov function for a loop.

    ``Gamma`` alternates in sign with ``|Gamma_i| = gamma_2...gamma_i / r**(i-1)``,
    ``D = Gamma**-2`` (times ``diag(1/a)`` when rates were supplied) and
    ``Q = -(A^T D + D A)``.
    """

    gains: GainVector
    r: float
    Gamma: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    lambda_min: float
    verdict: SecantVerdict

    @property
    def d(self):
        return np.diag(self.D).copy()


def diagonal_scaling(gains, rates=None):
    """Build ``r, Gamma, D, Q`` and ``lambda_min(Q)`` for the gain vector.

    Parameters
    ----------
    gains : sequence of float
        Loop gains ``gamma``.
    rates : sequence of float, optional
        Decay rates ``a``.  When given, the scaling is built for the
        unnormalized matrix ``diag(a) @ gain_matrix(gains)``, using
        ``D = Gamma**-2 @ diag(1/a)``; ``Q`` is unchanged by this.
    """
    gains = as_gains(gains)
    n = gains.n
    g = np.array(gains)
    r = float(np.exp(np.mean(np.log(g))))
    mags = np.ones(n)
    for i in range(1, n):
        mags[i] = mags[i - 1] * g[i] / r
    signs = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)])
    Gamma = signs * mags
    d = 1.0 / mags**2
    A = gain_matrix(gains)
    if rates is not None:
        rates = np.asarray(rates, dtype=float)
        if rates.shape != (n,) or np.any(rates <= 0):
            raise ValidationError("rates must be n positive values")
        d = d / rates
        A = rates[:, None] * A
    D = np.diag(d)
    Q = -(A.T @ D + D @ A)
    Q = 0.5 * (Q + Q.T)
    lam = float(eigh(Q)[0][0])
    verdict = secant_satisfied(gains)
    near_boundary = verdict.margin <= 1e-9 * verdict.threshold
    if verdict.holds and lam <= 0 and not near_boundary:
        raise ConsistencyError(
            f"secant criterion holds (product {verdict.product:.6g} < {verdict.threshold:.6g}) "
            f"but lambda_min(Q) = {lam:.3g}"
        )
    return DiagonalScaling(gains, r, Gamma, D, Q, lam, verdict)


@dataclass(frozen=True)
class HurwitzReport:
    is_hurwitz: bool
    spectral_abscissa: float


def hurwitz(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("hurwitz needs a square matrix")
    try:
        eig = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise ConsistencyError(f"eigenvalue iteration failed: {exc}") from exc
    abscissa = float(np.max(eig.real))
    return HurwitzReport(abscissa < 0.0, abscissa)


@dataclass
class ModalBlock:
    k: int
    A: np.ndarray
    alpha: np.ndarray
    P: np.ndarray | None = None
    norm_bound: float | None = None


def modal_matrices(sys: LinearCyclicSystem, k_max):
    """Blocks ``A_k`` with diagonal ``-(a_i + c_i (k pi)^2)`` for ``k = 0..k_max``."""
    if k_max < 0:
        raise ValidationError("k_max must be nonnegative")
    a = np.array(sys.a)
    c = np.array(sys.c)
    blocks = []
    for k in range(int(k_max) + 1):
        alpha = a + c * (k * math.pi) ** 2
        blocks.append(ModalBlock(k, cyclic_matrix(-alpha, sys.b[:-1], sys.b[-1]), alpha))
    return blocks


def lyapunov_residual(A, P):
    A = np.asarray(A, dtype=float)
    return float(np.max(np.abs(A.T @ P + P @ A + np.eye(A.shape[0]))))


def solve_lyapunov(A):
    """Solve ``A^T P + P A = -I`` through the ``n^2`` Kronecker system.

    Raises :class:`LyapunovError` when ``A`` is not Hurwitz, since no
    positive definite solution exists then.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    report = hurwitz(A)
    if not report.is_hurwitz:
        raise LyapunovError(
            f"no positive definite solution: spectral abscissa {report.spectral_abscissa:.3g} >= 0"
        )
    eye = np.eye(n)
    # row-major vec: vec(A^T P) = (A^T kron I) vec(P), vec(P A) = (I kron A^T) vec(P)
    K = np.kron(A.T, eye) + np.kron(eye, A.T)
    P = np.linalg.solve(K, -eye.reshape(-1)).reshape(n, n)
    P = 0.5 * (P + P.T)
    if eigh(P)[0][0] <= 0:
        raise LyapunovError("no positive definite solution: solved P is indefinite")
    resid = lyapunov_residual(A, P)
    if resid > LYAPUNOV_RESIDUAL_TOL:
        raise ConsistencyError(f"Lyapunov residual {resid:.3g} exceeds {LYAPUNOV_RESIDUAL_TOL:g}")
    return P


def v0_norm(c):
    return 1.0 / (2.0 * math.pi**2 * min(c))


def pk_norm_bound(A0, c, k):
    """Perturbation bound ``||V0|| / (k^2 - 2 ||A0|| ||V0||)`` on ``||P_k||``.

    Returns ``None`` when ``k^2 <= 2 ||A0|| ||V0||`` (the series may diverge).
    """
    if k < 1:
        raise ValidationError("the bound needs k >= 1")
    v0 = v0_norm(c)
    denom = k * k - 2.0 * spectral_norm(A0) * v0
    if denom <= 0:
        return None
    return v0 / denom


@dataclass
class ModeResult:
    k: int
    hurwitz: bool
    abscissa: float
    p_norm: float | None
    bound: float | None
    residual: float | None

    @property
    def within_bound(self):
        if self.bound is None or self.p_norm is None:
            return None
        return self.p_norm <= self.bound * (1 + 1e-12)

    def to_dict(self):
        return {
            "k": self.k,
            "hurwitz": self.hurwitz,
            "abscissa": self.abscissa,
            "p_norm": self.p_norm,
            "bound": self.bound,
        }


@dataclass
class ModalSeriesReport:
    gains: GainVector
    verdict: SecantVerdict
    modes: list
    sup_p_norm: float
    unstable_modes: list
    role: str
    partial_sums: list = field(default_factory=list)

    @property
    def all_hurwitz(self):
        return not self.unstable_modes

    @property
    def bounds_hold(self):
        return all(m.within_bound is not False for m in self.modes)


def modal_coefficients(psi, grid, k_max):
    """Cosine coefficients ``x_k = int phi_k psi`` of each component (trapezoid rule)."""
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    out = np.empty((int(k_max) + 1, psi.shape[0]))
    for k in range(int(k_max) + 1):
        basis = np.ones_like(grid.nodes) if k == 0 else math.sqrt(2.0) * np.cos(k * math.pi * grid.nodes)
        out[k] = (psi * basis) @ grid.weights
    return out


def verify_modal_series(sys: LinearCyclicSystem, k_max, psi0=None, grid=None):
    """Per-mode Hurwitz test, Lyapunov solve and norm bound for ``k = 0..k_max``.

    With an initial field ``psi0`` on ``grid`` the partial sums
    ``s_m = sum_{k<=m} x_k^T P_k x_k`` are reported as well.
    """
    A0 = build_A0(sys)
    normalized = normalize(sys)
    verdict = secant_satisfied(normalized.gains)
    equal_rates = len(set(sys.a)) == 1
    role = "necessary and sufficient" if equal_rates else "sufficient"
    modes = []
    unstable = []
    blocks = modal_matrices(sys, k_max)
    for block in blocks:
        rep = hurwitz(block.A)
        p_norm = bound = resid = None
        if rep.is_hurwitz:
            block.P = solve_lyapunov(block.A)
            p_norm = spectral_norm(block.P)
            resid = lyapunov_residual(block.A, block.P)
        else:
            unstable.append(block.k)
            if verdict.holds:
                raise ConsistencyError(
                    f"mode {block.k} is not Hurwitz although the secant criterion holds"
                )
        if block.k >= 1:
            bound = pk_norm_bound(A0, sys.c, block.k)
            block.norm_bound = bound
        modes.append(ModeResult(block.k, rep.is_hurwitz, rep.spectral_abscissa, p_norm, bound, resid))
    norms = [m.p_norm for m in modes if m.p_norm is not None]
    sup = max(norms) if norms and not unstable else math.inf
    report = ModalSeriesReport(normalized.gains, verdict, modes, sup, unstable, role)
    if psi0 is not None:
        if grid is None:
            raise ValidationError("partial sums need the grid of psi0")
        if unstable:
            raise ValidationError("partial sums are undefined when a mode is unstable")
        coeffs = modal_coefficients(psi0, grid, k_max)
        total = 0.0
        for block, xk in zip(blocks, coeffs):
            total += float(xk @ block.P @ xk)
            report.partial_sums.append(total)
    return report


def analysis_report(sys: LinearCyclicSystem, k_max=20):
    """JSON-ready summary of the secant, scaling and modal analyses."""
    normalized = normalize(sys)
    scaling = diagonal_scaling(normalized.gains)
    verdict = scaling.verdict
    series = verify_modal_series(sys, k_max)
    return {
        "gains": list(normalized.gains),
        "product": verdict.product,
        "threshold": verdict.threshold if math.isfinite(verdict.threshold) else None,
        "holds": verdict.holds,
        "criterion_role": series.role,
        "lambda_min": scaling.lambda_min,
        "d": scaling.d.tolist(),
        "sup_p_norm": series.sup_p_norm if math.isfinite(series.sup_p_norm) else None,
        "unstable_modes": series.unstable_modes,
        "per_mode": [m.to_dict() for m in series.modes],
    }
